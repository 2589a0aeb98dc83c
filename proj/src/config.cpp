#include "tailmix/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace tailmix {

using nlohmann::json;

namespace {

// Rejecting unknown keys catches config typos that would otherwise be
// silently ignored defaults.
void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown field '" + key + "' in " + where);
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field '" + std::string(key) + "' in " + where +
                          " has the wrong type");
    }
}

const json& require_field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key))
        throw ConfigError("config: missing required field '" + std::string(key) + "' in " + where);
    return j.at(key);
}

} // namespace

json method_config_to_json(const MethodConfig& cfg) {
    json j;
    j["head_type"] = head_type_name(cfg.head_type);
    j["strategy"] = cfg.strategy ? strategy_name(*cfg.strategy) : "none";
    j["alpha"] = cfg.alpha;
    j["mixup_fraction"] = cfg.mixup_fraction;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["lr_decay"] = cfg.lr_decay;
    j["gamma_d"] = cfg.gamma_d;
    j["w_mse"] = cfg.w_mse;
    j["mix_loss_weight"] = cfg.mix_loss_weight;
    j["two_forward"] = cfg.two_forward;
    j["proto_init"] = cfg.proto_init == ProtoInit::random ? "random" : "class_mean";
    j["proto_score"] = proto_score_name(cfg.proto_score);
    j["hidden"] = cfg.hidden;
    j["embedding_dim"] = cfg.embedding_dim;
    j["seed"] = cfg.seed;
    return j;
}

MethodConfig method_config_from_json(const json& j) {
    check_keys(j,
               {"head_type", "strategy", "alpha", "mixup_fraction", "epochs", "batch_size",
                "learning_rate", "lr_decay", "gamma_d", "w_mse", "mix_loss_weight", "two_forward",
                "proto_init", "proto_score", "hidden", "embedding_dim", "seed"},
               "method");
    MethodConfig cfg;
    std::string head = head_type_name(cfg.head_type);
    read_field(j, "head_type", head, "method");
    cfg.head_type = head_type_from_name(head);

    std::string strat = "none";
    read_field(j, "strategy", strat, "method");
    cfg.strategy = strat == "none" ? std::nullopt : std::optional(strategy_from_name(strat));

    read_field(j, "alpha", cfg.alpha, "method");
    read_field(j, "mixup_fraction", cfg.mixup_fraction, "method");
    read_field(j, "epochs", cfg.epochs, "method");
    read_field(j, "batch_size", cfg.batch_size, "method");
    read_field(j, "learning_rate", cfg.learning_rate, "method");
    read_field(j, "lr_decay", cfg.lr_decay, "method");
    read_field(j, "gamma_d", cfg.gamma_d, "method");
    read_field(j, "w_mse", cfg.w_mse, "method");
    read_field(j, "mix_loss_weight", cfg.mix_loss_weight, "method");
    read_field(j, "two_forward", cfg.two_forward, "method");

    std::string pinit = cfg.proto_init == ProtoInit::random ? "random" : "class_mean";
    read_field(j, "proto_init", pinit, "method");
    if (pinit == "random")
        cfg.proto_init = ProtoInit::random;
    else if (pinit == "class_mean")
        cfg.proto_init = ProtoInit::class_mean;
    else
        throw ConfigError("config: proto_init must be random or class_mean, got '" + pinit + "'");

    std::string pscore = proto_score_name(cfg.proto_score);
    read_field(j, "proto_score", pscore, "method");
    cfg.proto_score = proto_score_from_name(pscore);

    read_field(j, "hidden", cfg.hidden, "method");
    read_field(j, "embedding_dim", cfg.embedding_dim, "method");
    read_field(j, "seed", cfg.seed, "method");
    validate_method_config(cfg);
    return cfg;
}

namespace {

json synthetic_to_json(const SyntheticConfig& s) {
    json j;
    j["num_id_classes"] = s.num_id_classes;
    j["num_ood_classes"] = s.num_ood_classes;
    j["feature_dim"] = s.feature_dim;
    j["superclass_count"] = s.superclass_count;
    j["subcluster_spread"] = s.subcluster_spread;
    j["noise_scale"] = s.noise_scale;
    j["max_class_count"] = s.max_class_count;
    j["powerlaw_exponent"] = s.powerlaw_exponent;
    j["ood_samples_per_class"] = s.ood_samples_per_class;
    j["seed"] = s.seed;
    return j;
}

SyntheticConfig synthetic_from_json(const json& j) {
    check_keys(j,
               {"num_id_classes", "num_ood_classes", "feature_dim", "superclass_count",
                "subcluster_spread", "noise_scale", "max_class_count", "powerlaw_exponent",
                "ood_samples_per_class", "seed"},
               "dataset.synthetic");
    SyntheticConfig s;
    read_field(j, "num_id_classes", s.num_id_classes, "dataset.synthetic");
    read_field(j, "num_ood_classes", s.num_ood_classes, "dataset.synthetic");
    read_field(j, "feature_dim", s.feature_dim, "dataset.synthetic");
    read_field(j, "superclass_count", s.superclass_count, "dataset.synthetic");
    read_field(j, "subcluster_spread", s.subcluster_spread, "dataset.synthetic");
    read_field(j, "noise_scale", s.noise_scale, "dataset.synthetic");
    read_field(j, "max_class_count", s.max_class_count, "dataset.synthetic");
    read_field(j, "powerlaw_exponent", s.powerlaw_exponent, "dataset.synthetic");
    read_field(j, "ood_samples_per_class", s.ood_samples_per_class, "dataset.synthetic");
    read_field(j, "seed", s.seed, "dataset.synthetic");
    return s;
}

CsvPaths csv_from_json(const json& j) {
    check_keys(j, {"id_train", "id_val", "id_test", "ood"}, "dataset.csv");
    CsvPaths p;
    p.id_train = require_field(j, "id_train", "dataset.csv").get<std::string>();
    p.id_val = require_field(j, "id_val", "dataset.csv").get<std::string>();
    p.id_test = require_field(j, "id_test", "dataset.csv").get<std::string>();
    if (j.contains("ood")) {
        for (const auto& [name, path] : j.at("ood").items()) {
            if (!path.is_string())
                throw ConfigError("config: dataset.csv.ood entries must be path strings");
            p.ood[name] = path.get<std::string>();
        }
    }
    return p;
}

PartitionConfig partition_from_json(const json& j) {
    check_keys(j, {"mode", "tail_max", "head_min", "head_frac", "tail_frac"}, "partition");
    PartitionConfig p;
    std::string mode = "absolute";
    read_field(j, "mode", mode, "partition");
    if (mode == "absolute")
        p.mode = PartitionMode::absolute;
    else if (mode == "quantile")
        p.mode = PartitionMode::quantile;
    else
        throw ConfigError("config: partition.mode must be absolute or quantile, got '" + mode +
                          "'");
    read_field(j, "tail_max", p.thresholds.tail_max, "partition");
    read_field(j, "head_min", p.thresholds.head_min, "partition");
    read_field(j, "head_frac", p.head_frac, "partition");
    read_field(j, "tail_frac", p.tail_frac, "partition");
    return p;
}

} // namespace

json experiment_config_to_json(const ExperimentConfig& cfg) {
    json j;
    if (cfg.synthetic) j["dataset"]["synthetic"] = synthetic_to_json(*cfg.synthetic);
    if (cfg.csv) {
        json c;
        c["id_train"] = cfg.csv->id_train;
        c["id_val"] = cfg.csv->id_val;
        c["id_test"] = cfg.csv->id_test;
        c["ood"] = cfg.csv->ood;
        j["dataset"]["csv"] = c;
    }
    json p;
    p["mode"] = partition_mode_name(cfg.partition.mode);
    if (cfg.partition.mode == PartitionMode::absolute) {
        p["tail_max"] = cfg.partition.thresholds.tail_max;
        p["head_min"] = cfg.partition.thresholds.head_min;
    } else {
        p["head_frac"] = cfg.partition.head_frac;
        p["tail_frac"] = cfg.partition.tail_frac;
    }
    j["partition"] = p;
    j["method"] = method_config_to_json(cfg.method);
    j["out_dir"] = cfg.out_dir;
    if (!cfg.checkpoint.empty()) j["checkpoint"] = cfg.checkpoint;
    j["seeds"] = cfg.seeds;
    j["jobs"] = cfg.jobs;
    j["density_bins"] = cfg.density_bins;
    return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
    check_keys(j,
               {"dataset", "partition", "method", "out_dir", "checkpoint", "seeds", "jobs",
                "density_bins"},
               "top level");
    ExperimentConfig cfg;

    const json& ds = require_field(j, "dataset", "top level");
    if (!ds.is_object()) throw ConfigError("config: 'dataset' must be an object");
    check_keys(ds, {"synthetic", "csv"}, "dataset");
    if (ds.contains("synthetic") == ds.contains("csv"))
        throw ConfigError("config: dataset needs exactly one of 'synthetic' or 'csv'");
    if (ds.contains("synthetic")) cfg.synthetic = synthetic_from_json(ds.at("synthetic"));
    if (ds.contains("csv")) cfg.csv = csv_from_json(ds.at("csv"));

    if (j.contains("partition")) {
        if (!j.at("partition").is_object())
            throw ConfigError("config: 'partition' must be an object");
        cfg.partition = partition_from_json(j.at("partition"));
    } else if (cfg.synthetic) {
        // Desk-scale synthetic counts never clear the absolute head
        // threshold, so the rank-based rule is the sensible default here.
        cfg.partition.mode = PartitionMode::quantile;
    }
    if (j.contains("method")) {
        if (!j.at("method").is_object()) throw ConfigError("config: 'method' must be an object");
        cfg.method = method_config_from_json(j.at("method"));
    }
    read_field(j, "out_dir", cfg.out_dir, "top level");
    read_field(j, "checkpoint", cfg.checkpoint, "top level");
    read_field(j, "seeds", cfg.seeds, "top level");
    read_field(j, "jobs", cfg.jobs, "top level");
    read_field(j, "density_bins", cfg.density_bins, "top level");

    if (cfg.seeds.empty()) cfg.seeds = {cfg.method.seed};
    if (cfg.jobs < 1) throw ConfigError("config: jobs must be >= 1");
    if (cfg.density_bins < 2) throw ConfigError("config: density_bins must be >= 2");
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports a byte offset; turn it into a line number.
        size_t line = 1;
        for (size_t i = 0; i < std::min(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw ParseError("config: " + path + " line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError("config: " + path + " must hold a JSON object");
    return experiment_config_from_json(j);
}

std::string method_slug(const MethodConfig& cfg) {
    std::string base = cfg.strategy ? strategy_name(*cfg.strategy) : "baseline";
    if (cfg.head_type == HeadType::prototype)
        return cfg.strategy ? base + "-prototype" : "prototype";
    return base;
}

} // namespace tailmix
