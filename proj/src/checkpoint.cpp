#include "tailmix/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tailmix/config.hpp"

namespace tailmix {

namespace {

constexpr const char* kMagic = "tailmix-checkpoint";
constexpr int kVersion = 1;

void put_hex(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    out << buf;
}

void put_values(std::ostream& out, const std::vector<double>& vs) {
    for (size_t i = 0; i < vs.size(); ++i) {
        if (i) out << ' ';
        put_hex(out, vs[i]);
    }
    out << '\n';
}

// operator>> rejects hexfloats, so every float token goes through strtod.
double read_double(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw LoadError(std::string("checkpoint: truncated reading ") + what);
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
        throw LoadError(std::string("checkpoint: bad float '") + tok + "' in " + what);
    return v;
}

long read_long(std::istream& in, const char* what) {
    long v;
    if (!(in >> v)) throw LoadError(std::string("checkpoint: truncated reading ") + what);
    return v;
}

void expect_word(std::istream& in, const char* word) {
    std::string tok;
    if (!(in >> tok) || tok != word)
        throw LoadError("checkpoint: expected '" + std::string(word) + "', got '" + tok + "'");
}

void read_values(std::istream& in, std::vector<double>& vs, const char* what) {
    for (double& v : vs) v = read_double(in, what);
}

void put_layer(std::ostream& out, const AffineLayer& layer) {
    out << "layer " << layer.fan_out() << ' ' << layer.fan_in() << '\n';
    put_values(out, layer.weight.data);
    put_values(out, layer.bias);
}

AffineLayer read_layer(std::istream& in) {
    expect_word(in, "layer");
    int fan_out = static_cast<int>(read_long(in, "layer dims"));
    int fan_in = static_cast<int>(read_long(in, "layer dims"));
    if (fan_out < 1 || fan_in < 1) throw LoadError("checkpoint: bad layer dims");
    AffineLayer layer;
    layer.weight = Matrix(fan_out, fan_in);
    layer.bias.assign(fan_out, 0.0);
    read_values(in, layer.weight.data, "layer weights");
    read_values(in, layer.bias, "layer bias");
    return layer;
}

} // namespace

void save_checkpoint(const TrainerState& st, std::ostream& out) {
    out << kMagic << ' ' << kVersion << '\n';
    out << "config " << method_config_to_json(st.cfg).dump() << '\n';
    out << "epoch " << st.epoch << '\n';
    out << "best_epoch " << st.best_epoch << '\n';
    out << "best_val_acc ";
    put_hex(out, st.best_val_acc);
    out << '\n';

    out << "encoder " << st.encoder.layers.size() << " head "
        << (st.encoder.classifier_head ? 1 : 0) << '\n';
    for (const auto& layer : st.encoder.layers) put_layer(out, layer);
    if (st.encoder.classifier_head) put_layer(out, *st.encoder.classifier_head);

    if (st.bank) {
        out << "bank " << st.bank->num_classes() << ' ' << st.bank->embedding_dim() << ' ';
        put_hex(out, st.bank->gamma_d);
        out << ' ';
        put_hex(out, st.bank->w_mse);
        out << '\n';
        put_values(out, st.bank->prototypes.data);
    } else {
        out << "bank none\n";
    }

    out << "adam " << st.adam.step << ' ' << st.adam.m.size() << '\n';
    put_values(out, st.adam.m);
    put_values(out, st.adam.v);

    out << "rng ";
    st.rng.save(out);
    out << '\n';

    out << "history " << st.history.size() << '\n';
    for (const auto& e : st.history) {
        out << e.epoch;
        for (double v : {e.train_loss, e.loss_standard, e.loss_mixup, e.val_acc_head,
                         e.val_acc_middle, e.val_acc_tail, e.val_acc_total}) {
            out << ' ';
            put_hex(out, v);
        }
        out << '\n';
    }
    out << "end\n";
}

void save_checkpoint(const TrainerState& st, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StateError("cannot write " + path);
    save_checkpoint(st, out);
    if (!out) throw StateError("write failed for " + path);
}

TrainerState load_checkpoint(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic)
        throw LoadError("checkpoint: not a checkpoint file");
    if (version != kVersion)
        throw LoadError("checkpoint: unsupported version " + std::to_string(version));

    expect_word(in, "config");
    std::string config_line;
    std::getline(in >> std::ws, config_line);
    nlohmann::json cj;
    try {
        cj = nlohmann::json::parse(config_line);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(std::string("checkpoint: bad config line: ") + e.what());
    }

    TrainerState st;
    st.cfg = method_config_from_json(cj);

    expect_word(in, "epoch");
    st.epoch = static_cast<int>(read_long(in, "epoch"));
    expect_word(in, "best_epoch");
    st.best_epoch = static_cast<int>(read_long(in, "best_epoch"));
    expect_word(in, "best_val_acc");
    st.best_val_acc = read_double(in, "best_val_acc");

    expect_word(in, "encoder");
    long n_layers = read_long(in, "encoder layer count");
    expect_word(in, "head");
    long has_head = read_long(in, "encoder head flag");
    if (n_layers < 1) throw LoadError("checkpoint: encoder has no layers");
    for (long k = 0; k < n_layers; ++k) st.encoder.layers.push_back(read_layer(in));
    if (has_head) st.encoder.classifier_head = read_layer(in);

    expect_word(in, "bank");
    std::string bank_tok;
    if (!(in >> bank_tok)) throw LoadError("checkpoint: truncated reading bank");
    if (bank_tok != "none") {
        int m = std::atoi(bank_tok.c_str());
        int e = static_cast<int>(read_long(in, "bank dims"));
        if (m < 2 || e < 1) throw LoadError("checkpoint: bad bank dims");
        PrototypeBank bank;
        bank.prototypes = Matrix(m, e);
        bank.gamma_d = read_double(in, "bank gamma_d");
        bank.w_mse = read_double(in, "bank w_mse");
        read_values(in, bank.prototypes.data, "prototypes");
        st.bank = std::move(bank);
    }

    expect_word(in, "adam");
    st.adam.step = read_long(in, "adam step");
    long n_params = read_long(in, "adam parameter count");
    if (n_params < 0) throw LoadError("checkpoint: bad adam parameter count");
    st.adam.base_lr = st.cfg.learning_rate;
    st.adam.decay = st.cfg.lr_decay;
    st.adam.m.assign(n_params, 0.0);
    st.adam.v.assign(n_params, 0.0);
    read_values(in, st.adam.m, "adam first moments");
    read_values(in, st.adam.v, "adam second moments");

    expect_word(in, "rng");
    st.rng.load(in);
    if (!in) throw LoadError("checkpoint: truncated rng state");

    expect_word(in, "history");
    long n_hist = read_long(in, "history length");
    for (long i = 0; i < n_hist; ++i) {
        EpochStats e;
        e.epoch = static_cast<int>(read_long(in, "history epoch"));
        e.train_loss = read_double(in, "history");
        e.loss_standard = read_double(in, "history");
        e.loss_mixup = read_double(in, "history");
        e.val_acc_head = read_double(in, "history");
        e.val_acc_middle = read_double(in, "history");
        e.val_acc_tail = read_double(in, "history");
        e.val_acc_total = read_double(in, "history");
        st.history.push_back(e);
    }
    expect_word(in, "end");

    // The moment vectors must match the model they step.
    size_t expect = 0;
    for_each_parameter(st.encoder, st.bank ? &st.bank->prototypes : nullptr,
                       [&](double&) { ++expect; });
    if (expect != st.adam.m.size())
        throw LoadError("checkpoint: optimizer state holds " + std::to_string(st.adam.m.size()) +
                        " parameters, model has " + std::to_string(expect));
    return st;
}

TrainerState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("checkpoint: cannot open '" + path + "'");
    return load_checkpoint(in);
}

void check_model_matches(const TrainerState& st, int feature_dim, int class_count) {
    if (st.encoder.input_dim() != feature_dim)
        throw LoadError("checkpoint expects input width " + std::to_string(st.encoder.input_dim()) +
                        " but the data has " + std::to_string(feature_dim));
    int m = st.bank ? st.bank->num_classes() : st.encoder.logit_dim();
    if (class_count > 0 && m != class_count)
        throw LoadError("checkpoint models " + std::to_string(m) + " classes but the data has " +
                        std::to_string(class_count));
}

} // namespace tailmix
