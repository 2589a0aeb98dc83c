#include "tailmix/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tailmix/checkpoint.hpp"
#include "tailmix/experiment.hpp"

namespace tailmix {

namespace fs = std::filesystem;

namespace {

std::vector<uint64_t> parse_seed_list(const std::string& text) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        char* end = nullptr;
        unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
        if (end != tok.c_str() + tok.size())
            throw ConfigError("--seeds: bad seed '" + tok + "'");
        seeds.push_back(v);
    }
    if (seeds.empty()) throw ConfigError("--seeds: needs at least one seed");
    return seeds;
}

struct CommonFlags {
    std::string config;
    std::string out;
    std::string seeds;
    int jobs = 0;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config, "experiment config (JSON)")->required();
    sub->add_option("--out", f.out, "override the output directory");
    sub->add_option("--seeds", f.seeds, "comma-separated training seeds, overrides the config");
    sub->add_option("--jobs", f.jobs, "max concurrent runs in sweeps");
}

ExperimentConfig load_with_overrides(const CommonFlags& f) {
    ExperimentConfig cfg = load_experiment_config(f.config);
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (!f.seeds.empty()) cfg.seeds = parse_seed_list(f.seeds);
    if (f.jobs > 0) cfg.jobs = f.jobs;
    return cfg;
}

int cmd_gen_data(const ExperimentConfig& cfg) {
    if (!cfg.synthetic)
        throw ConfigError("gen-data needs a dataset.synthetic section in the config");
    SyntheticInfo info;
    auto [id, ood] = generate_synthetic(*cfg.synthetic, &info);
    SplitResult split = split_dataset(id, cfg.synthetic->seed);
    SubsetPartition partition = make_partition(cfg.partition, id.class_counts);

    fs::create_directories(cfg.out_dir);
    save_csv(split.train, cfg.out_dir + "/id_train.csv");
    save_csv(split.val, cfg.out_dir + "/id_val.csv");
    save_csv(split.test, cfg.out_dir + "/id_test.csv");
    save_csv(ood, cfg.out_dir + "/ood.csv");

    nlohmann::json m;
    m["class_counts"] = id.class_counts;
    m["split"] = {{"train", split.train.size()},
                  {"val", split.val.size()},
                  {"test", split.test.size()}};
    m["ood_samples"] = ood.size();
    m["partition"] = {{"mode", partition_mode_name(partition.mode)},
                      {"head", partition.head},
                      {"middle", partition.middle},
                      {"tail", partition.tail}};
    m["superclass"] = {{"id", info.id_class_superclass}, {"ood", info.ood_class_superclass}};
    m["config"] = experiment_config_to_json(cfg)["dataset"]["synthetic"];
    std::ofstream out(cfg.out_dir + "/manifest.json", std::ios::binary);
    out << m.dump(2) << '\n';

    std::printf("wrote id_train.csv, id_val.csv, id_test.csv, ood.csv, manifest.json to %s\n",
                cfg.out_dir.c_str());
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    DataBundle data = prepare_data(cfg);
    MethodConfig method = cfg.method;
    method.seed = cfg.seeds.front();
    std::string dir = execute_run(cfg, method, data);
    std::printf("run directory: %s\n", dir.c_str());
    std::ifstream report(dir + "/report.txt", std::ios::binary);
    if (report) std::cout << report.rdbuf();
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg) {
    if (cfg.checkpoint.empty())
        throw ConfigError("eval needs a top-level 'checkpoint' path in the config");
    TrainerState st = load_checkpoint(cfg.checkpoint);
    DataBundle data = prepare_data(cfg);
    check_model_matches(st, data.test.feature_dim(), data.test.class_count);

    EvalOptions opts;
    opts.proto_score = cfg.method.proto_score;
    opts.density_bins = cfg.density_bins;
    EvalReport report = evaluate_model(st.encoder, st.bank ? &*st.bank : nullptr, data.test,
                                       data.ood, data.partition, opts);
    report.checkpoint_kind =
        cfg.checkpoint.find("best") != std::string::npos ? "best" : "final";
    report.best_epoch = st.best_epoch;

    fs::create_directories(cfg.out_dir);
    write_eval_artifacts(report, data.partition, cfg.density_bins, cfg.out_dir);
    std::cout << eval_report_text(report);
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, SweepKind kind) {
    std::vector<RunOutcome> outcomes;
    int code = run_sweep(cfg, kind, &outcomes);
    for (const auto& o : outcomes)
        if (!o.ok)
            std::fprintf(stderr, "run failed: %s seed %llu: %s\n", o.label.c_str(),
                         static_cast<unsigned long long>(o.seed), o.error.c_str());
    const char* prefix = kind == SweepKind::ablation ? "ablation" : "benchmark";
    std::ifstream summary(cfg.out_dir + "/" + prefix + "_summary.txt", std::ios::binary);
    if (summary) std::cout << summary.rdbuf();
    std::printf("summary: %s/%s_summary.txt\n", cfg.out_dir.c_str(), prefix);
    return code;
}

} // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"subset-targeted mixup + prototype training and OOD evaluation"};
    app.require_subcommand(1);

    CommonFlags gen_f, train_f, eval_f, abl_f, bench_f;
    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic dataset as CSV files");
    add_common(gen, gen_f);
    CLI::App* tr = app.add_subcommand("train", "train one method configuration");
    add_common(tr, train_f);
    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on test + OOD data");
    add_common(ev, eval_f);
    CLI::App* abl = app.add_subcommand("ablation", "run the 8-strategy ablation sweep");
    add_common(abl, abl_f);
    CLI::App* bench = app.add_subcommand("benchmark", "run the 5-method benchmark sweep");
    add_common(bench, bench_f);

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(load_with_overrides(gen_f));
        if (tr->parsed()) return cmd_train(load_with_overrides(train_f));
        if (ev->parsed()) return cmd_eval(load_with_overrides(eval_f));
        if (abl->parsed()) return cmd_sweep(load_with_overrides(abl_f), SweepKind::ablation);
        if (bench->parsed()) return cmd_sweep(load_with_overrides(bench_f), SweepKind::benchmark);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}

} // namespace tailmix
