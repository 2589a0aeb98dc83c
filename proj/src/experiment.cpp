#include "tailmix/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "tailmix/checkpoint.hpp"
#include "tailmix/trainer.hpp"

namespace tailmix {

namespace fs = std::filesystem;

SubsetPartition make_partition(const PartitionConfig& p, const std::vector<long>& counts) {
    if (p.mode == PartitionMode::absolute) return partition_classes(counts, p.thresholds);
    return partition_classes_quantile(counts, p.head_frac, p.tail_frac);
}

namespace {

void pad_counts(Dataset& ds, int class_count) {
    ds.class_count = class_count;
    ds.class_counts.resize(class_count, 0);
}

std::string now_string() {
    std::time_t t = std::time(nullptr);
    char buf[64];
    std::tm tm{};
    localtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%d %H:%M:%S", &tm);
    return buf;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

DataBundle prepare_data(const ExperimentConfig& cfg) {
    DataBundle b;
    if (cfg.synthetic) {
        auto [id, ood] = generate_synthetic(*cfg.synthetic);
        b.full_counts = id.class_counts;
        SplitResult split = split_dataset(id, cfg.synthetic->seed);
        b.train = std::move(split.train);
        b.val = std::move(split.val);
        b.test = std::move(split.test);
        b.ood.emplace("ood", std::move(ood));
    } else {
        const CsvPaths& p = *cfg.csv;
        b.train = load_csv(p.id_train, CsvRole::id_train);
        b.val = load_csv(p.id_val, CsvRole::id_eval);
        b.test = load_csv(p.id_test, CsvRole::id_eval);
        int m = std::max({b.train.class_count, b.val.class_count, b.test.class_count});
        pad_counts(b.train, m);
        pad_counts(b.val, m);
        pad_counts(b.test, m);
        // The partition reflects full dataset class frequency, so the three
        // split files are pooled before thresholding.
        b.full_counts.assign(m, 0);
        for (int c = 0; c < m; ++c)
            b.full_counts[c] =
                b.train.class_counts[c] + b.val.class_counts[c] + b.test.class_counts[c];
        for (const auto& [name, path] : p.ood) b.ood.emplace(name, load_csv(path, CsvRole::ood_eval));

        int d = b.train.feature_dim();
        if (b.val.feature_dim() != d || b.test.feature_dim() != d)
            throw ConfigError("csv files disagree on feature width");
        for (const auto& [name, ds] : b.ood)
            if (ds.feature_dim() != d)
                throw ConfigError("ood source '" + name + "' feature width " +
                                  std::to_string(ds.feature_dim()) + " does not match ID width " +
                                  std::to_string(d));
    }
    if (b.train.samples.empty()) throw ConfigError("training split is empty");
    if (b.val.samples.empty()) throw ConfigError("validation split is empty");
    if (b.test.samples.empty()) throw ConfigError("test split is empty");
    b.partition = make_partition(cfg.partition, b.full_counts);
    return b;
}

std::string run_dir_name(const ExperimentConfig& cfg, const MethodConfig& method) {
    ExperimentConfig resolved = cfg;
    resolved.method = method;
    resolved.seeds = {method.seed};
    uint64_t h = fnv1a64(experiment_config_to_json(resolved).dump());
    char hex[20];
    std::snprintf(hex, sizeof hex, "%08llx",
                  static_cast<unsigned long long>(h & 0xffffffffull));
    return method_slug(method) + "-s" + std::to_string(method.seed) + "-" + hex;
}

std::string execute_run(const ExperimentConfig& cfg, const MethodConfig& method,
                        const DataBundle& data) {
    const std::string dir = cfg.out_dir + "/" + run_dir_name(cfg, method);
    fs::create_directories(dir);
    std::ofstream log(dir + "/run.log", std::ios::binary);
    auto t0 = std::chrono::steady_clock::now();
    log << now_string() << " start " << method_slug(method) << " seed " << method.seed << "\n";

    ExperimentConfig resolved = cfg;
    resolved.method = method;
    resolved.seeds = {method.seed};
    {
        std::ofstream cj(dir + "/config.json", std::ios::binary);
        cj << experiment_config_to_json(resolved).dump(2) << "\n";
    }

    TrainResult result = train(method, data.train, data.val, data.partition, dir);

    EvalOptions opts;
    opts.proto_score = method.proto_score;
    opts.density_bins = cfg.density_bins;
    EvalReport report = evaluate_model(result.encoder, result.bank ? &*result.bank : nullptr,
                                       data.test, data.ood, data.partition, opts);
    report.checkpoint_kind = "final";
    report.best_epoch = result.best_epoch;

    write_eval_artifacts(report, data.partition, cfg.density_bins, dir, &log);

    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << now_string() << " done in " << fmt17(secs) << "s\n";
    return dir;
}

void write_eval_artifacts(const EvalReport& report, const SubsetPartition& partition,
                          int density_bins, const std::string& dir, std::ostream* warn_log) {
    {
        std::ofstream out(dir + "/report.txt", std::ios::binary);
        out << eval_report_text(report);
    }
    {
        std::ofstream out(dir + "/report.csv", std::ios::binary);
        out << "metric,value\n";
        for (const auto& [k, v] : eval_report_rows(report)) out << k << ',' << v << '\n';
    }
    {
        std::ofstream out(dir + "/predictions.csv", std::ios::binary);
        out << "index,label,prediction,score\n";
        for (size_t i = 0; i < report.labels.size(); ++i)
            out << i << ',' << report.labels[i] << ',' << report.predictions[i] << ','
                << fmt17(report.scores[i]) << '\n';
    }
    {
        std::vector<std::string> warnings;
        auto groups = confidence_groups_for_density(report, partition);
        auto rows = density_export(groups, density_bins, &warnings);
        std::ofstream out(dir + "/density.csv", std::ios::binary);
        out << "group,bin_center,density\n";
        for (const auto& r : rows)
            out << r.group << ',' << fmt17(r.bin_center) << ',' << fmt17(r.density) << '\n';
        if (warn_log)
            for (const auto& w : warnings) *warn_log << now_string() << " warning: " << w << "\n";
    }
}

std::map<std::string, std::string> read_report_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open report '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("report '" + path + "': malformed line '" + line + "'");
        out[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return out;
}

std::vector<SweepRow> ablation_rows(const MethodConfig& base) {
    // The strategy ablation always runs on the softmax head.
    MethodConfig m = base;
    m.head_type = HeadType::softmax;
    auto with = [&m](std::optional<MixupStrategy> s) {
        MethodConfig out = m;
        out.strategy = s;
        return out;
    };
    return {
        {"Baseline", with(std::nullopt)},
        {"Standard Mixup", with(MixupStrategy::standard)},
        {"H-H Intrasubset (MX1)", with(MixupStrategy::mx1)},
        {"M-M Intrasubset (MX2)", with(MixupStrategy::mx2)},
        {"T-T Intrasubset (MX3)", with(MixupStrategy::mx3)},
        {"H-M Intersubset (MX4)", with(MixupStrategy::mx4)},
        {"M-T Intersubset (MX5)", with(MixupStrategy::mx5)},
        {"H-T Intersubset (MX6)", with(MixupStrategy::mx6)},
    };
}

std::vector<SweepRow> benchmark_rows(const MethodConfig& base) {
    auto with = [&base](HeadType h, std::optional<MixupStrategy> s) {
        MethodConfig out = base;
        out.head_type = h;
        out.strategy = s;
        return out;
    };
    return {
        {"Baseline", with(HeadType::softmax, std::nullopt)},
        {"Mixup", with(HeadType::softmax, MixupStrategy::standard)},
        {"Prototype", with(HeadType::prototype, std::nullopt)},
        {"M-T Mixup", with(HeadType::softmax, MixupStrategy::mx5)},
        {"M-T Mixup + Prototype", with(HeadType::prototype, MixupStrategy::mx5)},
    };
}

std::vector<std::string> ablation_metrics(const DataBundle& data) {
    std::vector<std::string> m = {"acc_head", "acc_middle", "acc_tail", "acc_total"};
    for (const auto& [name, ds] : data.ood) m.push_back("auroc:" + name);
    return m;
}

std::vector<std::string> benchmark_metrics(const DataBundle& data) {
    std::vector<std::string> m = {"macro_precision", "macro_recall", "macro_f1"};
    for (const auto& [name, ds] : data.ood) m.push_back("auroc:" + name);
    return m;
}

std::vector<double> SweepSummary::collect(const std::string& label,
                                          const std::string& metric) const {
    std::vector<double> out;
    auto it = cells.find(label);
    if (it == cells.end()) return out;
    for (const auto& per_seed : it->second) {
        auto mit = per_seed.find(metric);
        if (mit != per_seed.end()) out.push_back(mit->second);
    }
    return out;
}

int SweepSummary::failed(const std::string& label) const {
    auto it = cells.find(label);
    if (it == cells.end()) return 0;
    int n = 0;
    for (const auto& per_seed : it->second) n += per_seed.empty();
    return n;
}

double median(std::vector<double> v) {
    if (v.empty()) throw MetricError("median of an empty list");
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

SweepSummary aggregate_sweep(const std::vector<RunOutcome>& outcomes,
                             const std::vector<std::string>& row_labels,
                             const std::vector<std::string>& metric_keys,
                             const std::vector<uint64_t>& seeds) {
    SweepSummary s;
    s.row_labels = row_labels;
    s.metric_keys = metric_keys;
    s.seeds = seeds;
    for (const auto& label : row_labels)
        s.cells[label].resize(seeds.size());

    for (const auto& o : outcomes) {
        auto it = s.cells.find(o.label);
        if (it == s.cells.end()) continue;
        size_t si = std::find(seeds.begin(), seeds.end(), o.seed) - seeds.begin();
        if (si >= seeds.size()) continue;
        if (!o.ok) continue;
        auto report = read_report_csv(o.dir + "/report.csv");
        std::map<std::string, double> vals;
        for (const auto& key : metric_keys) {
            auto rit = report.find(key);
            if (rit == report.end())
                throw MetricError("report " + o.dir + "/report.csv lacks metric '" + key + "'");
            vals[key] = std::strtod(rit->second.c_str(), nullptr);
        }
        it->second[si] = std::move(vals);
    }
    return s;
}

namespace {

std::string metric_header(const std::string& key) {
    if (key == "acc_head") return "head";
    if (key == "acc_middle") return "middle";
    if (key == "acc_tail") return "tail";
    if (key == "acc_total") return "total";
    if (key == "macro_precision") return "id(pre)";
    if (key == "macro_recall") return "id(rec)";
    if (key == "macro_f1") return "id(f1)";
    if (key.rfind("auroc:", 0) == 0) {
        std::string src = key.substr(6);
        return src == "ood" ? "ood (auroc%)" : "ood:" + src + " (auroc%)";
    }
    return key;
}

bool percent_metric(const std::string& key) {
    return key.rfind("acc_", 0) == 0 || key.rfind("auroc:", 0) == 0;
}

std::string row_label_with_failures(const SweepSummary& s, const std::string& label) {
    int f = s.failed(label);
    if (f == 0) return label;
    return label + " [" + std::to_string(f) + "/" + std::to_string(s.seeds.size()) +
           " runs failed]";
}

} // namespace

std::string pad_left(const std::string& s, size_t width) {
    return std::string(s.size() < width ? width - s.size() : 0, ' ') + s;
}

std::string render_ablation_table(const SweepSummary& s) {
    std::ostringstream out;
    out << "ablation summary: medians over " << s.seeds.size()
        << " seeds; accuracies and auroc in %\n\n";

    size_t label_w = std::string("mixup strategy").size();
    for (const auto& l : s.row_labels)
        label_w = std::max(label_w, row_label_with_failures(s, l).size());
    const size_t cell_w = 12;

    out << "mixup strategy" << std::string(label_w - 14, ' ');
    for (const auto& key : s.metric_keys) out << "  " << pad_left(metric_header(key), cell_w);
    out << '\n';

    char buf[64];
    for (const auto& label : s.row_labels) {
        std::string shown = row_label_with_failures(s, label);
        out << shown << std::string(label_w - shown.size(), ' ');
        for (const auto& key : s.metric_keys) {
            auto vals = s.collect(label, key);
            std::string cell = "failed";
            if (!vals.empty()) {
                double v = median(vals) * (percent_metric(key) ? 100.0 : 1.0);
                std::snprintf(buf, sizeof buf, "%.2f", v);
                cell = buf;
            }
            out << "  " << pad_left(cell, cell_w);
        }
        out << '\n';
    }
    return out.str();
}

std::string render_benchmark_table(const SweepSummary& s) {
    std::ostringstream out;
    out << "benchmark summary: median [min, max] over " << s.seeds.size()
        << " seeds; auroc in %, id metrics as fractions\n\n";

    size_t label_w = std::string("method").size();
    for (const auto& l : s.row_labels) label_w = std::max(label_w, row_label_with_failures(s, l).size());
    const size_t cell_w = 24;

    out << "method" << std::string(label_w - 6, ' ');
    for (const auto& key : s.metric_keys) out << "  " << pad_left(metric_header(key), cell_w);
    out << '\n';

    char buf[80];
    for (const auto& label : s.row_labels) {
        std::string shown = row_label_with_failures(s, label);
        out << shown << std::string(label_w - shown.size(), ' ');
        for (const auto& key : s.metric_keys) {
            auto vals = s.collect(label, key);
            std::string cell = "failed";
            if (!vals.empty()) {
                double scale = percent_metric(key) ? 100.0 : 1.0;
                double med = median(vals) * scale;
                double lo = *std::min_element(vals.begin(), vals.end()) * scale;
                double hi = *std::max_element(vals.begin(), vals.end()) * scale;
                int prec = percent_metric(key) ? 2 : 3;
                std::snprintf(buf, sizeof buf, "%.*f [%.*f, %.*f]", prec, med, prec, lo, prec, hi);
                cell = buf;
            }
            out << "  " << pad_left(cell, cell_w);
        }
        out << '\n';
    }
    return out.str();
}

std::string render_summary_csv(const SweepSummary& s) {
    std::ostringstream out;
    out << "method,seed,metric,value\n";
    for (const auto& label : s.row_labels) {
        const auto& per_seed = s.cells.at(label);
        for (size_t si = 0; si < s.seeds.size(); ++si) {
            for (const auto& key : s.metric_keys) {
                out << label << ',' << s.seeds[si] << ',' << key << ',';
                auto mit = per_seed[si].find(key);
                out << (mit == per_seed[si].end() ? "failed" : fmt17(mit->second)) << '\n';
            }
        }
        for (const auto& key : s.metric_keys) {
            auto vals = s.collect(label, key);
            out << label << ",median," << key << ','
                << (vals.empty() ? "failed" : fmt17(median(vals))) << '\n';
        }
    }
    return out.str();
}

int run_sweep(const ExperimentConfig& cfg, SweepKind kind, std::vector<RunOutcome>* outcomes_out) {
    DataBundle data = prepare_data(cfg);
    auto rows = kind == SweepKind::ablation ? ablation_rows(cfg.method) : benchmark_rows(cfg.method);

    struct Plan {
        std::string label;
        MethodConfig method;
    };
    std::vector<Plan> plan;
    for (const auto& row : rows)
        for (uint64_t seed : cfg.seeds) {
            MethodConfig m = row.method;
            m.seed = seed;
            plan.push_back({row.label, m});
        }

    std::vector<RunOutcome> outcomes(plan.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (size_t i; (i = next.fetch_add(1)) < plan.size();) {
            RunOutcome& o = outcomes[i];
            o.label = plan[i].label;
            o.seed = plan[i].method.seed;
            try {
                o.dir = execute_run(cfg, plan[i].method, data);
                o.ok = true;
            } catch (const std::exception& e) {
                o.ok = false;
                o.error = e.what();
            }
        }
    };
    int jobs = std::min<int>(cfg.jobs, static_cast<int>(plan.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<std::string> labels;
    for (const auto& row : rows) labels.push_back(row.label);
    auto metrics = kind == SweepKind::ablation ? ablation_metrics(data) : benchmark_metrics(data);
    SweepSummary summary = aggregate_sweep(outcomes, labels, metrics, cfg.seeds);

    const std::string prefix =
        cfg.out_dir + "/" + (kind == SweepKind::ablation ? "ablation" : "benchmark");
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream out(prefix + "_summary.txt", std::ios::binary);
        out << (kind == SweepKind::ablation ? render_ablation_table(summary)
                                            : render_benchmark_table(summary));
    }
    {
        std::ofstream out(prefix + "_summary.csv", std::ios::binary);
        out << render_summary_csv(summary);
    }

    if (outcomes_out) *outcomes_out = outcomes;
    for (const auto& o : outcomes)
        if (!o.ok) return 2;
    return 0;
}

} // namespace tailmix
