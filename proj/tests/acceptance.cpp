// Acceptance gate: one PASS/FAIL line per criterion, exit code = number of
// failures. Tolerances are pinned here and must not be loosened to make a
// failing criterion pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tailmix/experiment.hpp"
#include "tailmix/losses.hpp"
#include "tailmix/mixup.hpp"
#include "tailmix/prototype.hpp"
#include "tailmix/trainer.hpp"

using namespace tailmix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string scratch_dir(const std::string& tag) {
    static std::mt19937_64 gen(std::random_device{}());
    auto path = fs::temp_directory_path() / ("tailmix-acceptance-" + tag + "-" +
                                             std::to_string(gen()));
    fs::create_directories(path);
    return path.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<missing:" + path + ">";
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Dataset counted_dataset(const std::vector<long>& counts, int dim, uint64_t seed) {
    Dataset ds;
    ds.class_count = static_cast<int>(counts.size());
    ds.class_counts = counts;
    Rng rng(seed);
    for (int c = 0; c < ds.class_count; ++c)
        for (long i = 0; i < counts[c]; ++i) {
            LabeledSample s;
            s.label = c;
            for (int d = 0; d < dim; ++d) s.features.push_back(3.0 * c + 0.3 * rng.normal());
            ds.samples.push_back(std::move(s));
        }
    return ds;
}

template <typename SetF, typename LossF>
double central_diff(SetF&& set, LossF&& loss, double x0, double h = 1e-5) {
    set(x0 + h);
    double up = loss();
    set(x0 - h);
    double down = loss();
    set(x0);
    return (up - down) / (2.0 * h);
}

// ---------------------------------------------------------------- criterion 1

// Analytic gradients of all six losses against central differences:
// plain CE, mixed-pair CE, standard prototype, mixed-pair MSE, mixed-pair
// DCE, and the combined mixup prototype loss.
Outcome check_gradients() {
    auto t0 = std::chrono::steady_clock::now();
    const int kInstances = 25;
    const double kTol = 1e-5;
    double worst = 0.0;
    std::string worst_name = "-";
    long checks = 0;

    // relative error of the whole gradient vector: per-component comparison
    // drowns in FD roundoff once a partial (far prototype, improbable class)
    // falls below the noise floor
    auto note = [&](const char* name, const std::vector<double>& analytic,
                    const std::vector<double>& numeric) {
        double diff = 0, scale = 1e-12;
        for (size_t i = 0; i < analytic.size(); ++i) {
            diff = std::max(diff, std::fabs(analytic[i] - numeric[i]));
            scale = std::max({scale, std::fabs(analytic[i]), std::fabs(numeric[i])});
        }
        if (diff / scale > worst) {
            worst = diff / scale;
            worst_name = name;
        }
        checks += static_cast<long>(analytic.size());
    };

    Rng rng(2024);
    for (int t = 0; t < kInstances; ++t) {
        const int k = 3 + static_cast<int>(rng.uniform_below(6));
        std::vector<double> logits(k);
        for (double& v : logits) v = 2.0 * rng.normal();
        const int y_i = static_cast<int>(rng.uniform_below(k));
        int y_j = static_cast<int>(rng.uniform_below(k));
        while (y_j == y_i) y_j = static_cast<int>(rng.uniform_below(k));
        const double lambda = rng.uniform();

        // plain CE over logits
        std::vector<double> g(k, 0.0), fd(k, 0.0);
        softmax_ce_grad(logits, y_i, 1.0, g);
        for (int d = 0; d < k; ++d)
            fd[d] = central_diff([&](double v) { logits[d] = v; },
                                 [&] { return softmax_ce(logits, y_i); }, logits[d]);
        note("ce", g, fd);

        // mixed-pair CE over logits
        std::fill(g.begin(), g.end(), 0.0);
        mixup_ce_grad(logits, y_i, y_j, lambda, 1.0, g);
        for (int d = 0; d < k; ++d)
            fd[d] = central_diff([&](double v) { logits[d] = v; },
                                 [&] { return mixup_ce_loss(logits, y_i, y_j, lambda); },
                                 logits[d]);
        note("mixup-ce", g, fd);

        // prototype losses over embedding and prototypes
        const int m = 2 + static_cast<int>(rng.uniform_below(4));
        const int e = 2 + static_cast<int>(rng.uniform_below(4));
        PrototypeBank bank;
        bank.prototypes = Matrix(m, e);
        for (double& v : bank.prototypes.data) v = rng.normal();
        bank.gamma_d = 0.4 + rng.uniform();
        bank.w_mse = 0.05;
        PrototypeBank dce_only = bank;
        dce_only.w_mse = 0.0; // reduces the combined loss to its DCE term
        std::vector<double> f(e);
        for (double& v : f) v = rng.normal();
        const int p_i = static_cast<int>(rng.uniform_below(m));
        int p_j = static_cast<int>(rng.uniform_below(m));
        while (p_j == p_i) p_j = static_cast<int>(rng.uniform_below(m));

        struct Case {
            const char* name;
            const PrototypeBank* bank;
            std::function<double()> loss;
            std::function<void(std::span<double>, Matrix&)> grad;
        };
        std::vector<Case> cases = {
            {"proto-std", &bank, [&] { return standard_prototype_loss(f, p_i, bank); },
             [&](std::span<double> df, Matrix& dP) {
                 standard_prototype_loss_grad(f, p_i, bank, 1.0, df, dP);
             }},
            {"mixup-mse", &bank, [&] { return mixup_mse_loss(f, p_i, p_j, lambda, bank); },
             [&](std::span<double> df, Matrix& dP) {
                 mixup_mse_loss_grad(f, p_i, p_j, lambda, bank, 1.0, df, dP);
             }},
            {"mixup-dce", &dce_only,
             [&] { return mixup_dce_loss(f, p_i, p_j, lambda, dce_only); },
             [&](std::span<double> df, Matrix& dP) {
                 total_mixup_prototype_loss_grad(f, p_i, p_j, lambda, dce_only, 1.0, df, dP);
             }},
            {"proto-total", &bank,
             [&] { return total_mixup_prototype_loss(f, p_i, p_j, lambda, bank); },
             [&](std::span<double> df, Matrix& dP) {
                 total_mixup_prototype_loss_grad(f, p_i, p_j, lambda, bank, 1.0, df, dP);
             }},
        };
        for (auto& c : cases) {
            std::vector<double> df(e, 0.0);
            Matrix dP(m, e);
            c.grad(df, dP);
            std::vector<double> analytic, numeric;
            for (int d = 0; d < e; ++d) {
                analytic.push_back(df[d]);
                numeric.push_back(central_diff([&](double v) { f[d] = v; }, c.loss, f[d]));
            }
            Matrix& P = const_cast<PrototypeBank*>(c.bank)->prototypes;
            for (int r = 0; r < m; ++r)
                for (int col = 0; col < e; ++col) {
                    analytic.push_back(dP(r, col));
                    numeric.push_back(
                        central_diff([&](double v) { P(r, col) = v; }, c.loss, P(r, col)));
                }
            note(c.name, analytic, numeric);
        }
    }

    const double elapsed = seconds_since(t0);
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "6 losses, %d instances, %ld partials, max rel err %.2e (%s), %.1fs",
                  kInstances, checks, worst, worst_name.c_str(), elapsed);
    return {worst < kTol && elapsed < 30.0, buf};
}

// ---------------------------------------------------------------- criterion 2

Outcome check_degeneracies() {
    const int kInstances = 1000;
    const double kTol = 1e-12;
    double worst = 0.0;
    Rng rng(515);
    for (int t = 0; t < kInstances; ++t) {
        const int k = 3 + static_cast<int>(rng.uniform_below(6));
        std::vector<double> logits(k);
        for (double& v : logits) v = 3.0 * rng.normal();
        const int y_i = static_cast<int>(rng.uniform_below(k));
        int y_j = static_cast<int>(rng.uniform_below(k));
        while (y_j == y_i) y_j = static_cast<int>(rng.uniform_below(k));

        worst = std::max(worst,
                         std::fabs(mixup_ce_loss(logits, y_i, y_j, 1.0) - softmax_ce(logits, y_i)));
        worst = std::max(worst,
                         std::fabs(mixup_ce_loss(logits, y_i, y_j, 0.0) - softmax_ce(logits, y_j)));

        const int m = 2 + static_cast<int>(rng.uniform_below(5));
        const int e = 1 + static_cast<int>(rng.uniform_below(6));
        PrototypeBank bank;
        bank.prototypes = Matrix(m, e);
        for (double& v : bank.prototypes.data) v = rng.normal();
        bank.gamma_d = 0.3 + 2.0 * rng.uniform();
        bank.w_mse = 0.2 * rng.uniform();
        std::vector<double> f(e);
        for (double& v : f) v = 2.0 * rng.normal();
        const int p_i = static_cast<int>(rng.uniform_below(m));
        int p_j = static_cast<int>(rng.uniform_below(m));
        while (p_j == p_i) p_j = static_cast<int>(rng.uniform_below(m));

        worst = std::max(worst, std::fabs(total_mixup_prototype_loss(f, p_i, p_j, 1.0, bank) -
                                          standard_prototype_loss(f, p_i, bank)));
        worst = std::max(worst, std::fabs(total_mixup_prototype_loss(f, p_i, p_j, 0.0, bank) -
                                          standard_prototype_loss(f, p_j, bank)));
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d instances, max |deviation| %.2e", kInstances, worst);
    return {worst <= kTol, buf};
}

// ---------------------------------------------------------------- criterion 3

Outcome check_auroc_oracle() {
    const int kInstances = 500;
    const double kTol = 1e-12;
    double worst = 0.0;
    int with_ties = 0;
    Rng rng(909);
    for (int t = 0; t < kInstances; ++t) {
        const int n = 1 + static_cast<int>(rng.uniform_below(200));
        const int m = 1 + static_cast<int>(rng.uniform_below(200));
        const bool grid = t % 5 < 3; // 60% tie-heavy instances
        auto draw = [&](int count) {
            std::vector<double> v(count);
            for (double& x : v)
                x = grid ? static_cast<double>(rng.uniform_below(15)) / 5.0 : rng.normal();
            return v;
        };
        auto id = draw(n), ood = draw(m);

        double wins = 0;
        bool tied = false;
        for (double a : id)
            for (double b : ood) {
                if (a > b)
                    wins += 1.0;
                else if (a == b) {
                    wins += 0.5;
                    tied = true;
                }
            }
        const double brute = wins / (static_cast<double>(n) * static_cast<double>(m));
        worst = std::max(worst, std::fabs(auroc(id, ood) - brute));
        with_ties += tied;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d instances (n,m <= 200), %.0f%% with ties, max |diff| %.2e",
                  kInstances, 100.0 * with_ties / kInstances, worst);
    return {worst <= kTol && with_ties >= kInstances * 3 / 10, buf};
}

// ---------------------------------------------------------------- criterion 4

Outcome check_strategy_membership() {
    const int kPairs = 10000;
    Dataset train = counted_dataset({60, 50, 40, 30, 25, 20, 15, 10, 8, 6}, 3, 7);
    SubsetPartition part = partition_classes_quantile(train.class_counts);

    auto in = [](const std::vector<int>& v, int x) {
        for (int c : v)
            if (c == x) return true;
        return false;
    };
    std::vector<int> all;
    for (const auto* sub : {&part.head, &part.middle, &part.tail})
        all.insert(all.end(), sub->begin(), sub->end());

    struct Expect {
        MixupStrategy strategy;
        const std::vector<int>*first, *second;
    };
    const std::vector<Expect> cases = {
        {MixupStrategy::standard, &all, &all},    {MixupStrategy::mx1, &part.head, &part.head},
        {MixupStrategy::mx2, &part.middle, &part.middle},
        {MixupStrategy::mx3, &part.tail, &part.tail},
        {MixupStrategy::mx4, &part.head, &part.middle},
        {MixupStrategy::mx5, &part.middle, &part.tail},
        {MixupStrategy::mx6, &part.head, &part.tail},
    };

    long violations = 0;
    Rng rng(333);
    for (const auto& c : cases) {
        PairSampler sampler(train, part, c.strategy, 0.2);
        for (int t = 0; t < kPairs; ++t) {
            MixupPair p = sampler.sample(rng);
            if (!in(*c.first, p.y_i) || !in(*c.second, p.y_j) || p.y_i == p.y_j) ++violations;
        }
    }
    char buf[120];
    std::snprintf(buf, sizeof buf, "7 strategies x %d pairs, %ld violations", kPairs, violations);
    return {violations == 0, buf};
}

// ---------------------------------------------------------------- criterion 5

Outcome check_partition_rule() {
    SubsetPartition part = partition_classes({12000, 10000, 500, 499}, {500, 10000});
    const bool ok = part.head == std::vector<int>{0} && part.middle == std::vector<int>{1, 2} &&
                    part.tail == std::vector<int>{3};
    return {ok, "counts (12000,10000,500,499), thresholds (500,10000) -> H={0} M={1,2} T={3}"};
}

// ---------------------------------------------------------------- criterion 6

// The stock long-tailed benchmark: default generator (20 ID classes, 5
// held-out subclusters of the same superclasses, power-law counts) and
// default method settings, quantile partition, nine seeds.
ExperimentConfig replication_config(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.synthetic = SyntheticConfig{};
    cfg.partition.mode = PartitionMode::quantile;
    cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    cfg.out_dir = out_dir;
    return cfg;
}

Outcome check_directional_replication() {
    auto t0 = std::chrono::steady_clock::now();
    const std::string dir = scratch_dir("replication");
    ExperimentConfig cfg = replication_config(dir);

    DataBundle data;
    try {
        data = prepare_data(cfg);
    } catch (const std::exception& e) {
        return {false, std::string("data preparation failed: ") + e.what()};
    }

    std::vector<RunOutcome> outcomes;
    double max_run_s = 0.0;
    for (const SweepRow& row : benchmark_rows(cfg.method)) {
        for (uint64_t seed : cfg.seeds) {
            MethodConfig m = row.method;
            m.seed = seed;
            RunOutcome o;
            o.label = row.label;
            o.seed = seed;
            auto r0 = std::chrono::steady_clock::now();
            try {
                o.dir = execute_run(cfg, m, data);
                o.ok = true;
            } catch (const std::exception& e) {
                o.error = e.what();
            }
            max_run_s = std::max(max_run_s, seconds_since(r0));
            outcomes.push_back(std::move(o));
        }
    }

    std::vector<std::string> labels;
    for (const SweepRow& row : benchmark_rows(cfg.method)) labels.push_back(row.label);
    SweepSummary s = aggregate_sweep(outcomes, labels, {"auroc:ood", "acc_tail", "acc_total"},
                                     cfg.seeds);

    auto med = [&](const std::string& label, const std::string& key, bool* ok) {
        auto vals = s.collect(label, key);
        if (vals.empty()) {
            *ok = false;
            return 0.0;
        }
        return median(vals);
    };
    bool have_all = true;
    const double auroc_base = med("Baseline", "auroc:ood", &have_all);
    const double auroc_mix = med("Mixup", "auroc:ood", &have_all);
    const double auroc_ours = med("M-T Mixup + Prototype", "auroc:ood", &have_all);
    const double tail_base = med("Baseline", "acc_tail", &have_all);
    const double tail_mx5 = med("M-T Mixup", "acc_tail", &have_all);
    const double total_s = seconds_since(t0);

    if (!have_all) {
        int failures = 0;
        for (const auto& o : outcomes) failures += !o.ok;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%d of %zu runs failed, medians unavailable", failures,
                      outcomes.size());
        fs::remove_all(dir);
        return {false, buf};
    }

    const bool order_a = auroc_ours >= auroc_base;
    const bool order_b = auroc_ours >= auroc_mix;
    const bool order_tail = tail_mx5 >= tail_base;
    const bool in_time = max_run_s <= 120.0 && total_s <= 1800.0;

    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "median auroc%%: ours %.2f vs baseline %.2f (%s), vs mixup %.2f (%s); "
                  "median tail acc%%: mx5 %.2f vs baseline %.2f (%s); "
                  "max run %.1fs, sweep %.1fs",
                  100 * auroc_ours, 100 * auroc_base, order_a ? "ok" : "VIOLATED",
                  100 * auroc_mix, order_b ? "ok" : "VIOLATED", 100 * tail_mx5, 100 * tail_base,
                  order_tail ? "ok" : "VIOLATED", max_run_s, total_s);
    fs::remove_all(dir);
    return {order_a && order_b && order_tail && in_time, buf};
}

// ---------------------------------------------------------------- criterion 7

Outcome check_determinism() {
    const std::string dir = scratch_dir("determinism");
    ExperimentConfig cfg;
    SyntheticConfig syn;
    syn.num_id_classes = 8;
    syn.num_ood_classes = 2;
    syn.feature_dim = 6;
    syn.superclass_count = 4;
    syn.max_class_count = 80;
    syn.powerlaw_exponent = 0.9;
    syn.ood_samples_per_class = 30;
    cfg.synthetic = syn;
    cfg.partition.mode = PartitionMode::quantile;
    cfg.method.hidden = {12};
    cfg.method.embedding_dim = 8;
    cfg.method.epochs = 4;
    cfg.method.learning_rate = 0.01;
    cfg.method.head_type = HeadType::prototype;
    cfg.method.strategy = MixupStrategy::mx5;
    cfg.out_dir = dir;

    const char* metric_files[] = {"report.csv",  "report.txt",           "predictions.csv",
                                  "density.csv", "history.csv",          "config.json",
                                  "checkpoint_final.txt", "checkpoint_best.txt"};
    try {
        DataBundle data = prepare_data(cfg);
        std::string run1 = execute_run(cfg, cfg.method, data);
        std::map<std::string, std::string> snapshot;
        for (const char* f : metric_files) snapshot[f] = slurp(run1 + "/" + f);

        // rerun with the identical config: same run directory, overwritten
        std::string run2 = execute_run(cfg, cfg.method, data);
        if (run1 != run2) {
            fs::remove_all(dir);
            return {false, "rerun landed in a different directory"};
        }
        for (const char* f : metric_files) {
            if (slurp(run2 + "/" + f) != snapshot[f]) {
                fs::remove_all(dir);
                return {false, std::string(f) + " differs between identical reruns"};
            }
        }
    } catch (const std::exception& e) {
        fs::remove_all(dir);
        return {false, std::string("run failed: ") + e.what()};
    }
    fs::remove_all(dir);
    char buf[120];
    std::snprintf(buf, sizeof buf, "%zu metric files byte-identical across a rerun",
                  std::size(metric_files));
    return {true, buf};
}

// ---------------------------------------------------------------- criterion 8

Outcome check_table_shape() {
    const std::string dir = scratch_dir("tables");
    ExperimentConfig cfg;
    SyntheticConfig syn;
    syn.num_id_classes = 10;
    syn.num_ood_classes = 2;
    syn.feature_dim = 5;
    syn.superclass_count = 3;
    syn.max_class_count = 50;
    syn.powerlaw_exponent = 0.7;
    syn.ood_samples_per_class = 20;
    cfg.synthetic = syn;
    cfg.partition.mode = PartitionMode::quantile;
    cfg.method.hidden = {8};
    cfg.method.embedding_dim = 6;
    cfg.method.epochs = 1;
    cfg.method.batch_size = 16;
    cfg.method.learning_rate = 0.01;
    cfg.seeds = {1, 2};
    cfg.out_dir = dir;

    int rc_ab = run_sweep(cfg, SweepKind::ablation);
    int rc_be = run_sweep(cfg, SweepKind::benchmark);
    if (rc_ab != 0 || rc_be != 0) {
        fs::remove_all(dir);
        return {false, "sweep runs failed, tables not comparable"};
    }

    auto lines_of = [](const std::string& text) {
        std::vector<std::string> lines;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        return lines;
    };
    auto starts_with = [](const std::string& s, const std::string& prefix) {
        return s.rfind(prefix, 0) == 0;
    };
    auto has_columns = [](const std::string& header, const std::vector<std::string>& cols) {
        size_t pos = 0;
        for (const auto& c : cols) {
            pos = header.find(c, pos);
            if (pos == std::string::npos) return false;
            pos += c.size();
        }
        return true;
    };

    // Strategy-ablation layout: 8 fixed rows, per-subset accuracy columns
    // plus the OOD column.
    auto ab = lines_of(slurp(dir + "/ablation_summary.txt"));
    const std::vector<std::string> ab_rows = {
        "Baseline",
        "Standard Mixup",
        "H-H Intrasubset (MX1)",
        "M-M Intrasubset (MX2)",
        "T-T Intrasubset (MX3)",
        "H-M Intersubset (MX4)",
        "M-T Intersubset (MX5)",
        "H-T Intersubset (MX6)",
    };
    bool ok = ab.size() >= 3 + ab_rows.size();
    if (ok) ok = starts_with(ab[2], "mixup strategy") &&
                 has_columns(ab[2], {"head", "middle", "tail", "total", "ood (auroc%)"});
    for (size_t i = 0; ok && i < ab_rows.size(); ++i) ok = starts_with(ab[3 + i], ab_rows[i]);
    if (!ok) {
        fs::remove_all(dir);
        return {false, "ablation table deviates from the golden layout"};
    }

    // Method-benchmark layout: 5 fixed rows, macro ID metrics plus OOD.
    auto be = lines_of(slurp(dir + "/benchmark_summary.txt"));
    const std::vector<std::string> be_rows = {"Baseline", "Mixup", "Prototype", "M-T Mixup",
                                              "M-T Mixup + Prototype"};
    ok = be.size() >= 3 + be_rows.size();
    if (ok) ok = starts_with(be[2], "method") &&
                 has_columns(be[2], {"id(pre)", "id(rec)", "id(f1)", "ood (auroc%)"});
    // row order must be exact; "Baseline" and "Mixup"/"M-T Mixup" prefixes
    // collide, so compare against the label plus its padding or bracket
    for (size_t i = 0; ok && i < be_rows.size(); ++i) {
        const std::string& line = be[3 + i];
        ok = starts_with(line, be_rows[i]) &&
             (line.size() == be_rows[i].size() || line[be_rows[i].size()] == ' ');
    }
    if (!ok) {
        fs::remove_all(dir);
        return {false, "benchmark table deviates from the golden layout"};
    }

    // the CSV twins hold one median row per cell
    auto csv = slurp(dir + "/benchmark_summary.csv");
    size_t medians = 0, pos = 0;
    while ((pos = csv.find(",median,", pos)) != std::string::npos) {
        ++medians;
        pos += 1;
    }
    if (medians != be_rows.size() * 4) {
        fs::remove_all(dir);
        return {false, "benchmark csv median rows missing"};
    }

    fs::remove_all(dir);
    return {true, "8-row ablation and 5-row benchmark layouts match the golden shape"};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {"gradient-correctness", check_gradients},
        {"degeneracy-identities", check_degeneracies},
        {"auroc-oracle", check_auroc_oracle},
        {"strategy-membership", check_strategy_membership},
        {"partition-rule", check_partition_rule},
        {"directional-replication", check_directional_replication},
        {"determinism", check_determinism},
        {"table-shape", check_table_shape},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("unexpected exception: ") + e.what()};
        }
        std::printf("%s: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    }
    if (failures) std::printf("%d of 8 criteria failed\n", failures);
    return failures;
}
