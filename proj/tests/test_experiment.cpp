#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "tailmix/experiment.hpp"

using namespace tailmix;
namespace fs = std::filesystem;

namespace {

// Small synthetic experiment that trains in well under a second.
ExperimentConfig tiny_experiment(const std::string& out_dir) {
    ExperimentConfig cfg;
    SyntheticConfig syn;
    syn.num_id_classes = 6;
    syn.num_ood_classes = 2;
    syn.feature_dim = 5;
    syn.superclass_count = 3;
    syn.max_class_count = 60;
    syn.powerlaw_exponent = 0.8;
    syn.ood_samples_per_class = 25;
    syn.seed = 5;
    cfg.synthetic = syn;
    cfg.partition.mode = PartitionMode::quantile;
    cfg.method.hidden = {8};
    cfg.method.embedding_dim = 6;
    cfg.method.epochs = 3;
    cfg.method.batch_size = 16;
    cfg.method.learning_rate = 0.01;
    cfg.method.seed = 2;
    cfg.seeds = {2};
    cfg.out_dir = out_dir;
    return cfg;
}

} // namespace

TEST_SUITE("experiment") {

TEST_CASE("prepare_data splits the synthetic set and keeps full counts") {
    ExperimentConfig cfg = tiny_experiment("unused");
    DataBundle data = prepare_data(cfg);

    auto counts = powerlaw_counts(60, 0.8, 6);
    CHECK(data.full_counts == counts);
    // split sizes recombine to the full counts per class
    for (int c = 0; c < 6; ++c)
        CHECK(data.train.class_counts[c] + data.val.class_counts[c] +
                  data.test.class_counts[c] ==
              counts[c]);
    REQUIRE(data.ood.count("ood") == 1);
    CHECK(data.ood.at("ood").size() == 50);
    CHECK(data.partition.mode == PartitionMode::quantile);
    CHECK(data.partition.total_classes() == 6);
}

TEST_CASE("run directory names are deterministic and config-sensitive") {
    ExperimentConfig cfg = tiny_experiment("out");
    std::string a = run_dir_name(cfg, cfg.method);
    CHECK(a == run_dir_name(cfg, cfg.method));
    CHECK(a.rfind("baseline-s2-", 0) == 0);

    MethodConfig other = cfg.method;
    other.learning_rate = 0.02;
    CHECK(run_dir_name(cfg, other) != a);

    other = cfg.method;
    other.strategy = MixupStrategy::mx5;
    std::string c = run_dir_name(cfg, other);
    CHECK(c.rfind("mx5-s2-", 0) == 0);
}

TEST_CASE("execute_run fills the run directory with the full artifact set") {
    auto dir = testutil::scratch_dir("run");
    ExperimentConfig cfg = tiny_experiment(dir);
    DataBundle data = prepare_data(cfg);
    std::string run_dir = execute_run(cfg, cfg.method, data);

    for (const char* name : {"config.json", "run.log", "checkpoint_final.txt",
                             "checkpoint_best.txt", "history.csv", "report.txt", "report.csv",
                             "predictions.csv", "density.csv"})
        CHECK_MESSAGE(fs::exists(run_dir + "/" + name), name);

    // the recorded config replays to the same run directory name
    ExperimentConfig echoed = load_experiment_config(run_dir + "/config.json");
    CHECK(run_dir_name(echoed, echoed.method) ==
          fs::path(run_dir).filename().string());

    // predictions.csv recounts to the reported total accuracy
    std::ifstream preds(run_dir + "/predictions.csv");
    std::string line;
    std::getline(preds, line);
    CHECK(line == "index,label,prediction,score");
    long correct = 0, total = 0;
    while (std::getline(preds, line)) {
        std::stringstream ss(line);
        std::string idx, label, pred;
        std::getline(ss, idx, ',');
        std::getline(ss, label, ',');
        std::getline(ss, pred, ',');
        total += 1;
        correct += (label == pred);
    }
    auto metrics = read_report_csv(run_dir + "/report.csv");
    CHECK(total == std::stol(metrics.at("n_total")));
    CHECK(testutil::rel_err(std::stod(metrics.at("acc_total")),
                            static_cast<double>(correct) / static_cast<double>(total)) < 1e-12);
    CHECK(metrics.count("auroc:ood") == 1);

    fs::remove_all(dir);
}

TEST_CASE("sweep rows cover the fixed method grids") {
    MethodConfig base;
    auto ab = ablation_rows(base);
    REQUIRE(ab.size() == 8);
    CHECK(ab[0].label == "Baseline");
    CHECK(!ab[0].method.strategy.has_value());
    CHECK(ab[1].label == "Standard Mixup");
    CHECK(ab[1].method.strategy == MixupStrategy::standard);
    CHECK(ab[2].label == "H-H Intrasubset (MX1)");
    CHECK(ab[5].label == "H-M Intersubset (MX4)");
    CHECK(ab[6].label == "M-T Intersubset (MX5)");
    CHECK(ab[6].method.strategy == MixupStrategy::mx5);
    CHECK(ab[7].label == "H-T Intersubset (MX6)");
    // the ablation isolates the mixup axis on the softmax head
    for (const auto& row : ab) CHECK(row.method.head_type == HeadType::softmax);

    MethodConfig proto_base;
    proto_base.head_type = HeadType::prototype;
    auto ab2 = ablation_rows(proto_base);
    for (const auto& row : ab2) CHECK(row.method.head_type == HeadType::softmax);

    auto bench = benchmark_rows(base);
    REQUIRE(bench.size() == 5);
    CHECK(bench[0].label == "Baseline");
    CHECK(bench[1].label == "Mixup");
    CHECK(bench[2].label == "Prototype");
    CHECK(bench[2].method.head_type == HeadType::prototype);
    CHECK(bench[3].label == "M-T Mixup");
    CHECK(bench[3].method.strategy == MixupStrategy::mx5);
    CHECK(bench[4].label == "M-T Mixup + Prototype");
    CHECK(bench[4].method.head_type == HeadType::prototype);
    CHECK(bench[4].method.strategy == MixupStrategy::mx5);
}

TEST_CASE("median follows the sort-and-middle rule") {
    CHECK(median({3.0}) == 3.0);
    CHECK(median({4.0, 1.0, 3.0}) == 3.0);
    CHECK(median({4.0, 1.0}) == 2.5);
    CHECK(median({1.0, 9.0, 5.0, 3.0}) == 4.0);
    CHECK_THROWS_AS(median({}), MetricError);
}

TEST_CASE("aggregation collects per-seed metrics and counts failures") {
    std::vector<RunOutcome> outcomes;
    auto dir = testutil::scratch_dir("agg");
    auto fake_run = [&](const std::string& label, uint64_t seed, double acc, bool ok) {
        RunOutcome o;
        o.label = label;
        o.seed = seed;
        o.ok = ok;
        o.dir = dir + "/" + label + "-" + std::to_string(seed);
        if (ok) {
            fs::create_directories(o.dir);
            std::ofstream csv(o.dir + "/report.csv");
            csv << "metric,value\nacc_total," << acc << "\nauroc:ood," << acc * 0.9 << "\n";
        }
        outcomes.push_back(o);
    };
    fake_run("A", 1, 0.5, true);
    fake_run("A", 2, 0.7, true);
    fake_run("A", 3, 0.6, true);
    fake_run("B", 1, 0.4, true);
    fake_run("B", 2, 0.0, false);
    fake_run("B", 3, 0.8, true);

    SweepSummary s = aggregate_sweep(outcomes, {"A", "B"}, {"acc_total", "auroc:ood"}, {1, 2, 3});
    CHECK(s.collect("A", "acc_total") == std::vector<double>{0.5, 0.7, 0.6});
    CHECK(median(s.collect("A", "acc_total")) == 0.6);
    CHECK(s.collect("B", "acc_total") == std::vector<double>{0.4, 0.8});
    CHECK(s.failed("A") == 0);
    CHECK(s.failed("B") == 1);

    // renderings carry the medians and mark failures
    std::string txt = render_ablation_table(s);
    CHECK(txt.find("A") != std::string::npos);
    CHECK(txt.find("[1/3 runs failed]") != std::string::npos);
    std::string csv = render_summary_csv(s);
    CHECK(csv.find("A,median,acc_total,") != std::string::npos);
    CHECK(csv.find("B,2,acc_total,failed") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("summary tables have the expected shape") {
    // hand-built two-row summary with fully successful runs
    SweepSummary s;
    s.row_labels = {"Baseline", "M-T Intersubset (MX5)"};
    s.metric_keys = {"acc_head", "acc_middle", "acc_tail", "acc_total", "auroc:ood"};
    s.seeds = {1, 2, 3};
    for (const auto& label : s.row_labels) {
        std::vector<std::map<std::string, double>> per_seed;
        for (size_t i = 0; i < s.seeds.size(); ++i) {
            std::map<std::string, double> m;
            double bump = 0.01 * static_cast<double>(i);
            m["acc_head"] = 0.9 + bump;
            m["acc_middle"] = 0.8 + bump;
            m["acc_tail"] = 0.7 + bump;
            m["acc_total"] = 0.85 + bump;
            m["auroc:ood"] = 0.75 + bump;
            per_seed.push_back(m);
        }
        s.cells[label] = per_seed;
    }

    std::string txt = render_ablation_table(s);
    CHECK(txt.find("mixup strategy") != std::string::npos);
    CHECK(txt.find("ood (auroc%)") != std::string::npos);
    std::istringstream lines(txt);
    std::string row;
    int data_rows = 0;
    while (std::getline(lines, row))
        if (row.find("Baseline") == 0 || row.find("M-T") == 0) ++data_rows;
    CHECK(data_rows == 2);
    // medians render as percentages with two decimals
    CHECK(txt.find("86.00") != std::string::npos); // acc_total median 0.86
    CHECK(txt.find("76.00") != std::string::npos); // auroc median 0.76

    std::string bench = render_benchmark_table(s);
    CHECK(bench.find("median [min, max]") != std::string::npos);
    CHECK(bench.find("86.00 [85.00, 87.00]") != std::string::npos);

    // csv re-parses to the same medians
    std::string csv = render_summary_csv(s);
    int median_rows = 0;
    std::istringstream csv_lines(csv);
    std::string cl;
    while (std::getline(csv_lines, cl))
        if (cl.find(",median,") != std::string::npos) ++median_rows;
    CHECK(median_rows == 2 * 5);
}

TEST_CASE("run_sweep writes summaries and returns failure status honestly") {
    auto dir = testutil::scratch_dir("sweep");
    ExperimentConfig cfg = tiny_experiment(dir);
    cfg.method.epochs = 1;
    cfg.seeds = {1, 2};

    std::vector<RunOutcome> outcomes;
    int rc = run_sweep(cfg, SweepKind::benchmark, &outcomes);
    CHECK(rc == 0);
    CHECK(outcomes.size() == 10); // 5 rows x 2 seeds
    for (const auto& o : outcomes) CHECK(o.ok);
    CHECK(fs::exists(dir + "/benchmark_summary.txt"));
    CHECK(fs::exists(dir + "/benchmark_summary.csv"));

    std::string txt = testutil::slurp(dir + "/benchmark_summary.txt");
    CHECK(txt.find("M-T Mixup + Prototype") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("csv-backed experiments reproduce the in-memory pipeline") {
    auto dir = testutil::scratch_dir("csvexp");
    ExperimentConfig syn_cfg = tiny_experiment(dir + "/syn");
    DataBundle direct = prepare_data(syn_cfg);

    // export the split to csv files and reload through the csv path
    save_csv(direct.train, dir + "/train.csv");
    save_csv(direct.val, dir + "/val.csv");
    save_csv(direct.test, dir + "/test.csv");
    save_csv(direct.ood.at("ood"), dir + "/ood.csv");

    ExperimentConfig csv_cfg;
    CsvPaths paths;
    paths.id_train = dir + "/train.csv";
    paths.id_val = dir + "/val.csv";
    paths.id_test = dir + "/test.csv";
    paths.ood["ood"] = dir + "/ood.csv";
    csv_cfg.csv = paths;
    csv_cfg.partition.mode = PartitionMode::quantile;
    csv_cfg.method = syn_cfg.method;
    csv_cfg.out_dir = dir + "/csv";
    csv_cfg.seeds = syn_cfg.seeds;

    DataBundle loaded = prepare_data(csv_cfg);
    CHECK(loaded.full_counts == direct.full_counts);
    CHECK(loaded.partition.head == direct.partition.head);
    CHECK(loaded.partition.tail == direct.partition.tail);
    REQUIRE(loaded.train.size() == direct.train.size());
    for (long i = 0; i < loaded.train.size(); ++i)
        CHECK(loaded.train.samples[i].features == direct.train.samples[i].features);

    fs::remove_all(dir);
}

} // TEST_SUITE
