#pragma once
#include <map>
#include <string>
#include <vector>

#include "tailmix/config.hpp"
#include "tailmix/oodeval.hpp"

namespace tailmix {

// Materialized data for one experiment: split ID sets, named OOD sources,
// and the partition computed from the full ID per-class counts.
struct DataBundle {
    Dataset train, val, test;
    std::map<std::string, Dataset> ood;
    SubsetPartition partition;
    std::vector<long> full_counts; // per-class, before splitting
};

DataBundle prepare_data(const ExperimentConfig& cfg);

SubsetPartition make_partition(const PartitionConfig& p, const std::vector<long>& counts);

// report.txt, report.csv, predictions.csv, and density.csv under dir;
// density warnings are appended to warn_log when given.
void write_eval_artifacts(const EvalReport& report, const SubsetPartition& partition,
                          int density_bins, const std::string& dir,
                          std::ostream* warn_log = nullptr);

// slug-s<seed>-<hash of the resolved per-run config>
std::string run_dir_name(const ExperimentConfig& cfg, const MethodConfig& method);

// Trains one method on the bundle and fills its run directory: resolved
// config, checkpoints, history, report (text + csv), per-sample predictions,
// and the confidence-density table. Returns the run directory path.
std::string execute_run(const ExperimentConfig& cfg, const MethodConfig& method,
                        const DataBundle& data);

// metric -> value, as written by execute_run into report.csv.
std::map<std::string, std::string> read_report_csv(const std::string& path);

struct SweepRow {
    std::string label;
    MethodConfig method; // seed is overridden per run
};

// The method grid of each sweep, in fixed table order.
std::vector<SweepRow> ablation_rows(const MethodConfig& base);
std::vector<SweepRow> benchmark_rows(const MethodConfig& base);

enum class SweepKind { ablation, benchmark };

struct RunOutcome {
    std::string label;
    uint64_t seed = 0;
    std::string dir;
    bool ok = false;
    std::string error;
};

// Runs rows x seeds with at most cfg.jobs concurrent runs, then aggregates
// the per-run report files into summary.txt and summary.csv under out_dir.
// Returns 0 when every run succeeded, 2 otherwise.
int run_sweep(const ExperimentConfig& cfg, SweepKind kind, std::vector<RunOutcome>* outcomes_out = nullptr);

// Aggregation over per-run report files; exposed for the summary tests.
struct SweepSummary {
    std::vector<std::string> row_labels;
    std::vector<std::string> metric_keys; // column order
    std::vector<uint64_t> seeds;
    // label -> one metric map per seed (seed order); empty map = failed run
    std::map<std::string, std::vector<std::map<std::string, double>>> cells;

    std::vector<double> collect(const std::string& label, const std::string& metric) const;
    int failed(const std::string& label) const;
};

SweepSummary aggregate_sweep(const std::vector<RunOutcome>& outcomes,
                             const std::vector<std::string>& row_labels,
                             const std::vector<std::string>& metric_keys,
                             const std::vector<uint64_t>& seeds);

double median(std::vector<double> v);

std::string render_ablation_table(const SweepSummary& s);
std::string render_benchmark_table(const SweepSummary& s);
std::string render_summary_csv(const SweepSummary& s);

// The metric columns each sweep reports, auroc columns expanded per source.
std::vector<std::string> ablation_metrics(const DataBundle& data);
std::vector<std::string> benchmark_metrics(const DataBundle& data);

} // namespace tailmix
