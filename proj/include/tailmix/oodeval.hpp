#pragma once
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailmix/dataset.hpp"
#include "tailmix/encoder.hpp"
#include "tailmix/prototype.hpp"

namespace tailmix {

// How the prototype head turns distances into a confidence score. The
// distance softmax keeps both heads on a common (0, 1] scale; the raw
// negative minimum distance is exposed as exp(-min d), a strictly increasing
// transform of it, so AUROC is unchanged and densities stay on [0, 1].
enum class ProtoScore { distance_softmax, neg_min_distance };

const char* proto_score_name(ProtoScore s);
ProtoScore proto_score_from_name(const std::string& name);

struct Confidence {
    int predicted = 0;
    double score = 0.0;
};

// Softmax head: max softmax probability of the logits.
Confidence confidence_softmax(std::span<const double> logits);

// Prototype head: prediction is the nearest prototype; score per mode.
Confidence confidence_prototype(std::span<const double> f, const PrototypeBank& bank,
                                ProtoScore mode);

// Probability that a random ID score exceeds a random OOD score, ties
// counted one half; rank-statistic computation in O(n log n). ID is the
// positive class: higher score means more in-distribution.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

struct ReportFragment {
    double acc_head = 0, acc_middle = 0, acc_tail = 0, acc_total = 0;
    long n_head = 0, n_middle = 0, n_tail = 0, n_total = 0;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    int n_classes = 0;
};

// Per-subset accuracy plus macro precision/recall/F1 over all ID classes,
// with the 0/0 := 0 convention.
ReportFragment classification_report(const std::vector<int>& predictions,
                                     const std::vector<int>& labels,
                                     const SubsetPartition& partition, int num_classes);

struct DensityRow {
    std::string group;
    double bin_center = 0;
    double density = 0;
};

// Normalized histogram of each score group over [0, 1] with equal-width
// bins; densities integrate to 1. Empty groups are omitted and recorded as
// warnings.
std::vector<DensityRow> density_export(const std::map<std::string, std::vector<double>>& groups,
                                       int bins, std::vector<std::string>* warnings = nullptr);

struct GroupSummary {
    std::string name;
    long count = 0;
    double mean = 0, stdev = 0;
};

struct EvalReport {
    ReportFragment closed_set;
    std::vector<std::pair<std::string, double>> auroc_by_source;
    std::vector<GroupSummary> confidence_groups;
    std::string partition_mode;
    std::string checkpoint_kind = "final";
    int best_epoch = -1;
    std::string score_orientation = "id-positive";

    // Per-sample view of the ID test set, for predictions.csv.
    std::vector<int> labels, predictions;
    std::vector<double> scores;

    // Raw confidence lists per OOD source, for the density export.
    std::map<std::string, std::vector<double>> ood_scores;
};

struct EvalOptions {
    ProtoScore proto_score = ProtoScore::neg_min_distance;
    int density_bins = 20;
};

// Scores the ID test set and every OOD source against a trained model.
EvalReport evaluate_model(const Encoder& encoder, const PrototypeBank* bank, const Dataset& test,
                          const std::map<std::string, Dataset>& ood_sources,
                          const SubsetPartition& partition, const EvalOptions& options);

// The per-group confidence lists that density_export consumes: H/M/T from
// the ID test set by true-label subset, plus one group per OOD source.
std::map<std::string, std::vector<double>> confidence_groups_for_density(
    const EvalReport& report, const SubsetPartition& partition);

std::string eval_report_text(const EvalReport& report);
std::vector<std::pair<std::string, std::string>> eval_report_rows(const EvalReport& report);

} // namespace tailmix
