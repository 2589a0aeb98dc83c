#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "tailmix/error.hpp"

namespace tailmix {

// Label carried by evaluation-only out-of-distribution samples.
constexpr int kOodLabel = -1;

struct LabeledSample {
    std::vector<double> features;
    int label = kOodLabel; // [0, class_count) for in-distribution samples
};

struct Dataset {
    std::vector<LabeledSample> samples;
    int class_count = 0;
    std::vector<long> class_counts; // indexed by class id, sums to samples.size() for ID data

    int feature_dim() const { return samples.empty() ? 0 : static_cast<int>(samples.front().features.size()); }
    long size() const { return static_cast<long>(samples.size()); }
};

enum class Subset { head, middle, tail };

enum class PartitionMode { absolute, quantile };

struct PartitionThresholds {
    long tail_max = 500;   // class is tail iff count < tail_max
    long head_min = 10000; // class is head iff count > head_min
};

// Disjoint Head/Middle/Tail class sets covering all in-distribution classes.
struct SubsetPartition {
    std::vector<int> head, middle, tail;
    PartitionMode mode = PartitionMode::absolute;
    PartitionThresholds thresholds;

    Subset of(int cls) const;
    const std::vector<int>& classes(Subset s) const;
    int total_classes() const {
        return static_cast<int>(head.size() + middle.size() + tail.size());
    }
};

const char* subset_name(Subset s);
const char* partition_mode_name(PartitionMode m);

// head iff count > head_min, tail iff count < tail_max, middle is the closed
// interval [tail_max, head_min]. Throws PartitionError naming the first empty
// subset.
SubsetPartition partition_classes(const std::vector<long>& counts, PartitionThresholds thresholds);

// Rank-based fallback for datasets whose counts make the absolute thresholds
// meaningless: head = top head_frac of classes by count, tail = bottom
// tail_frac, rest middle. Ties rank by class id. Needs at least 3 classes.
SubsetPartition partition_classes_quantile(const std::vector<long>& counts, double head_frac = 0.2,
                                           double tail_frac = 0.5);

struct SyntheticConfig {
    int num_id_classes = 20;
    int num_ood_classes = 5;
    int feature_dim = 16;
    int superclass_count = 4;
    double subcluster_spread = 1.0; // scale of class-center offsets inside a superclass
    double noise_scale = 1.0;      // sample scatter around its class center
    long max_class_count = 1000;
    double powerlaw_exponent = 1.5;
    long ood_samples_per_class = 100;
    uint64_t seed = 7;
};

struct SyntheticInfo {
    std::vector<int> id_class_superclass;
    std::vector<int> ood_class_superclass;
};

// Long-tailed fine-grained Gaussian clusters. Class k holds
// round(max_class_count * (k+1)^-powerlaw_exponent) samples; class centers
// are superclass centers plus an offset of scale subcluster_spread, and the
// OOD classes are fresh subclusters of the same superclasses.
std::pair<Dataset, Dataset> generate_synthetic(const SyntheticConfig& cfg,
                                               SyntheticInfo* info = nullptr);

// The per-class counts the power law produces, before sampling.
std::vector<long> powerlaw_counts(long max_class_count, double exponent, int num_classes);

struct SplitResult {
    Dataset train, val, test;
};

// Per-class stratified split: 15% test, then 80/20 train/val of the rest.
// Membership depends only on sample content and the seed, not input order.
SplitResult split_dataset(const Dataset& dataset, uint64_t seed);

enum class CsvRole { id_train, id_eval, ood_eval };

// One row per sample: feature columns then a label column. The ood_eval role
// replaces labels with the OOD tag.
Dataset load_csv(const std::string& path, CsvRole role);
void save_csv(const Dataset& dataset, const std::string& path);

} // namespace tailmix
