#include "tailmix/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tailmix/rng.hpp"

namespace tailmix {

namespace {
// Superclass centers are standard normal scaled by this; subcluster offsets
// must stay well inside the inter-superclass distance scale.
constexpr double kSuperclassCenterScale = 4.0;
} // namespace

Subset SubsetPartition::of(int cls) const {
    for (int c : head)
        if (c == cls) return Subset::head;
    for (int c : middle)
        if (c == cls) return Subset::middle;
    for (int c : tail)
        if (c == cls) return Subset::tail;
    throw PartitionError("class " + std::to_string(cls) + " is not in the partition");
}

const std::vector<int>& SubsetPartition::classes(Subset s) const {
    switch (s) {
        case Subset::head: return head;
        case Subset::middle: return middle;
        default: return tail;
    }
}

const char* subset_name(Subset s) {
    switch (s) {
        case Subset::head: return "head";
        case Subset::middle: return "middle";
        default: return "tail";
    }
}

const char* partition_mode_name(PartitionMode m) {
    return m == PartitionMode::absolute ? "absolute" : "quantile";
}

namespace {
void check_nonempty(const SubsetPartition& p) {
    if (p.head.empty()) throw PartitionError("partition: head subset is empty");
    if (p.middle.empty()) throw PartitionError("partition: middle subset is empty");
    if (p.tail.empty()) throw PartitionError("partition: tail subset is empty");
}
} // namespace

SubsetPartition partition_classes(const std::vector<long>& counts, PartitionThresholds thresholds) {
    if (counts.empty()) throw PartitionError("partition: no classes");
    if (thresholds.tail_max > thresholds.head_min)
        throw PartitionError("partition: tail_max exceeds head_min");

    SubsetPartition part;
    part.mode = PartitionMode::absolute;
    part.thresholds = thresholds;
    for (int cls = 0; cls < static_cast<int>(counts.size()); ++cls) {
        const long n = counts[cls];
        if (n > thresholds.head_min)
            part.head.push_back(cls);
        else if (n < thresholds.tail_max)
            part.tail.push_back(cls);
        else
            part.middle.push_back(cls);
    }
    check_nonempty(part);
    return part;
}

SubsetPartition partition_classes_quantile(const std::vector<long>& counts, double head_frac,
                                           double tail_frac) {
    const int m = static_cast<int>(counts.size());
    if (m < 3) throw PartitionError("quantile partition needs at least 3 classes");

    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&counts](int a, int b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return a < b;
    });

    int head_n = std::max(1, static_cast<int>(std::llround(head_frac * m)));
    int tail_n = std::max(1, static_cast<int>(std::llround(tail_frac * m)));
    // keep the middle nonempty
    tail_n = std::min(tail_n, m - head_n - 1);
    if (tail_n < 1) throw PartitionError("quantile partition: middle subset is empty");

    SubsetPartition part;
    part.mode = PartitionMode::quantile;
    for (int r = 0; r < m; ++r) {
        if (r < head_n)
            part.head.push_back(order[r]);
        else if (r >= m - tail_n)
            part.tail.push_back(order[r]);
        else
            part.middle.push_back(order[r]);
    }
    std::sort(part.head.begin(), part.head.end());
    std::sort(part.middle.begin(), part.middle.end());
    std::sort(part.tail.begin(), part.tail.end());
    // boundary counts, recorded for the report
    part.thresholds.head_min = counts[order[head_n - 1]];
    part.thresholds.tail_max = counts[order[m - tail_n]];
    check_nonempty(part);
    return part;
}

std::vector<long> powerlaw_counts(long max_class_count, double exponent, int num_classes) {
    std::vector<long> counts(num_classes);
    for (int k = 0; k < num_classes; ++k)
        counts[k] = std::llround(max_class_count * std::pow(k + 1.0, -exponent));
    return counts;
}

std::pair<Dataset, Dataset> generate_synthetic(const SyntheticConfig& cfg, SyntheticInfo* info) {
    if (cfg.num_id_classes < 3)
        throw ConfigError("synthetic: num_id_classes must be at least 3");
    if (cfg.num_ood_classes < 1) throw ConfigError("synthetic: num_ood_classes must be positive");
    if (cfg.feature_dim < 1) throw ConfigError("synthetic: feature_dim must be positive");
    if (cfg.superclass_count < 1) throw ConfigError("synthetic: superclass_count must be positive");
    if (cfg.subcluster_spread < 0.0) throw ConfigError("synthetic: subcluster_spread must be non-negative");
    if (cfg.subcluster_spread >= 2.0 * kSuperclassCenterScale)
        throw ConfigError("synthetic: subcluster_spread must stay below the superclass separation scale");
    if (!(cfg.noise_scale > 0.0)) throw ConfigError("synthetic: noise_scale must be positive");
    if (cfg.max_class_count < 1 || !(cfg.powerlaw_exponent > 0.0))
        throw ConfigError("synthetic: max_class_count and powerlaw_exponent must be positive");
    if (cfg.ood_samples_per_class < 1)
        throw ConfigError("synthetic: ood_samples_per_class must be positive");

    const auto counts = powerlaw_counts(cfg.max_class_count, cfg.powerlaw_exponent, cfg.num_id_classes);
    for (int k = 0; k < cfg.num_id_classes; ++k) {
        if (counts[k] < 5)
            throw ConfigError("synthetic: class " + std::to_string(k) + " would get only " +
                              std::to_string(counts[k]) +
                              " samples; increase max_class_count or lower powerlaw_exponent");
    }

    Rng rng(cfg.seed);
    const int d = cfg.feature_dim;

    std::vector<std::vector<double>> superclass_centers(cfg.superclass_count,
                                                        std::vector<double>(d));
    for (auto& c : superclass_centers)
        for (double& x : c) x = kSuperclassCenterScale * rng.normal();

    auto draw_center = [&](int superclass) {
        std::vector<double> center = superclass_centers[superclass];
        for (double& x : center) x += cfg.subcluster_spread * rng.normal();
        return center;
    };
    auto draw_samples = [&](Dataset& out, const std::vector<double>& center, long n, int label) {
        for (long i = 0; i < n; ++i) {
            LabeledSample s;
            s.features.resize(d);
            for (int j = 0; j < d; ++j) s.features[j] = center[j] + cfg.noise_scale * rng.normal();
            s.label = label;
            out.samples.push_back(std::move(s));
        }
    };

    Dataset id;
    id.class_count = cfg.num_id_classes;
    id.class_counts = counts;
    if (info) {
        info->id_class_superclass.clear();
        info->ood_class_superclass.clear();
    }
    for (int k = 0; k < cfg.num_id_classes; ++k) {
        const int sc = k % cfg.superclass_count;
        if (info) info->id_class_superclass.push_back(sc);
        draw_samples(id, draw_center(sc), counts[k], k);
    }

    Dataset ood;
    for (int k = 0; k < cfg.num_ood_classes; ++k) {
        const int sc = k % cfg.superclass_count;
        if (info) info->ood_class_superclass.push_back(sc);
        draw_samples(ood, draw_center(sc), cfg.ood_samples_per_class, kOodLabel);
    }
    return {std::move(id), std::move(ood)};
}

namespace {

bool feature_less(const LabeledSample& a, const LabeledSample& b) {
    return std::lexicographical_compare(a.features.begin(), a.features.end(), b.features.begin(),
                                        b.features.end());
}

} // namespace

SplitResult split_dataset(const Dataset& dataset, uint64_t seed) {
    if (dataset.class_count < 1) throw SplitError("split: dataset has no classes");

    std::vector<std::vector<int>> by_class(dataset.class_count);
    for (int i = 0; i < dataset.size(); ++i) {
        const int y = dataset.samples[i].label;
        if (y < 0 || y >= dataset.class_count)
            throw SplitError("split: sample " + std::to_string(i) + " has label outside [0, M)");
        by_class[y].push_back(i);
    }

    SplitResult out;
    for (Dataset* part : {&out.train, &out.val, &out.test}) {
        part->class_count = dataset.class_count;
        part->class_counts.assign(dataset.class_count, 0);
    }

    for (int cls = 0; cls < dataset.class_count; ++cls) {
        auto& idx = by_class[cls];
        const long n = static_cast<long>(idx.size());
        if (n < 3)
            throw SplitError("split: class " + std::to_string(cls) + " has " + std::to_string(n) +
                             " samples; need at least 3 for nonempty train/val/test");

        // Membership must not depend on input order: key samples by content,
        // then shuffle with a per-class stream.
        std::stable_sort(idx.begin(), idx.end(), [&dataset](int a, int b) {
            return feature_less(dataset.samples[a], dataset.samples[b]);
        });
        std::string key = std::to_string(seed) + ":" + std::to_string(cls);
        Rng rng(fnv1a64(key));
        for (long i = n - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.uniform_below(static_cast<uint64_t>(i + 1))]);

        long n_test = std::llround(0.15 * n);
        n_test = std::clamp(n_test, 1L, n - 2);
        const long rem = n - n_test;
        long n_train = std::llround(0.8 * rem);
        n_train = std::clamp(n_train, 1L, rem - 1);

        for (long i = 0; i < n; ++i) {
            Dataset* dst = i < n_test ? &out.test : (i < n_test + n_train ? &out.train : &out.val);
            dst->samples.push_back(dataset.samples[idx[i]]);
            dst->class_counts[cls] += 1;
        }
    }
    return out;
}

Dataset load_csv(const std::string& path, CsvRole role) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);

    Dataset ds;
    std::string line;
    int row = 0;
    int width = -1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> values;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            const std::string tok = line.substr(pos, comma - pos);
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
                throw ParseError(path + ": row " + std::to_string(row) + ": non-numeric cell '" +
                                 tok + "'");
            values.push_back(v);
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        if (width < 0) {
            width = static_cast<int>(values.size());
            if (width < 2)
                throw ParseError(path + ": row 1: need at least one feature column plus a label");
        } else if (static_cast<int>(values.size()) != width) {
            throw ParseError(path + ": row " + std::to_string(row) + ": expected " +
                             std::to_string(width) + " columns, got " +
                             std::to_string(values.size()));
        }

        LabeledSample s;
        s.features.assign(values.begin(), values.end() - 1);
        if (role == CsvRole::ood_eval) {
            s.label = kOodLabel;
        } else {
            const double raw = values.back();
            if (raw < 0.0 || raw != std::floor(raw))
                throw ParseError(path + ": row " + std::to_string(row) + ": unknown label '" +
                                 std::to_string(raw) + "' for an in-distribution role");
            s.label = static_cast<int>(raw);
        }
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw ParseError(path + ": file holds no samples");

    if (role != CsvRole::ood_eval) {
        int max_label = 0;
        for (const auto& s : ds.samples) max_label = std::max(max_label, s.label);
        ds.class_count = max_label + 1;
        ds.class_counts.assign(ds.class_count, 0);
        for (const auto& s : ds.samples) ds.class_counts[s.label] += 1;
    }
    return ds;
}

void save_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    char buf[40];
    for (const auto& s : dataset.samples) {
        std::string line;
        for (double v : s.features) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            line += buf;
            line += ',';
        }
        line += std::to_string(s.label);
        line += '\n';
        out << line;
    }
    if (!out) throw Error("write failed for " + path);
}

} // namespace tailmix
