#pragma once
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tailmix/dataset.hpp"
#include "tailmix/rng.hpp"

// Shared scaffolding for the test binaries.
namespace testutil {

inline double rel_err(double got, double want) {
    double denom = std::max({std::fabs(got), std::fabs(want), 1e-12});
    return std::fabs(got - want) / denom;
}

// Central finite difference of a scalar function along one coordinate that
// the caller perturbs through the supplied setter.
template <typename SetF, typename LossF>
double central_diff(SetF&& set, LossF&& loss, double x0, double h = 1e-5) {
    set(x0 + h);
    double up = loss();
    set(x0 - h);
    double down = loss();
    set(x0);
    return (up - down) / (2.0 * h);
}

// Fresh scratch directory under the system temp root; removed by the caller
// when it cares, otherwise left for inspection.
inline std::string scratch_dir(const std::string& tag) {
    static std::mt19937_64 gen(std::random_device{}());
    auto path = std::filesystem::temp_directory_path() /
                ("tailmix-test-" + tag + "-" + std::to_string(gen()));
    std::filesystem::create_directories(path);
    return path.string();
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Balanced little blob dataset: `per_class` samples per class, class c
// centered at (3c, 3c, ...), jitter 0.3.
inline tailmix::Dataset blob_dataset(int classes, int per_class, int dim, uint64_t seed) {
    tailmix::Dataset ds;
    ds.class_count = classes;
    ds.class_counts.assign(classes, per_class);
    tailmix::Rng rng(seed);
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            tailmix::LabeledSample s;
            s.label = c;
            for (int d = 0; d < dim; ++d) s.features.push_back(3.0 * c + 0.3 * rng.normal());
            ds.samples.push_back(std::move(s));
        }
    return ds;
}

// Dataset with explicit per-class counts; class c centered at 3c as above.
inline tailmix::Dataset counted_dataset(const std::vector<long>& counts, int dim, uint64_t seed) {
    tailmix::Dataset ds;
    ds.class_count = static_cast<int>(counts.size());
    ds.class_counts = counts;
    tailmix::Rng rng(seed);
    for (int c = 0; c < ds.class_count; ++c)
        for (long i = 0; i < counts[c]; ++i) {
            tailmix::LabeledSample s;
            s.label = c;
            for (int d = 0; d < dim; ++d) s.features.push_back(3.0 * c + 0.3 * rng.normal());
            ds.samples.push_back(std::move(s));
        }
    return ds;
}

} // namespace testutil
