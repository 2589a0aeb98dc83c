#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tailmix/dataset.hpp"
#include "tailmix/trainer.hpp"

namespace tailmix {

// CSV-backed dataset: pre-split ID files plus named OOD sources.
struct CsvPaths {
    std::string id_train, id_val, id_test;
    std::map<std::string, std::string> ood; // source name -> path
};

struct PartitionConfig {
    PartitionMode mode = PartitionMode::absolute;
    PartitionThresholds thresholds;
    double head_frac = 0.2, tail_frac = 0.5; // quantile mode only
};

// One experiment document: exactly one dataset source, a partition rule, a
// method, and sweep plumbing.
struct ExperimentConfig {
    std::optional<SyntheticConfig> synthetic;
    std::optional<CsvPaths> csv;
    PartitionConfig partition;
    MethodConfig method;
    std::string out_dir = "runs";
    std::string checkpoint; // eval command only
    std::vector<uint64_t> seeds;
    int jobs = 1;
    int density_bins = 20;
};

nlohmann::json method_config_to_json(const MethodConfig& cfg);
MethodConfig method_config_from_json(const nlohmann::json& j);

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// Parses the JSON document at path. Throws ParseError with a line number on
// malformed JSON and ConfigError naming the field on schema violations.
ExperimentConfig load_experiment_config(const std::string& path);

// Human-readable method label used in run-directory names.
std::string method_slug(const MethodConfig& cfg);

} // namespace tailmix
