#pragma once
#include <iosfwd>
#include <string>

#include "tailmix/trainer.hpp"

namespace tailmix {

// Plain-text checkpoint. Floats are written as C hexfloats, so a loaded
// state resumes bit for bit: training N epochs equals training K, saving,
// loading, and training N-K more.
void save_checkpoint(const TrainerState& st, std::ostream& out);
void save_checkpoint(const TrainerState& st, const std::string& path);

TrainerState load_checkpoint(std::istream& in);
TrainerState load_checkpoint(const std::string& path);

// Throws LoadError when the checkpointed model cannot score the given data.
void check_model_matches(const TrainerState& st, int feature_dim, int class_count);

} // namespace tailmix
