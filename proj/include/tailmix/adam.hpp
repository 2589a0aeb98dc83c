#pragma once
#include <vector>

#include "tailmix/encoder.hpp"
#include "tailmix/matrix.hpp"

namespace tailmix {

// Adaptive-moment optimizer with bias correction and per-epoch exponential
// learning-rate decay: effective lr = base_lr * decay^epoch.
struct AdamState {
    double base_lr = 1e-4;
    double decay = 0.95;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;

    // First and second moments, one scalar per parameter in
    // for_each_parameter order.
    std::vector<double> m, v;
};

AdamState make_adam_state(Encoder& enc, Matrix* prototypes, double base_lr, double decay,
                          double beta1, double beta2, double eps);

// One update over every parameter. Gradient shapes must match the
// parameters; throws DimensionError otherwise.
void adam_step(AdamState& state, Encoder& enc, Matrix* prototypes, const GradientTape& tape,
               int epoch);

} // namespace tailmix
