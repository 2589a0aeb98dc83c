#include "tailmix/adam.hpp"

#include <cmath>

#include "tailmix/error.hpp"

namespace tailmix {

AdamState make_adam_state(Encoder& enc, Matrix* prototypes, double base_lr, double decay,
                          double beta1, double beta2, double eps) {
    if (!(base_lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("adam: decay must be in (0, 1]");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
        throw ConfigError("adam: moment coefficients must be in (0, 1)");
    if (!(eps > 0.0)) throw ConfigError("adam: eps must be positive");

    AdamState st;
    st.base_lr = base_lr;
    st.decay = decay;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.eps = eps;
    size_t n = 0;
    for_each_parameter(enc, prototypes, [&n](double&) { ++n; });
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
    return st;
}

void adam_step(AdamState& state, Encoder& enc, Matrix* prototypes, const GradientTape& tape,
               int epoch) {
    std::vector<const double*> grads;
    grads.reserve(state.m.size());
    for_each_gradient(tape, [&grads](const double& g) { grads.push_back(&g); });
    if (grads.size() != state.m.size())
        throw DimensionError("adam_step: tape does not match parameter count");

    state.step += 1;
    const double lr = state.base_lr * std::pow(state.decay, epoch);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    size_t i = 0;
    for_each_parameter(enc, prototypes, [&](double& p) {
        const double g = *grads[i];
        double& m = state.m[i];
        double& v = state.v[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        p -= lr * mhat / (std::sqrt(vhat) + state.eps);
        ++i;
    });
}

} // namespace tailmix
