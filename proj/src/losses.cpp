#include "tailmix/losses.hpp"

#include <cmath>
#include <string>

#include "tailmix/error.hpp"

namespace tailmix {

double logsumexp(std::span<const double> v) {
    double m = v[0];
    for (double x : v)
        if (x > m) m = x;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

namespace {
void check_logits(std::span<const double> logits, int target) {
    if (target < 0 || target >= static_cast<int>(logits.size()))
        throw DimensionError("cross-entropy: target " + std::to_string(target) + " out of range");
    for (double x : logits)
        if (!std::isfinite(x)) throw NumericError("cross-entropy: non-finite logits");
}
} // namespace

double softmax_ce(std::span<const double> logits, int target) {
    check_logits(logits, target);
    return logsumexp(logits) - logits[target];
}

void softmax_ce_grad(std::span<const double> logits, int target, double scale,
                     std::span<double> grad) {
    check_logits(logits, target);
    double m = logits[0];
    for (double x : logits)
        if (x > m) m = x;
    double s = 0.0;
    for (double x : logits) s += std::exp(x - m);
    for (size_t k = 0; k < logits.size(); ++k) {
        double p = std::exp(logits[k] - m) / s;
        if (static_cast<int>(k) == target) p -= 1.0;
        grad[k] += scale * p;
    }
}

} // namespace tailmix
