#pragma once
#include <span>

namespace tailmix {

// log(sum exp(v)) with the usual max shift.
double logsumexp(std::span<const double> v);

// Negative log softmax probability of the target class. Throws NumericError
// on non-finite logits.
double softmax_ce(std::span<const double> logits, int target);

// grad += scale * (softmax(logits) - onehot(target))
void softmax_ce_grad(std::span<const double> logits, int target, double scale,
                     std::span<double> grad);

} // namespace tailmix
