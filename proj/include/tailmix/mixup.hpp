#pragma once
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailmix/dataset.hpp"
#include "tailmix/rng.hpp"

namespace tailmix {

// Standard draws its pair from all classes; mx1..mx3 are intra-subset
// (head-head, middle-middle, tail-tail); mx4..mx6 are inter-subset
// (head-middle, middle-tail, head-tail).
enum class MixupStrategy { standard, mx1, mx2, mx3, mx4, mx5, mx6 };

const char* strategy_name(MixupStrategy s);
MixupStrategy strategy_from_name(const std::string& name);

struct MixupPair {
    std::vector<double> x_i, x_j;
    int y_i = 0, y_j = 0;
    double lambda = 0.0;
    std::vector<double> mixed_input; // lambda * x_i + (1 - lambda) * x_j
};

// Mixing weight drawn from Beta(alpha, alpha).
double sample_lambda(double alpha, Rng& rng);

// Draws pairs for one strategy. Classes are drawn uniformly over the
// strategy's subsets (class-uniform, not sample-uniform), redrawn until the
// two classes differ, then one sample uniformly within each class.
// Construction validates the subsets and fails fast with StrategyError.
class PairSampler {
public:
    PairSampler(const Dataset& train, const SubsetPartition& partition, MixupStrategy strategy,
                double alpha);

    MixupPair sample(Rng& rng) const;
    MixupStrategy strategy() const { return strategy_; }

private:
    const Dataset& train_;
    MixupStrategy strategy_;
    double alpha_;
    std::vector<int> first_classes_, second_classes_;
    std::vector<std::vector<int>> by_class_;
};

// One-shot convenience over PairSampler.
MixupPair sample_pair(const Dataset& train, const SubsetPartition& partition,
                      MixupStrategy strategy, double alpha, Rng& rng);

// lambda * CE(logits, y_i) + (1 - lambda) * CE(logits, y_j), both terms on
// the logits of the single mixed input.
double mixup_ce_loss(std::span<const double> logits, int y_i, int y_j, double lambda);

// grad += scale * d(mixup_ce_loss)/d(logits)
void mixup_ce_grad(std::span<const double> logits, int y_i, int y_j, double lambda, double scale,
                   std::span<double> grad);

} // namespace tailmix
