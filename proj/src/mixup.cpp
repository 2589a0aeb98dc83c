#include "tailmix/mixup.hpp"

#include <cmath>

#include "tailmix/losses.hpp"

namespace tailmix {

const char* strategy_name(MixupStrategy s) {
    switch (s) {
        case MixupStrategy::standard: return "standard";
        case MixupStrategy::mx1: return "mx1";
        case MixupStrategy::mx2: return "mx2";
        case MixupStrategy::mx3: return "mx3";
        case MixupStrategy::mx4: return "mx4";
        case MixupStrategy::mx5: return "mx5";
        default: return "mx6";
    }
}

MixupStrategy strategy_from_name(const std::string& name) {
    for (MixupStrategy s : {MixupStrategy::standard, MixupStrategy::mx1, MixupStrategy::mx2,
                            MixupStrategy::mx3, MixupStrategy::mx4, MixupStrategy::mx5,
                            MixupStrategy::mx6}) {
        if (name == strategy_name(s)) return s;
    }
    throw ConfigError("unknown mixup strategy '" + name + "'");
}

double sample_lambda(double alpha, Rng& rng) {
    if (!(alpha > 0.0)) throw ConfigError("sample_lambda: alpha must be positive");
    return rng.beta_symmetric(alpha);
}

namespace {

std::pair<std::vector<int>, std::vector<int>> strategy_subsets(const SubsetPartition& part,
                                                               MixupStrategy strategy) {
    std::vector<int> all;
    all.insert(all.end(), part.head.begin(), part.head.end());
    all.insert(all.end(), part.middle.begin(), part.middle.end());
    all.insert(all.end(), part.tail.begin(), part.tail.end());
    switch (strategy) {
        case MixupStrategy::standard: return {all, all};
        case MixupStrategy::mx1: return {part.head, part.head};
        case MixupStrategy::mx2: return {part.middle, part.middle};
        case MixupStrategy::mx3: return {part.tail, part.tail};
        case MixupStrategy::mx4: return {part.head, part.middle};
        case MixupStrategy::mx5: return {part.middle, part.tail};
        default: return {part.head, part.tail};
    }
}

bool intra_subset(MixupStrategy s) {
    return s == MixupStrategy::standard || s == MixupStrategy::mx1 || s == MixupStrategy::mx2 ||
           s == MixupStrategy::mx3;
}

} // namespace

PairSampler::PairSampler(const Dataset& train, const SubsetPartition& partition,
                         MixupStrategy strategy, double alpha)
    : train_(train), strategy_(strategy), alpha_(alpha) {
    if (!(alpha > 0.0)) throw ConfigError("mixup: alpha must be positive");
    auto subsets = strategy_subsets(partition, strategy);
    first_classes_ = std::move(subsets.first);
    second_classes_ = std::move(subsets.second);

    const std::string name = strategy_name(strategy);
    if (intra_subset(strategy)) {
        if (first_classes_.size() < 2)
            throw StrategyError("strategy " + name + ": needs at least 2 classes in its subset, has " +
                                std::to_string(first_classes_.size()));
    } else {
        if (first_classes_.empty() || second_classes_.empty())
            throw StrategyError("strategy " + name + ": a source subset is empty");
    }

    by_class_.resize(train.class_count);
    for (int i = 0; i < train.size(); ++i) {
        const int y = train.samples[i].label;
        if (y >= 0 && y < train.class_count) by_class_[y].push_back(i);
    }
    for (const auto& classes : {first_classes_, second_classes_}) {
        for (int cls : classes) {
            if (cls >= static_cast<int>(by_class_.size()) || by_class_[cls].empty())
                throw StrategyError("strategy " + name + ": class " + std::to_string(cls) +
                                    " has no training samples");
        }
    }
}

MixupPair PairSampler::sample(Rng& rng) const {
    const int c_i = first_classes_[rng.uniform_below(first_classes_.size())];
    int c_j = second_classes_[rng.uniform_below(second_classes_.size())];
    while (c_j == c_i) c_j = second_classes_[rng.uniform_below(second_classes_.size())];

    const auto& pool_i = by_class_[c_i];
    const auto& pool_j = by_class_[c_j];
    const auto& s_i = train_.samples[pool_i[rng.uniform_below(pool_i.size())]];
    const auto& s_j = train_.samples[pool_j[rng.uniform_below(pool_j.size())]];

    MixupPair pair;
    pair.x_i = s_i.features;
    pair.x_j = s_j.features;
    pair.y_i = c_i;
    pair.y_j = c_j;
    pair.lambda = sample_lambda(alpha_, rng);
    pair.mixed_input.resize(pair.x_i.size());
    for (size_t k = 0; k < pair.x_i.size(); ++k)
        pair.mixed_input[k] = pair.lambda * pair.x_i[k] + (1.0 - pair.lambda) * pair.x_j[k];
    return pair;
}

MixupPair sample_pair(const Dataset& train, const SubsetPartition& partition,
                      MixupStrategy strategy, double alpha, Rng& rng) {
    return PairSampler(train, partition, strategy, alpha).sample(rng);
}

double mixup_ce_loss(std::span<const double> logits, int y_i, int y_j, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("mixup_ce_loss: lambda outside [0, 1]");
    return lambda * softmax_ce(logits, y_i) + (1.0 - lambda) * softmax_ce(logits, y_j);
}

void mixup_ce_grad(std::span<const double> logits, int y_i, int y_j, double lambda, double scale,
                   std::span<double> grad) {
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("mixup_ce_grad: lambda outside [0, 1]");
    softmax_ce_grad(logits, y_i, scale * lambda, grad);
    softmax_ce_grad(logits, y_j, scale * (1.0 - lambda), grad);
}

} // namespace tailmix
