#include "tailmix/prototype.hpp"

#include <cmath>
#include <string>

#include "tailmix/losses.hpp"

namespace tailmix {

namespace {

void check_f(std::span<const double> f, const PrototypeBank& bank) {
    check_dim(static_cast<int>(f.size()) == bank.embedding_dim(),
              "prototype: feature width " + std::to_string(f.size()) + " does not match bank width " +
                  std::to_string(bank.embedding_dim()));
}

void check_class(int y, const PrototypeBank& bank) {
    check_dim(y >= 0 && y < bank.num_classes(), "prototype: class " + std::to_string(y) + " out of range");
}

double sqdist_to(std::span<const double> f, const PrototypeBank& bank, int k) {
    double acc = 0.0;
    for (size_t i = 0; i < f.size(); ++i) {
        const double d = f[i] - bank.prototypes(k, i);
        acc += d * d;
    }
    return acc;
}

std::vector<double> distance_logits(std::span<const double> f, const PrototypeBank& bank) {
    std::vector<double> s(bank.num_classes());
    for (int k = 0; k < bank.num_classes(); ++k) s[k] = -bank.gamma_d * sqdist_to(f, bank, k);
    return s;
}

} // namespace

std::vector<double> squared_distances(std::span<const double> f, const PrototypeBank& bank) {
    check_f(f, bank);
    std::vector<double> d(bank.num_classes());
    for (int k = 0; k < bank.num_classes(); ++k) d[k] = sqdist_to(f, bank, k);
    return d;
}

double dce_loss(std::span<const double> f, int y, const PrototypeBank& bank) {
    check_f(f, bank);
    check_class(y, bank);
    return softmax_ce(distance_logits(f, bank), y);
}

double standard_prototype_loss(std::span<const double> f, int y, const PrototypeBank& bank) {
    check_f(f, bank);
    check_class(y, bank);
    return dce_loss(f, y, bank) + bank.w_mse * sqdist_to(f, bank, y);
}

double mixup_mse_loss(std::span<const double> f, int y_i, int y_j, double lambda,
                      const PrototypeBank& bank) {
    check_f(f, bank);
    check_class(y_i, bank);
    check_class(y_j, bank);
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("mixup_mse_loss: lambda outside [0, 1]");
    return lambda * sqdist_to(f, bank, y_i) + (1.0 - lambda) * sqdist_to(f, bank, y_j);
}

double mixup_dce_loss(std::span<const double> f, int y_i, int y_j, double lambda,
                      const PrototypeBank& bank) {
    check_f(f, bank);
    check_class(y_i, bank);
    check_class(y_j, bank);
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("mixup_dce_loss: lambda outside [0, 1]");
    return lambda * dce_loss(f, y_i, bank) + (1.0 - lambda) * dce_loss(f, y_j, bank);
}

double total_mixup_prototype_loss(std::span<const double> f, int y_i, int y_j, double lambda,
                                  const PrototypeBank& bank) {
    return mixup_dce_loss(f, y_i, y_j, lambda, bank) +
           bank.w_mse * mixup_mse_loss(f, y_i, y_j, lambda, bank);
}

void dce_loss_grad(std::span<const double> f, int y, const PrototypeBank& bank, double scale,
                   std::span<double> df, Matrix& dP) {
    check_f(f, bank);
    check_class(y, bank);
    check_dim(df.size() == f.size() && dP.rows == bank.num_classes() && dP.cols == bank.embedding_dim(),
              "dce_loss_grad: gradient shape mismatch");

    const auto s = distance_logits(f, bank);
    double m = s[0];
    for (double x : s)
        if (x > m) m = x;
    double z = 0.0;
    for (double x : s) z += std::exp(x - m);

    // d(loss)/d(s_k) = q_k - [k == y]; s_k = -gamma_d * |f - p_k|^2.
    for (int k = 0; k < bank.num_classes(); ++k) {
        double q = std::exp(s[k] - m) / z;
        if (k == y) q -= 1.0;
        const double c = scale * q * (-2.0 * bank.gamma_d);
        for (size_t i = 0; i < f.size(); ++i) {
            const double diff = f[i] - bank.prototypes(k, i);
            df[i] += c * diff;
            dP(k, i) -= c * diff;
        }
    }
}

namespace {

// grad of w * |f - p_y|^2
void sq_grad(std::span<const double> f, int y, const PrototypeBank& bank, double w,
             std::span<double> df, Matrix& dP) {
    for (size_t i = 0; i < f.size(); ++i) {
        const double diff = f[i] - bank.prototypes(y, i);
        df[i] += 2.0 * w * diff;
        dP(y, i) -= 2.0 * w * diff;
    }
}

} // namespace

void standard_prototype_loss_grad(std::span<const double> f, int y, const PrototypeBank& bank,
                                  double scale, std::span<double> df, Matrix& dP) {
    dce_loss_grad(f, y, bank, scale, df, dP);
    sq_grad(f, y, bank, scale * bank.w_mse, df, dP);
}

void mixup_mse_loss_grad(std::span<const double> f, int y_i, int y_j, double lambda,
                         const PrototypeBank& bank, double scale, std::span<double> df, Matrix& dP) {
    check_f(f, bank);
    sq_grad(f, y_i, bank, scale * lambda, df, dP);
    sq_grad(f, y_j, bank, scale * (1.0 - lambda), df, dP);
}

void total_mixup_prototype_loss_grad(std::span<const double> f, int y_i, int y_j, double lambda,
                                     const PrototypeBank& bank, double scale, std::span<double> df,
                                     Matrix& dP) {
    dce_loss_grad(f, y_i, bank, scale * lambda, df, dP);
    dce_loss_grad(f, y_j, bank, scale * (1.0 - lambda), df, dP);
    mixup_mse_loss_grad(f, y_i, y_j, lambda, bank, scale * bank.w_mse, df, dP);
}

PrototypeBank init_prototypes(const Dataset& train, const Encoder& encoder, ProtoInit mode,
                              double gamma_d, double w_mse, Rng& rng) {
    if (train.class_count < 2) throw InitError("init_prototypes: need at least 2 classes");
    if (!(gamma_d > 0.0)) throw ConfigError("init_prototypes: gamma_d must be positive");
    if (w_mse < 0.0) throw ConfigError("init_prototypes: w_mse must be non-negative");

    PrototypeBank bank;
    bank.gamma_d = gamma_d;
    bank.w_mse = w_mse;
    const int e = encoder.embedding_dim();
    bank.prototypes = Matrix(train.class_count, e);

    if (mode == ProtoInit::random) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(e));
        for (double& p : bank.prototypes.data) p = scale * rng.normal();
        return bank;
    }

    std::vector<long> counts(train.class_count, 0);
    for (const auto& s : train.samples)
        if (s.label >= 0) counts[s.label] += 1;
    for (int k = 0; k < train.class_count; ++k)
        if (counts[k] == 0)
            throw InitError("init_prototypes: class " + std::to_string(k) +
                            " has no training samples for class-mean init");

    Matrix inputs(train.size(), train.feature_dim());
    for (int i = 0; i < train.size(); ++i)
        std::copy(train.samples[i].features.begin(), train.samples[i].features.end(),
                  inputs.row(i).begin());
    const Matrix emb = forward(encoder, inputs).embeddings;
    for (int i = 0; i < train.size(); ++i) {
        const int y = train.samples[i].label;
        for (int j = 0; j < e; ++j) bank.prototypes(y, j) += emb(i, j);
    }
    for (int k = 0; k < train.class_count; ++k)
        for (int j = 0; j < e; ++j) bank.prototypes(k, j) /= static_cast<double>(counts[k]);
    return bank;
}

} // namespace tailmix
