#pragma once
#include <span>
#include <vector>

#include "tailmix/dataset.hpp"
#include "tailmix/encoder.hpp"
#include "tailmix/matrix.hpp"

namespace tailmix {

// One learnable prototype vector per in-distribution class. Prototypes are
// trained by the same optimizer as the encoder. gamma_d scales the squared
// distances inside the distance softmax; w_mse weights the squared-error
// term against the distance cross-entropy.
struct PrototypeBank {
    Matrix prototypes; // M x embedding_dim
    double gamma_d = 1.0;
    double w_mse = 0.01;

    int num_classes() const { return prototypes.rows; }
    int embedding_dim() const { return prototypes.cols; }
};

// entry k = squared Euclidean distance from f to prototype k
std::vector<double> squared_distances(std::span<const double> f, const PrototypeBank& bank);

// Cross-entropy of softmax(-gamma_d * squared_distances) against class y.
double dce_loss(std::span<const double> f, int y, const PrototypeBank& bank);

// dce_loss + w_mse * |f - p_y|^2
double standard_prototype_loss(std::span<const double> f, int y, const PrototypeBank& bank);

// lambda * |f - p_i|^2 + (1 - lambda) * |f - p_j|^2 for the mixed feature.
double mixup_mse_loss(std::span<const double> f, int y_i, int y_j, double lambda,
                      const PrototypeBank& bank);

// lambda * dce(f, y_i) + (1 - lambda) * dce(f, y_j) for the mixed feature.
double mixup_dce_loss(std::span<const double> f, int y_i, int y_j, double lambda,
                      const PrototypeBank& bank);

// mixup_dce_loss + w_mse * mixup_mse_loss; reduces to
// standard_prototype_loss at lambda = 1 and lambda = 0.
double total_mixup_prototype_loss(std::span<const double> f, int y_i, int y_j, double lambda,
                                  const PrototypeBank& bank);

// Gradients, accumulated with a scale factor. df receives d/d(f); dP
// receives d/d(prototypes).
void dce_loss_grad(std::span<const double> f, int y, const PrototypeBank& bank, double scale,
                   std::span<double> df, Matrix& dP);
void standard_prototype_loss_grad(std::span<const double> f, int y, const PrototypeBank& bank,
                                  double scale, std::span<double> df, Matrix& dP);
void mixup_mse_loss_grad(std::span<const double> f, int y_i, int y_j, double lambda,
                         const PrototypeBank& bank, double scale, std::span<double> df, Matrix& dP);
void total_mixup_prototype_loss_grad(std::span<const double> f, int y_i, int y_j, double lambda,
                                     const PrototypeBank& bank, double scale, std::span<double> df,
                                     Matrix& dP);

enum class ProtoInit { random, class_mean };

// random: entries ~ N(0, 1)/sqrt(embedding_dim). class_mean: prototype k is
// the mean embedding of class k under the given (freshly initialized)
// encoder; errors on a class with no training samples.
PrototypeBank init_prototypes(const Dataset& train, const Encoder& encoder, ProtoInit mode,
                              double gamma_d, double w_mse, Rng& rng);

} // namespace tailmix
