#pragma once
#include <vector>

#include "tailmix/matrix.hpp"

// Dense math kernels behind the encoder and the prototype distances.
//
// Every kernel exists twice: the OpenMP version used by the library, and a
// serial reference twin under kernels::ref used by tests and the benchmark.
// The parallel versions split work so that each output element is produced
// by one thread running a fixed-order serial reduction, so their results are
// bit-identical to the reference no matter how many threads run.
namespace tailmix::kernels {

namespace ref {

// Y = X * W^T + b.  X: B x in, W: out x in, b: out, Y: B x out.
void affine_forward(const Matrix& X, const Matrix& W, const std::vector<double>& b, Matrix& Y);

// Y = max(X, 0) elementwise.
void relu_forward(const Matrix& X, Matrix& Y);

// dX = dY * W.  dY: B x out, W: out x in, dX: B x in.
void affine_backward_data(const Matrix& dY, const Matrix& W, Matrix& dX);

// dW += dY^T * X, db += column sums of dY.  Accumulates.
void affine_backward_params(const Matrix& dY, const Matrix& X, Matrix& dW, std::vector<double>& db);

// dX = dY where preact > 0, else 0.
void relu_backward(const Matrix& dY, const Matrix& preact, Matrix& dX);

// D(i, k) = squared Euclidean distance between F row i and P row k.
void pairwise_sqdist(const Matrix& F, const Matrix& P, Matrix& D);

} // namespace ref

void affine_forward(const Matrix& X, const Matrix& W, const std::vector<double>& b, Matrix& Y);
void relu_forward(const Matrix& X, Matrix& Y);
void affine_backward_data(const Matrix& dY, const Matrix& W, Matrix& dX);
void affine_backward_params(const Matrix& dY, const Matrix& X, Matrix& dW, std::vector<double>& db);
void relu_backward(const Matrix& dY, const Matrix& preact, Matrix& dX);
void pairwise_sqdist(const Matrix& F, const Matrix& P, Matrix& D);

} // namespace tailmix::kernels
