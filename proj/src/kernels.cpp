#include "tailmix/kernels.hpp"

#include <algorithm>

namespace tailmix::kernels {

namespace {

void check_affine_shapes(const Matrix& X, const Matrix& W, const std::vector<double>& b, const Matrix& Y) {
    check_dim(X.cols == W.cols, "affine_forward: input width does not match weight fan-in");
    check_dim(static_cast<int>(b.size()) == W.rows, "affine_forward: bias length does not match fan-out");
    check_dim(Y.rows == X.rows && Y.cols == W.rows, "affine_forward: bad output shape");
}

// Loops small enough that forking a team costs more than the work saves.
constexpr long kParallelCutoff = 16 * 1024;

} // namespace

namespace ref {

void affine_forward(const Matrix& X, const Matrix& W, const std::vector<double>& b, Matrix& Y) {
    check_affine_shapes(X, W, b, Y);
    for (int r = 0; r < X.rows; ++r) {
        for (int o = 0; o < W.rows; ++o) {
            double acc = b[o];
            for (int i = 0; i < X.cols; ++i) acc += X(r, i) * W(o, i);
            Y(r, o) = acc;
        }
    }
}

void relu_forward(const Matrix& X, Matrix& Y) {
    check_dim(X.same_shape(Y), "relu_forward: shape mismatch");
    for (size_t i = 0; i < X.data.size(); ++i) Y.data[i] = X.data[i] > 0.0 ? X.data[i] : 0.0;
}

void affine_backward_data(const Matrix& dY, const Matrix& W, Matrix& dX) {
    check_dim(dY.cols == W.rows && dX.cols == W.cols && dX.rows == dY.rows,
              "affine_backward_data: shape mismatch");
    for (int r = 0; r < dY.rows; ++r) {
        for (int i = 0; i < W.cols; ++i) {
            double acc = 0.0;
            for (int o = 0; o < W.rows; ++o) acc += dY(r, o) * W(o, i);
            dX(r, i) = acc;
        }
    }
}

void affine_backward_params(const Matrix& dY, const Matrix& X, Matrix& dW, std::vector<double>& db) {
    check_dim(dY.rows == X.rows && dW.rows == dY.cols && dW.cols == X.cols &&
                  static_cast<int>(db.size()) == dY.cols,
              "affine_backward_params: shape mismatch");
    for (int o = 0; o < dW.rows; ++o) {
        double bacc = db[o];
        for (int r = 0; r < X.rows; ++r) {
            const double g = dY(r, o);
            bacc += g;
            for (int i = 0; i < X.cols; ++i) dW(o, i) += g * X(r, i);
        }
        db[o] = bacc;
    }
}

void relu_backward(const Matrix& dY, const Matrix& preact, Matrix& dX) {
    check_dim(dY.same_shape(preact) && dY.same_shape(dX), "relu_backward: shape mismatch");
    for (size_t i = 0; i < dY.data.size(); ++i)
        dX.data[i] = preact.data[i] > 0.0 ? dY.data[i] : 0.0;
}

void pairwise_sqdist(const Matrix& F, const Matrix& P, Matrix& D) {
    check_dim(F.cols == P.cols, "pairwise_sqdist: embedding widths differ");
    check_dim(D.rows == F.rows && D.cols == P.rows, "pairwise_sqdist: bad output shape");
    for (int r = 0; r < F.rows; ++r) {
        for (int k = 0; k < P.rows; ++k) {
            double acc = 0.0;
            for (int i = 0; i < F.cols; ++i) {
                const double d = F(r, i) - P(k, i);
                acc += d * d;
            }
            D(r, k) = acc;
        }
    }
}

} // namespace ref

void affine_forward(const Matrix& X, const Matrix& W, const std::vector<double>& b, Matrix& Y) {
    check_affine_shapes(X, W, b, Y);
    const long work = static_cast<long>(X.rows) * W.rows * X.cols;
#pragma omp parallel for if (work > kParallelCutoff) schedule(static)
    for (int r = 0; r < X.rows; ++r) {
        for (int o = 0; o < W.rows; ++o) {
            double acc = b[o];
            for (int i = 0; i < X.cols; ++i) acc += X(r, i) * W(o, i);
            Y(r, o) = acc;
        }
    }
}

void relu_forward(const Matrix& X, Matrix& Y) {
    check_dim(X.same_shape(Y), "relu_forward: shape mismatch");
    const long n = static_cast<long>(X.data.size());
#pragma omp parallel for if (n > kParallelCutoff) schedule(static)
    for (long i = 0; i < n; ++i) Y.data[i] = X.data[i] > 0.0 ? X.data[i] : 0.0;
}

void affine_backward_data(const Matrix& dY, const Matrix& W, Matrix& dX) {
    check_dim(dY.cols == W.rows && dX.cols == W.cols && dX.rows == dY.rows,
              "affine_backward_data: shape mismatch");
    const long work = static_cast<long>(dY.rows) * W.rows * W.cols;
#pragma omp parallel for if (work > kParallelCutoff) schedule(static)
    for (int r = 0; r < dY.rows; ++r) {
        for (int i = 0; i < W.cols; ++i) {
            double acc = 0.0;
            for (int o = 0; o < W.rows; ++o) acc += dY(r, o) * W(o, i);
            dX(r, i) = acc;
        }
    }
}

void affine_backward_params(const Matrix& dY, const Matrix& X, Matrix& dW, std::vector<double>& db) {
    check_dim(dY.rows == X.rows && dW.rows == dY.cols && dW.cols == X.cols &&
                  static_cast<int>(db.size()) == dY.cols,
              "affine_backward_params: shape mismatch");
    const long work = static_cast<long>(dY.rows) * dW.rows * dW.cols;
    // Parallel over output rows: each thread owns dW row o and db[o], and
    // accumulates over the batch in index order.
#pragma omp parallel for if (work > kParallelCutoff) schedule(static)
    for (int o = 0; o < dW.rows; ++o) {
        double bacc = db[o];
        for (int r = 0; r < X.rows; ++r) {
            const double g = dY(r, o);
            bacc += g;
            for (int i = 0; i < X.cols; ++i) dW(o, i) += g * X(r, i);
        }
        db[o] = bacc;
    }
}

void relu_backward(const Matrix& dY, const Matrix& preact, Matrix& dX) {
    check_dim(dY.same_shape(preact) && dY.same_shape(dX), "relu_backward: shape mismatch");
    const long n = static_cast<long>(dY.data.size());
#pragma omp parallel for if (n > kParallelCutoff) schedule(static)
    for (long i = 0; i < n; ++i) dX.data[i] = preact.data[i] > 0.0 ? dY.data[i] : 0.0;
}

void pairwise_sqdist(const Matrix& F, const Matrix& P, Matrix& D) {
    check_dim(F.cols == P.cols, "pairwise_sqdist: embedding widths differ");
    check_dim(D.rows == F.rows && D.cols == P.rows, "pairwise_sqdist: bad output shape");
    const long work = static_cast<long>(F.rows) * P.rows * F.cols;
#pragma omp parallel for if (work > kParallelCutoff) schedule(static)
    for (int r = 0; r < F.rows; ++r) {
        for (int k = 0; k < P.rows; ++k) {
            double acc = 0.0;
            for (int i = 0; i < F.cols; ++i) {
                const double d = F(r, i) - P(k, i);
                acc += d * d;
            }
            D(r, k) = acc;
        }
    }
}

} // namespace tailmix::kernels
