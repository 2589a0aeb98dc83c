#pragma once
#include <cmath>
#include <span>
#include <vector>

#include "tailmix/error.hpp"

namespace tailmix {

// Dense row-major matrix of doubles. All shapes in this project are small
// enough that a flat vector is the right representation.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    std::span<double> row(int r) { return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void check_dim(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

} // namespace tailmix
