#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "havenet/errors.hpp"

namespace havenet {

// Dense row-major matrix of doubles. All library math runs on this one type;
// vectors are 1xN or Nx1 tensors.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

    static Tensor2 identity(std::size_t n) {
        Tensor2 t(n, n);
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void check_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
}

// c = a * b
inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows)
        throw DimensionError("matmul: inner dims differ, " + a.shape_str() + " * " +
                             b.shape_str());
    Tensor2 c(a.rows, b.cols);
    // ikj order keeps the inner loop contiguous
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * c.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// c = a^T * b
inline Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
    if (a.rows != b.rows)
        throw DimensionError("matmul_tn: row counts differ, " + a.shape_str() + " vs " +
                             b.shape_str());
    Tensor2 c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = &a.data[k * a.cols];
        const double* brow = &b.data[k * b.cols];
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = &c.data[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

// c = a * b^T
inline Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.cols)
        throw DimensionError("matmul_nt: col counts differ, " + a.shape_str() + " vs " +
                             b.shape_str());
    Tensor2 c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * c.cols];
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = &b.data[j * b.cols];
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            crow[j] = s;
        }
    }
    return c;
}

// Column-wise concatenation: a's columns first. Row counts must match.
inline Tensor2 concat_rows(const Tensor2& a, const Tensor2& b) {
    if (a.rows != b.rows)
        throw DimensionError("concat_rows: row counts differ, " + a.shape_str() +
                             " vs " + b.shape_str());
    Tensor2 c(a.rows, a.cols + b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) c.at(i, j) = a.at(i, j);
        for (std::size_t j = 0; j < b.cols; ++j) c.at(i, a.cols + j) = b.at(i, j);
    }
    return c;
}

// Columns [begin, end) of a.
inline Tensor2 slice_cols(const Tensor2& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.cols)
        throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") out of " + a.shape_str());
    Tensor2 c(a.rows, end - begin);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = begin; j < end; ++j) c.at(i, j - begin) = a.at(i, j);
    return c;
}

inline Tensor2 row(const Tensor2& a, std::size_t i) {
    Tensor2 r(1, a.cols);
    for (std::size_t j = 0; j < a.cols; ++j) r.at(0, j) = a.at(i, j);
    return r;
}

inline void axpy(Tensor2& y, double alpha, const Tensor2& x) {
    check_same_shape(y, x, "axpy");
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += alpha * x.data[i];
}

inline Tensor2 sub(const Tensor2& a, const Tensor2& b) {
    check_same_shape(a, b, "sub");
    Tensor2 c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

inline double squared_row_distance(const Tensor2& a, std::size_t ra,
                                   const Tensor2& b, std::size_t rb) {
    if (a.cols != b.cols)
        throw DimensionError("squared_row_distance: col counts differ, " +
                             a.shape_str() + " vs " + b.shape_str());
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
        const double d = a.at(ra, j) - b.at(rb, j);
        s += d * d;
    }
    return s;
}

}  // namespace havenet
