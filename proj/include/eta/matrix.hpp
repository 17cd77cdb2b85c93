#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "eta/errors.hpp"
#include "eta/rng.hpp"

namespace eta {

// Dense row-major matrix of doubles. Small and value-semantic; every model
// tensor in this project is one of these.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row_ptr(std::size_t r) { return data.data() + r * cols; }
    const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static Matrix gaussian(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
        Matrix m(r, c);
        for (double& v : m.data) v = rng.next_gaussian() * scale;
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

inline std::string shape_str(const Matrix& m) {
    return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: incompatible shapes " + shape_str(a) + " * " + shape_str(b));
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

// a^T * b without materializing the transpose
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows)
        throw ShapeError("matmul_at_b: incompatible shapes " + shape_str(a) + "^T * " + shape_str(b));
    Matrix out(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.row_ptr(k);
        const double* brow = b.row_ptr(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.row_ptr(i);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

// a * b^T
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw ShapeError("matmul_a_bt: incompatible shapes " + shape_str(a) + " * " + shape_str(b) + "^T");
    Matrix out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            out.at(i, j) = s;
        }
    }
    return out;
}

// Row-wise softmax with per-row max subtraction.
inline Matrix softmax_rows(const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* in = x.row_ptr(i);
        double* o = out.row_ptr(i);
        double mx = in[0];
        for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < x.cols; ++j) o[j] /= sum;
    }
    return out;
}

// Backward of softmax_rows given upstream gradient and the forward output:
// dx_j = s_j * (dy_j - sum_k s_k dy_k), per row.
inline Matrix softmax_rows_backward(const Matrix& softmax_out, const Matrix& grad_out) {
    if (!softmax_out.same_shape(grad_out))
        throw ShapeError("softmax_rows_backward: shape mismatch " + shape_str(softmax_out) +
                         " vs " + shape_str(grad_out));
    Matrix dx(softmax_out.rows, softmax_out.cols);
    for (std::size_t i = 0; i < softmax_out.rows; ++i) {
        const double* s = softmax_out.row_ptr(i);
        const double* dy = grad_out.row_ptr(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < softmax_out.cols; ++j) dot += s[j] * dy[j];
        double* d = dx.row_ptr(i);
        for (std::size_t j = 0; j < softmax_out.cols; ++j) d[j] = s[j] * (dy[j] - dot);
    }
    return dx;
}

inline void axpy(Matrix& y, double alpha, const Matrix& x) {
    if (!y.same_shape(x))
        throw ShapeError("axpy: shape mismatch " + shape_str(y) + " vs " + shape_str(x));
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += alpha * x.data[i];
}

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace eta
