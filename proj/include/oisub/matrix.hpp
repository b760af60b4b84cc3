#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "oisub/common.hpp"

namespace oisub {

/// Dense row-major matrix of doubles. All pipeline math that is not inside the
/// toy model's float kernels goes through this type.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Matrix(size_t r, size_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != rows * cols) throw InputError("Matrix: data length != rows*cols");
    }

    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }
    const double* row(size_t r) const { return data.data() + r * cols; }
    double* row(size_t r) { return data.data() + r * cols; }

    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_finite(const char* who) const {
        if (!finite()) throw InputError(std::string(who) + ": non-finite input");
    }

    Matrix transposed() const {
        Matrix t(cols, rows);
        for (size_t r = 0; r < rows; ++r)
            for (size_t c = 0; c < cols; ++c) t.at(c, r) = at(r, c);
        return t;
    }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw InputError("matmul: inner dimension mismatch");
    Matrix out(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        for (size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            double* orow = out.row(i);
            for (size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

inline double dot(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const double* a, size_t n) { return std::sqrt(dot(a, a, n)); }

inline double frobenius(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return std::sqrt(s);
}

}  // namespace oisub
