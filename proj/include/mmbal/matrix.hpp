// Dense row-major double matrix: the sole numeric container of the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "mmbal/common.hpp"

namespace mmbal {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
        std::size_t i = 0;
        for (const auto& r : rows) {
            check_config(r.size() == m.cols_, "Matrix::from_rows: ragged rows");
            std::copy(r.begin(), r.end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * m.cols_));
            ++i;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    void zero_row(std::size_t i) { std::fill(row(i), row(i) + cols_, 0.0); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// c = a * b, a: n x k, b: k x m
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    check_config(a.cols() == b.rows(), "matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            double* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// c = a * b^T, a: n x k, b: m x k
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    check_config(a.cols() == b.cols(), "matmul_bt: inner dimensions differ");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
            c(i, j) = s;
        }
    }
    return c;
}

// c = a^T * b, a: k x n, b: k x m
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
    check_config(a.rows() == b.rows(), "matmul_at: inner dimensions differ");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
    check_config(a.same_shape(b), "add_inplace: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

inline void scale_inplace(Matrix& a, double s) {
    for (double& v : a.data()) v *= s;
}

// Adds a row vector to every row.
inline void add_row_vector(Matrix& a, const std::vector<double>& v) {
    check_config(a.cols() == v.size(), "add_row_vector: length mismatch");
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) r[j] += v[j];
    }
}

inline std::vector<double> column_sums(const Matrix& a) {
    std::vector<double> s(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) s[j] += r[j];
    }
    return s;
}

// Horizontal concatenation of equally tall matrices.
inline Matrix hconcat(const std::vector<Matrix>& parts) {
    check_config(!parts.empty(), "hconcat: no parts");
    std::size_t cols = 0;
    for (const auto& p : parts) {
        check_config(p.rows() == parts.front().rows(), "hconcat: row counts differ");
        cols += p.cols();
    }
    Matrix out(parts.front().rows(), cols);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* dst = out.row(i);
        for (const auto& p : parts) {
            const double* src = p.row(i);
            dst = std::copy(src, src + p.cols(), dst);
        }
    }
    return out;
}

// Column-block slice [col0, col0+width).
inline Matrix column_block(const Matrix& a, std::size_t col0, std::size_t width) {
    check_config(col0 + width <= a.cols(), "column_block: out of range");
    Matrix out(a.rows(), width);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* src = a.row(i) + col0;
        std::copy(src, src + width, out.row(i));
    }
    return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    check_config(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

}  // namespace mmbal
