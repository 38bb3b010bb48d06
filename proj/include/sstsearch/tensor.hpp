#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sstsearch/common.hpp"

namespace sstsearch {

/// Row-major dense matrix.
template <class T>
struct BasicMatrix {
    using value_type = T;

    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    BasicMatrix() = default;
    BasicMatrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    T operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    static BasicMatrix from_rows(const std::vector<std::vector<T>>& rows_in) {
        BasicMatrix m(rows_in.size(), rows_in.empty() ? 0 : rows_in.front().size());
        for (std::size_t r = 0; r < m.rows; ++r) {
            if (rows_in[r].size() != m.cols) throw PreconditionError("Matrix::from_rows: ragged rows");
            std::copy(rows_in[r].begin(), rows_in[r].end(), m.row(r).begin());
        }
        return m;
    }
};

/// Parameter storage and training precision.
using Matrix = BasicMatrix<float>;

namespace linalg {

template <class A, class B>
double dot(std::span<const A> a, std::span<const B> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

inline double dot(std::span<const float> a, std::span<const float> b) { return dot<float, float>(a, b); }

template <class A>
double norm(std::span<const A> a) {
    return std::sqrt(dot<A, A>(a, a));
}

inline double norm(std::span<const float> a) { return norm<float>(a); }

/// C = A * B, with A (n x k), B (k x m). The result has A's element type.
template <class A, class B>
BasicMatrix<A> matmul(const BasicMatrix<A>& a, const BasicMatrix<B>& b) {
    BasicMatrix<A> c(a.rows, b.cols);
    std::vector<double> acc(b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const B* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) acc[j] += aik * static_cast<double>(brow[j]);
        }
        for (std::size_t j = 0; j < b.cols; ++j) c(i, j) = static_cast<A>(acc[j]);
    }
    return c;
}

/// C = A * B^T, with A (n x k), B (m x k).
template <class A, class B>
BasicMatrix<A> matmul_bt(const BasicMatrix<A>& a, const BasicMatrix<B>& b) {
    BasicMatrix<A> c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.rows; ++j) c(i, j) = static_cast<A>(dot<A, B>(a.row(i), b.row(j)));
    }
    return c;
}

/// out += A^T * B, with A (n x k), B (n x m), out (k x m).
template <class A, class B, class O>
void add_matmul_at(const BasicMatrix<A>& a, const BasicMatrix<B>& b, std::span<O> out) {
    std::vector<double> acc(a.cols * b.cols, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double ari = a(r, i);
            if (ari == 0.0) continue;
            double* dst = acc.data() + i * b.cols;
            const B* brow = b.data.data() + r * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) dst[j] += ari * static_cast<double>(brow[j]);
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] += static_cast<O>(acc[i]);
}

template <class T>
bool all_finite(std::span<const T> xs) {
    for (T x : xs) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline bool all_finite(std::span<const float> xs) { return all_finite<float>(xs); }

}  // namespace linalg

}  // namespace sstsearch
