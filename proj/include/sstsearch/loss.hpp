#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sstsearch/common.hpp"
#include "sstsearch/tensor.hpp"

namespace sstsearch {

template <class T>
struct BasicLossResult {
    double loss = 0.0;
    /// d loss / d scores, same layout as the score matrix.
    BasicMatrix<T> grad_scores;
};

using LossResult = BasicLossResult<float>;

/// In-batch softmax loss over a score matrix with scores(j, i) = c_j · q_i:
///
///   loss = -(1/N) sum_i log( exp(s_ii) / sum_j exp(s_ji) )
///
/// Each column (one query against all N codes) is stabilized by subtracting
/// its maximum before exponentiating.
template <class T>
BasicLossResult<T> loss_from_scores(const BasicMatrix<T>& scores) {
    const std::size_t n = scores.rows;
    if (n != scores.cols) throw PreconditionError("batch loss: score matrix must be square");
    if (n < 2) throw PreconditionError("batch loss: need at least 2 pairs per batch");
    if (!linalg::all_finite<T>(scores.data)) throw PreconditionError("batch loss: non-finite scores");

    BasicLossResult<T> r;
    r.grad_scores = BasicMatrix<T>(n, n);
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, static_cast<double>(scores(j, i)));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            col[j] = std::exp(static_cast<double>(scores(j, i)) - mx);
            z += col[j];
        }
        r.loss += (std::log(z) + mx - static_cast<double>(scores(i, i))) * inv_n;
        for (std::size_t j = 0; j < n; ++j) {
            const double softmax = col[j] / z;
            r.grad_scores(j, i) = static_cast<T>((softmax - (i == j ? 1.0 : 0.0)) * inv_n);
        }
    }
    return r;
}

/// Raw inner-product score matrix: scores(j, i) = code_j · query_i.
template <class T>
BasicMatrix<T> score_matrix(const BasicMatrix<T>& code_vecs, const BasicMatrix<T>& query_vecs) {
    if (code_vecs.rows != query_vecs.rows || code_vecs.cols != query_vecs.cols) {
        throw PreconditionError("batch loss: code and query batches must have matching shapes");
    }
    return linalg::matmul_bt(code_vecs, query_vecs);
}

namespace detail {

template <class T>
void require_finite(const BasicMatrix<T>& code_vecs, const BasicMatrix<T>& query_vecs) {
    if (!linalg::all_finite<T>(code_vecs.data) || !linalg::all_finite<T>(query_vecs.data)) {
        throw PreconditionError("batch loss: non-finite inputs");
    }
}

}  // namespace detail

template <class T>
double batch_loss(const BasicMatrix<T>& code_vecs, const BasicMatrix<T>& query_vecs) {
    detail::require_finite(code_vecs, query_vecs);
    return loss_from_scores(score_matrix(code_vecs, query_vecs)).loss;
}

template <class T>
struct BasicBatchGradients {
    double loss = 0.0;
    BasicMatrix<T> grad_code;   // N x d
    BasicMatrix<T> grad_query;  // N x d
};

using BatchGradients = BasicBatchGradients<float>;

template <class T>
BasicBatchGradients<T> batch_loss_with_grad(const BasicMatrix<T>& code_vecs, const BasicMatrix<T>& query_vecs) {
    detail::require_finite(code_vecs, query_vecs);
    const auto lr = loss_from_scores(score_matrix(code_vecs, query_vecs));
    BasicBatchGradients<T> g;
    g.loss = lr.loss;
    // dC_j = sum_i dS_ji q_i ; dQ_i = sum_j dS_ji c_j
    g.grad_code = linalg::matmul(lr.grad_scores, query_vecs);
    BasicMatrix<T> gs_t(lr.grad_scores.cols, lr.grad_scores.rows);
    for (std::size_t j = 0; j < gs_t.rows; ++j) {
        for (std::size_t i = 0; i < gs_t.cols; ++i) gs_t(j, i) = lr.grad_scores(i, j);
    }
    g.grad_query = linalg::matmul(gs_t, code_vecs);
    return g;
}

}  // namespace sstsearch
