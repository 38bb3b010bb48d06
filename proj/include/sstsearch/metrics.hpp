#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sstsearch/common.hpp"
#include "sstsearch/tensor.hpp"

namespace sstsearch {

/// Rank of code i for query i in a batch whose scores are laid out as
/// scores(code j, query i): 1 + the number of distractors scoring strictly
/// higher. Ties go to the target.
inline std::size_t target_rank(const Matrix& scores, std::size_t i) {
    const float target = scores(i, i);
    std::size_t rank = 1;
    for (std::size_t j = 0; j < scores.rows; ++j) {
        if (j != i && scores(j, i) > target) ++rank;
    }
    return rank;
}

inline double batch_mrr(const Matrix& scores) {
    if (scores.rows != scores.cols) throw PreconditionError("mrr: score matrix must be square");
    if (scores.rows == 0) throw PreconditionError("mrr: empty score matrix");
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.cols; ++i) sum += 1.0 / static_cast<double>(target_rank(scores, i));
    return sum / static_cast<double>(scores.cols);
}

/// Mean over batches of the per-batch MRR.
inline double mrr(const std::vector<Matrix>& batches) {
    if (batches.empty()) throw PreconditionError("mrr: no batches");
    double sum = 0.0;
    for (const auto& b : batches) sum += batch_mrr(b);
    return sum / static_cast<double>(batches.size());
}

/// DCG with gain (2^rel - 1) / log2(position + 1), positions from 1.
inline double dcg(const std::vector<double>& relevances) {
    double s = 0.0;
    for (std::size_t k = 0; k < relevances.size(); ++k) {
        s += (std::exp2(relevances[k]) - 1.0) / std::log2(static_cast<double>(k) + 2.0);
    }
    return s;
}

/// DCG of the ranking over DCG of the ideal ordering; 0 for an all-zero list.
inline double ndcg_single(const std::vector<double>& ranked_relevances) {
    if (ranked_relevances.empty()) throw PreconditionError("ndcg: empty ranking");
    for (double r : ranked_relevances) {
        if (r < 0.0 || !std::isfinite(r)) throw PreconditionError("ndcg: relevance must be finite and >= 0");
    }
    auto ideal = ranked_relevances;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double best = dcg(ideal);
    return best == 0.0 ? 0.0 : dcg(ranked_relevances) / best;
}

/// Mean NDCG over queries, each given as relevances in ranked order.
inline double ndcg(const std::vector<std::vector<double>>& rankings) {
    if (rankings.empty()) throw PreconditionError("ndcg: no queries");
    double s = 0.0;
    for (const auto& r : rankings) s += ndcg_single(r);
    return s / static_cast<double>(rankings.size());
}

/// Relative MRR change against the baseline score.
inline double change_ratio(double score, double baseline) {
    if (baseline == 0.0) throw PreconditionError("change ratio: baseline score is zero");
    return (score - baseline) / baseline;
}

/// Cosine similarity matrix laid out like score_matrix: out(j, i) = cos(code_j, query_i).
/// Zero vectors have similarity 0 with everything.
inline Matrix cosine_scores(const Matrix& code_vecs, const Matrix& query_vecs) {
    Matrix out(code_vecs.rows, query_vecs.rows);
    std::vector<double> cn(code_vecs.rows), qn(query_vecs.rows);
    for (std::size_t j = 0; j < code_vecs.rows; ++j) cn[j] = linalg::norm(code_vecs.row(j));
    for (std::size_t i = 0; i < query_vecs.rows; ++i) qn[i] = linalg::norm(query_vecs.row(i));
    for (std::size_t j = 0; j < code_vecs.rows; ++j) {
        for (std::size_t i = 0; i < query_vecs.rows; ++i) {
            const double denom = cn[j] * qn[i];
            out(j, i) = denom == 0.0 ? 0.0f
                                     : static_cast<float>(linalg::dot(code_vecs.row(j), query_vecs.row(i)) / denom);
        }
    }
    return out;
}

}  // namespace sstsearch
