#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sstsearch/metrics.hpp"
#include "support/oracles.hpp"

using namespace sstsearch;
using Catch::Approx;

namespace {

/// Rank of the target by sorting all candidates, ties resolved in the
/// target's favour.
std::size_t sorted_rank(const Matrix& s, std::size_t i) {
    std::vector<std::size_t> order(s.rows);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (s(a, i) != s(b, i)) return s(a, i) > s(b, i);
        return a == i && b != i;
    });
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), i) - order.begin()) + 1;
}

}  // namespace

TEST_CASE("MRR of a single query ranked third") {
    Matrix s(4, 4);
    s(0, 0) = 0.5f;
    s(1, 0) = 0.9f;
    s(2, 0) = 0.7f;
    s(3, 0) = 0.1f;
    CHECK(target_rank(s, 0) == 3);
    CHECK(1.0 / static_cast<double>(target_rank(s, 0)) == Approx(1.0 / 3.0));
}

TEST_CASE("MRR is 1 when every target ranks first") {
    Matrix s(5, 5, 0.1f);
    for (std::size_t i = 0; i < 5; ++i) s(i, i) = 0.9f;
    CHECK(batch_mrr(s) == 1.0);
    // Ties count for the target.
    CHECK(batch_mrr(Matrix(5, 5, 0.3f)) == 1.0);
}

TEST_CASE("MRR of uniformly random scores approaches H_N / N") {
    constexpr std::size_t n = 1000;
    Rng rng(2024);
    std::vector<Matrix> batches;
    for (int b = 0; b < 5; ++b) {
        Matrix s(n, n);
        for (auto& x : s.data) x = static_cast<float>(rng.uniform());
        batches.push_back(std::move(s));
    }
    const double expected = testing::uniform_rank_mrr(n);
    CHECK(expected == Approx(0.0074855).epsilon(1e-4));
    CHECK(mrr(batches) == Approx(expected).epsilon(0.15));
}

TEST_CASE("MRR by counting equals MRR by sorting") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(30);
        Matrix s(n, n);
        // A coarse grid to force ties.
        for (auto& x : s.data) x = static_cast<float>(rng.below(5));
        double by_sort = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(target_rank(s, i) == sorted_rank(s, i));
            by_sort += 1.0 / static_cast<double>(sorted_rank(s, i));
        }
        CHECK(batch_mrr(s) == Approx(by_sort / static_cast<double>(n)).epsilon(1e-12));
    }
}

TEST_CASE("MRR averages per-batch values") {
    Matrix perfect(2, 2);
    perfect(0, 0) = perfect(1, 1) = 1.0f;
    Matrix swapped(2, 2);
    swapped(1, 0) = swapped(0, 1) = 1.0f;
    CHECK(batch_mrr(swapped) == 0.5);
    CHECK(mrr({perfect, swapped}) == 0.75);
}

TEST_CASE("MRR preconditions") {
    CHECK_THROWS_AS(batch_mrr(Matrix(2, 3)), PreconditionError);
    CHECK_THROWS_AS(batch_mrr(Matrix()), PreconditionError);
    CHECK_THROWS_AS(mrr({}), PreconditionError);
}

TEST_CASE("NDCG") {
    CHECK(ndcg_single({3, 2, 0}) == 1.0);
    // DCG = 0 + 3/log2(3) + 7/2 = 5.3928; ideal = 7 + 3/log2(3) + 0 = 8.8928.
    const double reversed = (3.0 / std::log2(3.0) + 3.5) / (7.0 + 3.0 / std::log2(3.0));
    CHECK(ndcg_single({0, 2, 3}) == Approx(reversed).epsilon(1e-12));
    CHECK(ndcg_single({0, 2, 3}) == Approx(0.6064).margin(1e-4));
    CHECK(ndcg_single({0, 0, 0}) == 0.0);
    CHECK(ndcg_single({0, 1}) == Approx(1.0 / std::log2(3.0)));
    CHECK_THROWS_AS(ndcg_single({1, -1}), PreconditionError);
    CHECK_THROWS_AS(ndcg_single({}), PreconditionError);
    CHECK(ndcg({{3, 2, 0}, {0, 0, 0}}) == 0.5);
    CHECK_THROWS_AS(ndcg({}), PreconditionError);
}

TEST_CASE("NDCG is bounded and maximal for the sorted order") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> rel(1 + rng.below(12));
        for (auto& r : rel) r = static_cast<double>(rng.below(4));
        const double v = ndcg_single(rel);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
        std::sort(rel.begin(), rel.end(), std::greater<>());
        if (dcg(rel) > 0.0) CHECK(ndcg_single(rel) == Approx(1.0));
    }
}

TEST_CASE("change ratio") {
    CHECK(change_ratio(0.8662, 0.7533) == Approx(0.1499).margin(5e-5));
    CHECK(change_ratio(0.3602, 0.3113) == Approx(0.15708).margin(5e-5));
    CHECK(change_ratio(0.5, 0.5) == 0.0);
    CHECK(change_ratio(0.25, 0.5) == -0.5);
    CHECK_THROWS_AS(change_ratio(0.3, 0.0), PreconditionError);
}

TEST_CASE("cosine scores") {
    const auto c = Matrix::from_rows({{1, 0}, {0, 0}, {2, 2}});
    const auto q = Matrix::from_rows({{3, 0}, {-1, -1}});
    const auto s = cosine_scores(c, q);
    REQUIRE(s.rows == 3);
    REQUIRE(s.cols == 2);
    CHECK(s(0, 0) == Approx(1.0));
    CHECK(s(1, 0) == 0.0f);
    CHECK(s(2, 0) == Approx(std::sqrt(0.5)));
    CHECK(s(2, 1) == Approx(-1.0));
    CHECK(s(0, 1) == Approx(-std::sqrt(0.5)));
}
