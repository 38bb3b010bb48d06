#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "sstsearch/encoder.hpp"

using namespace sstsearch;
using Catch::Approx;

namespace {

using Ids = std::vector<TokenId>;

EncoderParams nbow_params(const std::vector<std::vector<float>>& rows) {
    EncoderParams p;
    p.kind = EncoderKind::nbow;
    p.dim = rows.front().size();
    p.blocks.emplace_back("embedding", Matrix::from_rows(rows));
    return p;
}

void set_identity(Matrix& m) {
    std::fill(m.data.begin(), m.data.end(), 0.0f);
    for (std::size_t i = 0; i < std::min(m.rows, m.cols); ++i) m(i, i) = 1.0f;
}

void zero(Matrix& m) { std::fill(m.data.begin(), m.data.end(), 0.0f); }

/// Self-attention encoder whose attention logits are all equal (zero query
/// and key projections), with positions and the feed-forward branch zeroed.
EncoderParams uniform_attention(std::size_t vocab, std::size_t dim, bool output_projection, std::uint64_t seed) {
    Rng rng(seed);
    auto p = init_encoder(EncoderKind::selfatt, vocab, dim, 16, rng);
    zero(p.get("position"));
    zero(p.get("wq"));
    zero(p.get("wk"));
    set_identity(p.get("wv"));
    if (output_projection) {
        set_identity(p.get("wo"));
    } else {
        zero(p.get("wo"));
    }
    zero(p.get("w1"));
    zero(p.get("b1"));
    zero(p.get("w2"));
    zero(p.get("b2"));
    return p;
}

}  // namespace

TEST_CASE("Vocabulary::build ranks by count, then text") {
    const std::vector<std::vector<std::string>> seqs = {{"b", "a", "c", "b"}, {"a", "b", "d"}, {"c", "e"}};
    const auto v = Vocabulary::build(seqs, 100, 2);
    REQUIRE(v.size() == 5);
    CHECK(v.token(0) == "<pad>");
    CHECK(v.token(1) == "<unk>");
    CHECK(v.token(2) == "b");
    CHECK(v.token(3) == "a");
    CHECK(v.token(4) == "c");
    CHECK(v.id("d") == kUnknownId);
    CHECK(v.encode({"a", "zzz", "c"}) == Ids{3, kUnknownId, 4});

    CHECK(Vocabulary::build(seqs, 3, 1).size() == 3);
    CHECK(Vocabulary::build(seqs, 100, 1).size() == 7);
    CHECK(Vocabulary::build({}, 100, 1).size() == 2);
}

TEST_CASE("Vocabulary::from_tokens") {
    const auto v = Vocabulary::from_tokens({"<pad>", "<unk>", "x", "y"});
    CHECK(v.id("y") == 3);
    CHECK(Vocabulary::from_tokens(v.tokens()).tokens() == v.tokens());
    CHECK_THROWS_AS(Vocabulary::from_tokens({"x"}), DataError);
    CHECK_THROWS_AS(Vocabulary::from_tokens({"<pad>", "<unk>", "x", "x"}), DataError);
}

TEST_CASE("init_encoder shapes and padding row") {
    Rng rng(3);
    const auto p = init_encoder(EncoderKind::selfatt, 10, 8, 5, rng);
    CHECK(p.get("embedding").rows == 10);
    CHECK(p.get("position").rows == 5);
    CHECK(p.get("w1").cols == 16);
    CHECK(p.get("w2").rows == 16);
    for (std::size_t j = 0; j < 8; ++j) CHECK(p.get("embedding")(kPadId, j) == 0.0f);
    for (float b : p.get("b1").data) CHECK(b == 0.0f);
    CHECK(p.parameter_count() == 10 * 8 + 5 * 8 + 4 * 64 + 8 * 16 + 16 + 16 * 8 + 8);
    CHECK(p.zeros_like().parameter_count() == p.parameter_count());

    Rng again(3);
    const auto q = init_encoder(EncoderKind::selfatt, 10, 8, 5, again);
    CHECK(q.get("wq").data == p.get("wq").data);

    Rng r2(1);
    CHECK_THROWS_AS(init_encoder(EncoderKind::selfatt, 10, 7, 5, r2), PreconditionError);
    CHECK_THROWS_AS(init_encoder(EncoderKind::nbow, 10, 0, 5, r2), PreconditionError);
}

TEST_CASE("encode_nbow examples") {
    const auto p = nbow_params({{0, 0}, {0, 0}, {0.5f, -2.0f}, {-0.5f, 2.0f}, {1.0f, 1.0f}});
    CHECK(encode_nbow(p, Ids{2}) == std::vector<float>{0.5f, -2.0f});
    CHECK(encode_nbow(p, Ids{2, 3}) == std::vector<float>{0.0f, 0.0f});
    CHECK(encode_nbow(p, Ids{}) == std::vector<float>{0.0f, 0.0f});
    CHECK(encode_nbow(p, Ids{kPadId, kPadId}) == std::vector<float>{0.0f, 0.0f});
    // Padding does not count towards the mean.
    CHECK(encode_nbow(p, Ids{4, kPadId, 2, kPadId}) == encode_nbow(p, Ids{4, 2}));
    CHECK_THROWS_AS(encode_nbow(p, Ids{5}), PreconditionError);
}

TEST_CASE("encode_nbow is permutation invariant") {
    Rng rng(17);
    const auto p = init_encoder(EncoderKind::nbow, 50, 16, 0, rng);
    for (int trial = 0; trial < 50; ++trial) {
        Ids ids;
        for (std::size_t i = 0; i < 1 + rng.below(20); ++i) ids.push_back(static_cast<TokenId>(rng.below(50)));
        auto shuffled = ids;
        rng.shuffle(shuffled);
        const auto a = encode_nbow(p, ids);
        const auto b = encode_nbow(p, shuffled);
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == Approx(b[j]).margin(1e-6));
    }
}

TEST_CASE("encode_selfatt output dimension") {
    Rng rng(4);
    const auto p = init_encoder(EncoderKind::selfatt, 20, 6, 12, rng);
    for (std::size_t n : {0, 1, 2, 7, 12, 30}) {
        Ids ids;
        for (std::size_t i = 0; i < n; ++i) ids.push_back(static_cast<TokenId>(2 + i % 18));
        const auto v = encode_selfatt(p, ids);
        CHECK(v.size() == 6);
        for (float x : v) CHECK(std::isfinite(x));
    }
}

TEST_CASE("encode_selfatt depends on token order") {
    Rng rng(21);
    const auto p = init_encoder(EncoderKind::selfatt, 6, 8, 4, rng);
    const auto ab = encode_selfatt(p, Ids{2, 3});
    const auto ba = encode_selfatt(p, Ids{3, 2});
    double diff = 0.0;
    for (std::size_t j = 0; j < ab.size(); ++j) diff += std::abs(ab[j] - ba[j]);
    CHECK(diff > 1e-3);
}

TEST_CASE("encode_selfatt reduces to the token mean with uniform attention") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        // No output projection: the block is the identity on x.
        const auto plain = uniform_attention(12, 8, false, seed);
        // Identity value and output projections: each row gains the mean of
        // all rows, so the pooled output is twice the mean.
        const auto doubled = uniform_attention(12, 8, true, seed);
        EncoderParams nbow = plain;
        nbow.kind = EncoderKind::nbow;
        const Ids ids{2, 5, 5, 9, 11, 3};
        const auto expected = encode_nbow(nbow, ids);
        const auto a = encode_selfatt(plain, ids);
        const auto b = encode_selfatt(doubled, ids);
        for (std::size_t j = 0; j < expected.size(); ++j) {
            CHECK(a[j] == Approx(expected[j]).margin(1e-6));
            CHECK(b[j] == Approx(2.0f * expected[j]).margin(1e-6));
        }
    }
}

TEST_CASE("encode_selfatt truncates to max_len") {
    Rng rng(8);
    const auto p = init_encoder(EncoderKind::selfatt, 10, 4, 3, rng);
    EncodeCache<float> cache;
    const auto long_out = encode_selfatt(p, Ids{2, 3, 4, 5, 6}, &cache);
    CHECK(cache.truncated);
    CHECK(cache.ids.size() == 3);
    EncodeCache<float> short_cache;
    const auto short_out = encode_selfatt(p, Ids{2, 3, 4}, &short_cache);
    CHECK_FALSE(short_cache.truncated);
    CHECK(long_out == short_out);
}

TEST_CASE("encode dispatches on kind and precision") {
    Rng rng(6);
    const auto p = init_encoder(EncoderKind::selfatt, 10, 4, 8, rng);
    const Ids ids{2, 3, 4};
    const auto f = encode(p, ids);
    const auto d = encode<double>(p, ids);
    CHECK(f == encode_selfatt(p, ids));
    for (std::size_t j = 0; j < f.size(); ++j) CHECK(d[j] == Approx(f[j]).margin(1e-5));
}

TEST_CASE("fuse") {
    const std::vector<float> a{0.5f, -1.0f}, b{0.5f, 1.0f}, z{0.0f, 0.0f};
    CHECK(fuse(a, b) == std::vector<float>{1.0f, 0.0f});
    CHECK(fuse(a, z) == a);
    CHECK(fuse(a, b).size() == a.size());
    CHECK_THROWS_AS(fuse(a, std::vector<float>{1.0f}), PreconditionError);
}
