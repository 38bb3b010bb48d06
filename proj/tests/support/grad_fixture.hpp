#pragma once

// Small models for finite-difference gradient checks.

#include <string>
#include <vector>

#include "sstsearch/model.hpp"

namespace sstsearch::testing {

struct GradFixture {
    Model model;
    std::vector<Example> batch;
    std::uint64_t seed = 0;
};

/// A tiny model over the vocabulary {a..e} shared by code and query, with a
/// batch of `batch_size` short examples. For selfatt, seeds are scanned
/// upward from `first_seed` until every ReLU pre-activation sits at least
/// `relu_clearance` away from zero.
inline GradFixture grad_fixture(EncoderKind kind, std::size_t dim, std::size_t batch_size, double relu_clearance,
                                std::uint64_t first_seed = 1) {
    const std::vector<std::string> tokens{"<pad>", "<unk>", "a", "b", "c", "d", "e"};
    constexpr std::size_t max_len = 6;
    for (std::uint64_t seed = first_seed;; ++seed) {
        GradFixture f;
        f.seed = seed;
        Model& m = f.model;
        m.mode = Mode::uni_code;
        m.config.embedding_dim = dim;
        m.config.encoder = kind;
        m.config.max_seq_len = max_len;
        m.code_vocab = Vocabulary::from_tokens(tokens);
        m.query_vocab = m.code_vocab;
        Rng rng(seed);
        m.code_encoder = init_encoder(kind, tokens.size(), dim, max_len, rng);
        m.query_encoder = init_encoder(kind, tokens.size(), dim, max_len, rng);
        for (std::size_t i = 0; i < batch_size; ++i) {
            Example e;
            e.code = {static_cast<TokenId>(2 + i % 5), static_cast<TokenId>(3 + i % 4), 4, kPadId};
            e.query = {static_cast<TokenId>(6 - i % 5), 2, static_cast<TokenId>(3 + i % 4)};
            f.batch.push_back(e);
        }
        if (relu_margin(m, f.batch) >= relu_clearance) return f;
    }
}

}  // namespace sstsearch::testing
