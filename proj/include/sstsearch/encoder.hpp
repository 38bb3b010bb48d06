#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sstsearch/common.hpp"
#include "sstsearch/tensor.hpp"

namespace sstsearch {

using TokenId = std::uint32_t;
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnknownId = 1;

/// Token ↔ id map. Ids 0 and 1 are reserved for padding and unknown tokens.
class Vocabulary {
public:
    Vocabulary() : tokens_{"<pad>", "<unk>"} {}

    /// Keeps tokens seen at least `min_count` times, most frequent first (ties
    /// by token text), up to `max_size` entries including the reserved ones.
    static Vocabulary build(const std::vector<std::vector<std::string>>& sequences, std::size_t max_size,
                            std::size_t min_count) {
        std::map<std::string, std::size_t> counts;
        for (const auto& seq : sequences) {
            for (const auto& t : seq) ++counts[t];
        }
        std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        Vocabulary v;
        for (const auto& [tok, count] : ranked) {
            if (v.size() >= max_size) break;
            if (count < min_count) break;
            v.add(tok);
        }
        return v;
    }

    static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
        if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
            throw DataError("vocabulary must start with <pad>, <unk>");
        }
        Vocabulary v;
        for (std::size_t i = 2; i < tokens.size(); ++i) {
            if (v.index_.count(tokens[i]) || tokens[i] == "<pad>" || tokens[i] == "<unk>") {
                throw DataError("vocabulary has duplicate token \"" + tokens[i] + "\"");
            }
            v.add(tokens[i]);
        }
        return v;
    }

    TokenId id(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? kUnknownId : it->second;
    }

    std::vector<TokenId> encode(const std::vector<std::string>& tokens) const {
        std::vector<TokenId> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(id(t));
        return out;
    }

    const std::string& token(TokenId id) const { return tokens_.at(id); }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    void add(const std::string& tok) {
        index_.emplace(tok, static_cast<TokenId>(tokens_.size()));
        tokens_.push_back(tok);
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

enum class EncoderKind { nbow, selfatt };

inline std::string_view to_string(EncoderKind k) { return k == EncoderKind::nbow ? "nbow" : "selfatt"; }

inline std::optional<EncoderKind> parse_encoder_kind(std::string_view s) {
    if (s == "nbow") return EncoderKind::nbow;
    if (s == "selfatt") return EncoderKind::selfatt;
    return std::nullopt;
}

/// Parameters of one sequence encoder, as named matrices in a fixed order.
///
/// nbow:    embedding (V x d)
/// selfatt: embedding (V x d), position (L x d), wq, wk, wv, wo (d x d),
///          w1 (d x F), b1 (1 x F), w2 (F x d), b2 (1 x d)
struct EncoderParams {
    EncoderKind kind = EncoderKind::nbow;
    std::size_t dim = 0;
    std::size_t max_len = 0;
    std::size_t heads = 2;
    std::vector<std::pair<std::string, Matrix>> blocks;

    Matrix& get(std::string_view name) {
        for (auto& [n, m] : blocks) {
            if (n == name) return m;
        }
        throw PreconditionError("EncoderParams: no block named " + std::string(name));
    }
    const Matrix& get(std::string_view name) const { return const_cast<EncoderParams*>(this)->get(name); }

    std::size_t vocab_size() const { return blocks.empty() ? 0 : blocks.front().second.rows; }
    bool empty() const { return blocks.empty(); }

    /// Same shapes, all zeros.
    EncoderParams zeros_like() const {
        EncoderParams z = *this;
        for (auto& [_, m] : z.blocks) std::fill(m.data.begin(), m.data.end(), 0.0f);
        return z;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [_, m] : blocks) n += m.data.size();
        return n;
    }
};

namespace detail {

inline void fill_uniform(Matrix& m, float scale, Rng& rng) {
    for (auto& x : m.data) x = static_cast<float>(rng.uniform(-scale, scale));
}

}  // namespace detail

/// Random initialization: embeddings U(-0.1, 0.1), projections Glorot-uniform,
/// biases zero. Padding rows stay zero.
inline EncoderParams init_encoder(EncoderKind kind, std::size_t vocab_size, std::size_t dim, std::size_t max_len,
                                  Rng& rng) {
    if (dim == 0) throw PreconditionError("encoder dimension must be >= 1");
    EncoderParams p;
    p.kind = kind;
    p.dim = dim;
    p.max_len = max_len;
    Matrix emb(vocab_size, dim);
    detail::fill_uniform(emb, 0.1f, rng);
    std::fill(emb.data.begin(), emb.data.begin() + static_cast<std::ptrdiff_t>(dim), 0.0f);
    p.blocks.emplace_back("embedding", std::move(emb));
    if (kind == EncoderKind::nbow) return p;

    if (dim % p.heads != 0) throw PreconditionError("selfatt dimension must be divisible by the head count");
    if (max_len == 0) throw PreconditionError("selfatt needs max_len >= 1");
    const std::size_t ff = 2 * dim;
    Matrix pos(max_len, dim);
    detail::fill_uniform(pos, 0.1f, rng);
    p.blocks.emplace_back("position", std::move(pos));
    const auto glorot = [&](std::size_t fan_in, std::size_t fan_out) {
        Matrix w(fan_in, fan_out);
        detail::fill_uniform(w, static_cast<float>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out))), rng);
        return w;
    };
    p.blocks.emplace_back("wq", glorot(dim, dim));
    p.blocks.emplace_back("wk", glorot(dim, dim));
    p.blocks.emplace_back("wv", glorot(dim, dim));
    p.blocks.emplace_back("wo", glorot(dim, dim));
    p.blocks.emplace_back("w1", glorot(dim, ff));
    p.blocks.emplace_back("b1", Matrix(1, ff));
    p.blocks.emplace_back("w2", glorot(ff, dim));
    p.blocks.emplace_back("b2", Matrix(1, dim));
    return p;
}

/// Activations kept from a forward pass for the backward pass. `T` is the
/// compute precision; parameters are always stored as float.
template <class T = float>
struct EncodeCache {
    std::vector<TokenId> ids;        // non-padding ids, after truncation
    std::vector<std::size_t> pos;    // their positions
    bool truncated = false;
    // selfatt only
    BasicMatrix<T> x, q, k, v, o, h1, z;
    std::vector<BasicMatrix<T>> attn;  // per head, n x n
};

namespace detail {

inline void check_ids(const EncoderParams& p, std::span<const TokenId> ids) {
    for (TokenId id : ids) {
        if (id >= p.vocab_size()) {
            throw PreconditionError("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                                    std::to_string(p.vocab_size()));
        }
    }
}

template <class T>
void compact(const EncoderParams& p, std::span<const TokenId> ids, EncodeCache<T>& c) {
    c.ids.clear();
    c.pos.clear();
    std::size_t limit = ids.size();
    if (p.kind == EncoderKind::selfatt && limit > p.max_len) {
        limit = p.max_len;
        c.truncated = true;
    }
    for (std::size_t i = 0; i < limit; ++i) {
        if (ids[i] == kPadId) continue;
        c.ids.push_back(ids[i]);
        c.pos.push_back(i);
    }
}

}  // namespace detail

/// Mean of the embeddings of non-padding tokens; zero vector when there are none.
template <class T = float>
std::vector<T> encode_nbow(const EncoderParams& p, std::span<const TokenId> ids, EncodeCache<T>* cache = nullptr) {
    detail::check_ids(p, ids);
    EncodeCache<T> local;
    EncodeCache<T>& c = cache ? *cache : local;
    c = EncodeCache<T>{};
    detail::compact(p, ids, c);
    std::vector<double> acc(p.dim, 0.0);
    const auto& emb = p.get("embedding");
    for (TokenId id : c.ids) {
        const auto row = emb.row(id);
        for (std::size_t j = 0; j < p.dim; ++j) acc[j] += row[j];
    }
    std::vector<T> out(p.dim, T{});
    if (c.ids.empty()) return out;
    const double inv = 1.0 / static_cast<double>(c.ids.size());
    for (std::size_t j = 0; j < p.dim; ++j) out[j] = static_cast<T>(acc[j] * inv);
    return out;
}

/// One transformer block over token + position embeddings:
///   h1 = x + MultiHeadAttention(x),  h2 = h1 + W2 relu(W1 h1 + b1) + b2,
/// mean-pooled over non-padding positions. Sequences longer than max_len are
/// truncated (cache->truncated records it).
template <class T = float>
std::vector<T> encode_selfatt(const EncoderParams& p, std::span<const TokenId> ids, EncodeCache<T>* cache = nullptr) {
    detail::check_ids(p, ids);
    EncodeCache<T> local;
    EncodeCache<T>& c = cache ? *cache : local;
    c = EncodeCache<T>{};
    detail::compact(p, ids, c);
    const std::size_t n = c.ids.size();
    const std::size_t d = p.dim;
    std::vector<T> out(d, T{});
    if (n == 0) return out;

    const auto& emb = p.get("embedding");
    const auto& pos = p.get("position");
    c.x = BasicMatrix<T>(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto e = emb.row(c.ids[i]);
        const auto ps = pos.row(c.pos[i]);
        for (std::size_t j = 0; j < d; ++j) c.x(i, j) = static_cast<T>(e[j]) + static_cast<T>(ps[j]);
    }
    c.q = linalg::matmul(c.x, p.get("wq"));
    c.k = linalg::matmul(c.x, p.get("wk"));
    c.v = linalg::matmul(c.x, p.get("wv"));

    const std::size_t heads = p.heads;
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    c.o = BasicMatrix<T>(n, d);
    c.attn.assign(heads, BasicMatrix<T>(n, n));
    std::vector<double> logits(n);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        auto& a = c.attn[h];
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t t = 0; t < dh; ++t) s += static_cast<double>(c.q(i, off + t)) * c.k(j, off + t);
                logits[j] = s * scale;
                mx = std::max(mx, logits[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                logits[j] = std::exp(logits[j] - mx);
                z += logits[j];
            }
            for (std::size_t j = 0; j < n; ++j) a(i, j) = static_cast<T>(logits[j] / z);
            for (std::size_t t = 0; t < dh; ++t) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += static_cast<double>(a(i, j)) * c.v(j, off + t);
                c.o(i, off + t) = static_cast<T>(s);
            }
        }
    }
    const auto att = linalg::matmul(c.o, p.get("wo"));
    c.h1 = BasicMatrix<T>(n, d);
    for (std::size_t i = 0; i < c.h1.data.size(); ++i) c.h1.data[i] = c.x.data[i] + att.data[i];

    const auto& b1 = p.get("b1");
    c.z = linalg::matmul(c.h1, p.get("w1"));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c.z.cols; ++j) c.z(i, j) += static_cast<T>(b1.data[j]);
    }
    auto r = c.z;
    for (auto& x : r.data) x = std::max(x, T{});
    const auto f = linalg::matmul(r, p.get("w2"));
    const auto& b2 = p.get("b2");

    std::vector<double> acc(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            acc[j] += static_cast<double>(c.h1(i, j)) + static_cast<double>(f(i, j)) + b2.data[j];
        }
    }
    for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<T>(acc[j] / static_cast<double>(n));
    return out;
}

template <class T = float>
std::vector<T> encode(const EncoderParams& p, std::span<const TokenId> ids, EncodeCache<T>* cache = nullptr) {
    return p.kind == EncoderKind::nbow ? encode_nbow<T>(p, ids, cache) : encode_selfatt<T>(p, ids, cache);
}

/// Accumulates d(output)/d(params) · grad_out into `grads` (same shapes as p).
template <class T>
void encode_backward(const EncoderParams& p, const EncodeCache<T>& c, std::span<const T> grad_out,
                     EncoderParams& grads) {
    const std::size_t n = c.ids.size();
    const std::size_t d = p.dim;
    if (n == 0) return;
    const double inv = 1.0 / static_cast<double>(n);

    if (p.kind == EncoderKind::nbow) {
        auto& ge = grads.get("embedding");
        for (TokenId id : c.ids) {
            auto row = ge.row(id);
            for (std::size_t j = 0; j < d; ++j) row[j] += static_cast<float>(grad_out[j] * inv);
        }
        return;
    }

    // h2 = h1 + relu(h1 W1 + b1) W2 + b2; out = mean(h2)
    BasicMatrix<T> dh2(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) dh2(i, j) = static_cast<T>(grad_out[j] * inv);
    }
    auto r = c.z;
    for (auto& x : r.data) x = std::max(x, T{});
    linalg::add_matmul_at(r, dh2, std::span<float>(grads.get("w2").data));
    {
        auto& gb2 = grads.get("b2");
        for (std::size_t j = 0; j < d; ++j) gb2.data[j] += static_cast<float>(grad_out[j]);
    }
    auto dz = linalg::matmul_bt(dh2, p.get("w2"));
    for (std::size_t i = 0; i < dz.data.size(); ++i) {
        if (c.z.data[i] <= T{}) dz.data[i] = T{};
    }
    linalg::add_matmul_at(c.h1, dz, std::span<float>(grads.get("w1").data));
    {
        auto& gb1 = grads.get("b1");
        for (std::size_t j = 0; j < dz.cols; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += dz(i, j);
            gb1.data[j] += static_cast<float>(s);
        }
    }
    auto dh1 = linalg::matmul_bt(dz, p.get("w1"));
    for (std::size_t i = 0; i < dh1.data.size(); ++i) dh1.data[i] += dh2.data[i];

    // h1 = x + (o Wo)
    auto dx = dh1;
    linalg::add_matmul_at(c.o, dh1, std::span<float>(grads.get("wo").data));
    const auto dout = linalg::matmul_bt(dh1, p.get("wo"));

    const std::size_t heads = p.heads;
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    BasicMatrix<T> dq(n, d), dk(n, d), dv(n, d);
    std::vector<double> da(n);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        const auto& a = c.attn[h];
        for (std::size_t i = 0; i < n; ++i) {
            // da_ij = dout_i · v_j ; dv_j += a_ij dout_i
            double rowdot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t t = 0; t < dh; ++t) s += static_cast<double>(dout(i, off + t)) * c.v(j, off + t);
                da[j] = s;
                rowdot += s * a(i, j);
                for (std::size_t t = 0; t < dh; ++t) dv(j, off + t) += a(i, j) * dout(i, off + t);
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double ds = a(i, j) * (da[j] - rowdot) * scale;
                if (ds == 0.0) continue;
                for (std::size_t t = 0; t < dh; ++t) {
                    dq(i, off + t) += static_cast<T>(ds * c.k(j, off + t));
                    dk(j, off + t) += static_cast<T>(ds * c.q(i, off + t));
                }
            }
        }
    }
    const std::pair<const BasicMatrix<T>*, const char*> projections[] = {{&dq, "wq"}, {&dk, "wk"}, {&dv, "wv"}};
    for (const auto& [grad, name] : projections) {
        linalg::add_matmul_at(c.x, *grad, std::span<float>(grads.get(name).data));
        const auto back = linalg::matmul_bt(*grad, p.get(name));
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += back.data[i];
    }

    auto& ge = grads.get("embedding");
    auto& gp = grads.get("position");
    for (std::size_t i = 0; i < n; ++i) {
        auto erow = ge.row(c.ids[i]);
        auto prow = gp.row(c.pos[i]);
        for (std::size_t j = 0; j < d; ++j) {
            erow[j] += static_cast<float>(dx(i, j));
            prow[j] += static_cast<float>(dx(i, j));
        }
    }
}

/// Elementwise sum of the token and tree vectors.
template <class T>
std::vector<T> fuse(std::span<const T> code_vec, std::span<const T> tree_vec) {
    if (code_vec.size() != tree_vec.size()) {
        throw PreconditionError("fuse: dimension mismatch (" + std::to_string(code_vec.size()) + " vs " +
                                std::to_string(tree_vec.size()) + ")");
    }
    std::vector<T> out(code_vec.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = code_vec[i] + tree_vec[i];
    return out;
}

inline std::vector<float> fuse(std::span<const float> code_vec, std::span<const float> tree_vec) {
    return fuse<float>(code_vec, tree_vec);
}

}  // namespace sstsearch
