#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sstsearch/common.hpp"
#include "sstsearch/corpus.hpp"
#include "sstsearch/encoder.hpp"
#include "sstsearch/loss.hpp"
#include "sstsearch/metrics.hpp"
#include "sstsearch/representation.hpp"
#include "sstsearch/serialize.hpp"
#include "sstsearch/sst.hpp"
#include "sstsearch/tensor.hpp"

namespace sstsearch {

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t embedding_dim = 128;
    double learning_rate = 1e-3;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    std::size_t max_seq_len = 200;
    EncoderKind encoder = EncoderKind::selfatt;
    std::size_t vocab_size = 10000;
    std::size_t min_count = 2;

    void validate() const {
        if (batch_size < 2) throw PreconditionError("batch_size must be >= 2 (the loss needs distractors)");
        if (embedding_dim < 1) throw PreconditionError("embedding_dim must be >= 1");
        if (max_seq_len < 1) throw PreconditionError("max_seq_len must be >= 1");
        if (vocab_size < 2) throw PreconditionError("vocab_size must be >= 2");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
            throw PreconditionError("learning_rate must be finite and >= 0");
        }
        if (encoder == EncoderKind::selfatt && embedding_dim % 2 != 0) {
            throw PreconditionError("selfatt needs an even embedding_dim (2 heads)");
        }
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return nlohmann::json{{"batch_size", c.batch_size},       {"embedding_dim", c.embedding_dim},
                          {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
                          {"seed", c.seed},                   {"max_seq_len", c.max_seq_len},
                          {"encoder", to_string(c.encoder)},  {"vocab_size", c.vocab_size},
                          {"min_count", c.min_count}};
}

inline nlohmann::json to_json(const SamplerConfig& c) {
    return nlohmann::json{{"n_paths", c.n_paths},
                          {"length_threshold", c.length_threshold},
                          {"width_threshold", c.width_threshold},
                          {"seed", c.seed}};
}

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    /// NaN when there is no validation split.
    double valid_loss = std::nan("");
    double valid_mrr = std::nan("");
};

struct TrainStats {
    std::size_t skipped = 0;    // pairs whose tree could not be built
    std::size_t truncated = 0;  // encoder inputs cut to max_seq_len
};

/// A trained (or freshly initialized) search model: code-side encoder(s) and
/// a query encoder sharing one embedding dimension.
struct Model {
    static constexpr std::uint32_t kVersion = 1;

    Mode mode = Mode::uni_code;
    TrainConfig config;
    TransformRuleSet rules;
    SamplerConfig sampler;
    Vocabulary code_vocab, tree_vocab, query_vocab;
    EncoderParams code_encoder, tree_encoder, query_encoder;
    std::vector<EpochRecord> history;
    TrainStats stats;

    std::size_t dim() const { return config.embedding_dim; }
};

/// Token ids for one pair.
struct Example {
    std::vector<TokenId> code;
    std::vector<TokenId> tree;
    std::vector<TokenId> query;
};

inline Example make_example(const Model& m, const Features& f) {
    Example e;
    e.code = m.code_vocab.encode(f.code_tokens);
    if (is_multimodal(m.mode)) e.tree = m.tree_vocab.encode(f.tree_tokens);
    e.query = m.query_vocab.encode(f.query_tokens);
    return e;
}

template <class T = float>
struct CodeCaches {
    EncodeCache<T> code;
    EncodeCache<T> tree;
};

/// Joint code vector: the code-side encoder output, fused with the tree
/// encoder output in multimodal modes.
template <class T = float>
std::vector<T> encode_code_side(const Model& m, const Example& e, CodeCaches<T>* caches = nullptr) {
    auto v = encode<T>(m.code_encoder, e.code, caches ? &caches->code : nullptr);
    if (!is_multimodal(m.mode)) return v;
    const auto t = encode<T>(m.tree_encoder, e.tree, caches ? &caches->tree : nullptr);
    return fuse<T>(v, t);
}

template <class T = float>
std::vector<T> encode_query_side(const Model& m, const std::vector<TokenId>& ids, EncodeCache<T>* cache = nullptr) {
    return encode<T>(m.query_encoder, ids, cache);
}

/// Gradients with the same layout as the model's encoders.
struct ModelGrads {
    EncoderParams code, tree, query;

    explicit ModelGrads(const Model& m)
        : code(m.code_encoder.zeros_like()), tree(m.tree_encoder.zeros_like()), query(m.query_encoder.zeros_like()) {}
};

/// Loss over one batch, and its gradient when `grads` is given. `T` is the
/// compute precision of activations.
template <class T = float>
double batch_step(const Model& m, const std::vector<const Example*>& batch, ModelGrads* grads,
                  std::size_t* truncated = nullptr) {
    const std::size_t n = batch.size();
    const std::size_t d = m.dim();
    std::vector<CodeCaches<T>> code_caches(n);
    std::vector<EncodeCache<T>> query_caches(n);
    BasicMatrix<T> code_vecs(n, d), query_vecs(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = encode_code_side<T>(m, *batch[i], &code_caches[i]);
        const auto q = encode_query_side<T>(m, batch[i]->query, &query_caches[i]);
        std::copy(c.begin(), c.end(), code_vecs.row(i).begin());
        std::copy(q.begin(), q.end(), query_vecs.row(i).begin());
        if (truncated) {
            *truncated += code_caches[i].code.truncated + code_caches[i].tree.truncated + query_caches[i].truncated;
        }
    }
    if (!grads) return batch_loss(code_vecs, query_vecs);

    const auto g = batch_loss_with_grad(code_vecs, query_vecs);
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const T> gc = g.grad_code.row(i);
        encode_backward<T>(m.code_encoder, code_caches[i].code, gc, grads->code);
        if (is_multimodal(m.mode)) encode_backward<T>(m.tree_encoder, code_caches[i].tree, gc, grads->tree);
        encode_backward<T>(m.query_encoder, query_caches[i], g.grad_query.row(i), grads->query);
    }
    return g.loss;
}

/// Adaptive-moment optimizer (beta1 0.9, beta2 0.999, eps 1e-8) with bias correction.
class Adam {
public:
    Adam(const Model& m, double lr) : lr_(lr), m1_(m), m2_(m) {}

    void step(Model& m, const ModelGrads& g) {
        ++t_;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        update(m.code_encoder, g.code, m1_.code, m2_.code, c1, c2);
        update(m.tree_encoder, g.tree, m1_.tree, m2_.tree, c1, c2);
        update(m.query_encoder, g.query, m1_.query, m2_.query, c1, c2);
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    void update(EncoderParams& p, const EncoderParams& g, EncoderParams& m1, EncoderParams& m2, double c1,
                double c2) const {
        for (std::size_t b = 0; b < p.blocks.size(); ++b) {
            auto& w = p.blocks[b].second.data;
            const auto& gw = g.blocks[b].second.data;
            auto& a = m1.blocks[b].second.data;
            auto& s = m2.blocks[b].second.data;
            for (std::size_t i = 0; i < w.size(); ++i) {
                a[i] = static_cast<float>(kBeta1 * a[i] + (1.0 - kBeta1) * gw[i]);
                s[i] = static_cast<float>(kBeta2 * s[i] + (1.0 - kBeta2) * static_cast<double>(gw[i]) * gw[i]);
                const double mhat = a[i] / c1;
                const double vhat = s[i] / c2;
                w[i] = static_cast<float>(w[i] - lr_ * mhat / (std::sqrt(vhat) + kEps));
            }
        }
    }

    double lr_;
    ModelGrads m1_, m2_;
    std::uint64_t t_ = 0;
};

/// Splits `order` into consecutive batches of `batch_size`; a final batch of
/// one example is merged into the previous batch.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                          std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        const auto end = std::min(order.size(), i + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (out.size() >= 2 && out.back().size() == 1) {
        out[out.size() - 2].push_back(out.back().front());
        out.pop_back();
    }
    return out;
}

/// Encodes examples into code and query matrices.
inline std::pair<Matrix, Matrix> encode_examples(const Model& m, const std::vector<const Example*>& examples) {
    Matrix code(examples.size(), m.dim()), query(examples.size(), m.dim());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto c = encode_code_side(m, *examples[i]);
        const auto q = encode_query_side(m, examples[i]->query);
        std::copy(c.begin(), c.end(), code.row(i).begin());
        std::copy(q.begin(), q.end(), query.row(i).begin());
    }
    return {std::move(code), std::move(query)};
}

struct SplitScore {
    double loss = std::nan("");
    double mrr = std::nan("");
    /// Largest batch size minus one: the number of distractors per query.
    std::size_t distractors = 0;
    std::size_t batches = 0;
    /// Per-batch cosine score matrices, scores(code j, query i).
    std::vector<Matrix> cosine;
};

/// Batched evaluation in the given order: in-batch loss (raw inner products)
/// and MRR over cosine similarities, averaged over batches.
inline SplitScore score_examples(const Model& m, const std::vector<const Example*>& examples) {
    SplitScore s;
    if (examples.size() < 2) return s;
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double loss_sum = 0.0;
    for (const auto& batch : make_batches(order, m.config.batch_size)) {
        std::vector<const Example*> items;
        for (auto i : batch) items.push_back(examples[i]);
        auto [code, query] = encode_examples(m, items);
        loss_sum += batch_loss(code, query);
        s.cosine.push_back(cosine_scores(code, query));
        s.distractors = std::max(s.distractors, batch.size() - 1);
    }
    s.batches = s.cosine.size();
    s.loss = loss_sum / static_cast<double>(s.batches);
    s.mrr = mrr(s.cosine);
    return s;
}

/// Features for the pairs at `indices`; pairs whose tree cannot be built are
/// skipped and counted.
inline std::vector<Features> collect_features(const std::vector<CodeQueryPair>& pairs,
                                              const std::vector<std::size_t>& indices, Mode mode,
                                              const TransformRuleSet& rules, const SamplerConfig& sampler,
                                              std::size_t& skipped, std::vector<std::size_t>* kept = nullptr) {
    std::vector<Features> out;
    for (auto i : indices) {
        try {
            out.push_back(extract_features(pairs.at(i), mode, rules, sampler));
            if (kept) kept->push_back(i);
        } catch (const DataError&) {
            ++skipped;
        }
    }
    return out;
}

/// Builds vocabularies from training features and initializes encoders.
inline Model init_model(Mode mode, const TrainConfig& cfg, const TransformRuleSet& rules,
                        const SamplerConfig& sampler, const std::vector<Features>& train_features) {
    cfg.validate();
    Model m;
    m.mode = mode;
    m.config = cfg;
    m.rules = rules;
    m.sampler = sampler;
    std::vector<std::vector<std::string>> code_seqs, tree_seqs, query_seqs;
    for (const auto& f : train_features) {
        code_seqs.push_back(f.code_tokens);
        if (is_multimodal(mode)) tree_seqs.push_back(f.tree_tokens);
        query_seqs.push_back(f.query_tokens);
    }
    m.code_vocab = Vocabulary::build(code_seqs, cfg.vocab_size, cfg.min_count);
    if (is_multimodal(mode)) m.tree_vocab = Vocabulary::build(tree_seqs, cfg.vocab_size, cfg.min_count);
    m.query_vocab = Vocabulary::build(query_seqs, cfg.vocab_size, cfg.min_count);

    Rng rng(item_seed(cfg.seed, "init"));
    m.code_encoder = init_encoder(cfg.encoder, m.code_vocab.size(), cfg.embedding_dim, cfg.max_seq_len, rng);
    if (is_multimodal(mode)) {
        m.tree_encoder = init_encoder(cfg.encoder, m.tree_vocab.size(), cfg.embedding_dim, cfg.max_seq_len, rng);
    }
    m.query_encoder = init_encoder(cfg.encoder, m.query_vocab.size(), cfg.embedding_dim, cfg.max_seq_len, rng);
    return m;
}

/// Trains a model on the split's train part, validating on its valid part
/// after every epoch. Deterministic for a fixed seed.
inline Model train(const std::vector<CodeQueryPair>& pairs, const CorpusSplit& split, Mode mode,
                   const TrainConfig& cfg, const TransformRuleSet& rules, const SamplerConfig& sampler) {
    cfg.validate();
    if (split.train.empty()) throw DataError("train: the train split is empty");
    TrainStats stats;
    const auto train_features = collect_features(pairs, split.train, mode, rules, sampler, stats.skipped);
    const auto valid_features = collect_features(pairs, split.valid, mode, rules, sampler, stats.skipped);
    if (train_features.size() < 2) throw DataError("train: fewer than 2 usable training pairs");

    Model m = init_model(mode, cfg, rules, sampler, train_features);
    std::vector<Example> train_ex, valid_ex;
    for (const auto& f : train_features) train_ex.push_back(make_example(m, f));
    for (const auto& f : valid_features) valid_ex.push_back(make_example(m, f));
    std::vector<const Example*> valid_ptrs;
    for (const auto& e : valid_ex) valid_ptrs.push_back(&e);

    Adam adam(m, cfg.learning_rate);
    Rng order_rng(item_seed(cfg.seed, "batches"));
    std::vector<std::size_t> order(train_ex.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (const auto& batch : make_batches(order, cfg.batch_size)) {
            if (batch.size() < 2) continue;
            std::vector<const Example*> items;
            for (auto i : batch) items.push_back(&train_ex[i]);
            ModelGrads grads(m);
            loss_sum += batch_step(m, items, &grads, epoch == 1 ? &stats.truncated : nullptr);
            adam.step(m, grads);
            ++steps;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = steps ? loss_sum / static_cast<double>(steps) : std::nan("");
        if (valid_ptrs.size() >= 2) {
            const auto vs = score_examples(m, valid_ptrs);
            rec.valid_loss = vs.loss;
            rec.valid_mrr = vs.mrr;
        }
        m.history.push_back(rec);
    }
    m.stats = stats;
    return m;
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t checked = 0;
};

/// Compares analytic gradients of the batch loss with central finite
/// differences on every parameter of every encoder.
///
/// Activations are evaluated in double precision: with float activations the
/// rounding noise in a difference quotient is of the same order as the
/// tolerance being checked. The step actually taken is the float-rounded one.
/// The relative error of a coordinate is |analytic - numeric| /
/// max(|analytic|, |numeric|, floor). Gradients accumulate in float, so a
/// coordinate whose contributions cancel to near zero carries absolute error
/// around 1e-10; `floor` keeps such coordinates from dominating.
///
/// ReLU units whose pre-activation lies within `epsilon` of zero make the
/// central difference straddle the kink; callers should pick fixtures with a
/// margin (see relu_margin).
inline GradCheckResult grad_check(const Model& model, const std::vector<Example>& batch, double epsilon,
                                  double floor = 1e-5) {
    std::vector<const Example*> items;
    for (const auto& e : batch) items.push_back(&e);
    ModelGrads analytic(model);
    batch_step<double>(model, items, &analytic);

    GradCheckResult r;
    Model probe = model;
    auto check_encoder = [&](EncoderParams Model::*enc, const EncoderParams& grads, const char* prefix) {
        auto& params = probe.*enc;
        for (std::size_t b = 0; b < params.blocks.size(); ++b) {
            auto& data = params.blocks[b].second.data;
            const auto& g = grads.blocks[b].second.data;
            for (std::size_t i = 0; i < data.size(); ++i) {
                const float saved = data[i];
                const float hi = static_cast<float>(saved + epsilon);
                const float lo = static_cast<float>(saved - epsilon);
                data[i] = hi;
                const double up = batch_step<double>(probe, items, nullptr);
                data[i] = lo;
                const double down = batch_step<double>(probe, items, nullptr);
                data[i] = saved;
                const double numeric = (up - down) / (static_cast<double>(hi) - static_cast<double>(lo));
                const double a = g[i];
                const double denom = std::max({std::abs(a), std::abs(numeric), floor});
                const double rel = std::abs(a - numeric) / denom;
                ++r.checked;
                if (rel > r.max_relative_error) {
                    r.max_relative_error = rel;
                    r.worst_parameter = std::string(prefix) + "." + params.blocks[b].first + "[" + std::to_string(i) + "]";
                }
            }
        }
    };
    check_encoder(&Model::code_encoder, analytic.code, "code");
    if (is_multimodal(model.mode)) check_encoder(&Model::tree_encoder, analytic.tree, "tree");
    check_encoder(&Model::query_encoder, analytic.query, "query");
    return r;
}

/// Smallest |pre-activation| of any feed-forward ReLU unit over the batch;
/// +inf when no encoder has ReLU units.
inline double relu_margin(const Model& model, const std::vector<Example>& batch) {
    double margin = INFINITY;
    auto scan = [&](const EncoderParams& p, const std::vector<TokenId>& ids) {
        if (p.empty() || p.kind != EncoderKind::selfatt) return;
        EncodeCache<double> c;
        encode<double>(p, ids, &c);
        for (double z : c.z.data) margin = std::min(margin, std::abs(z));
    };
    for (const auto& e : batch) {
        scan(model.code_encoder, e.code);
        if (is_multimodal(model.mode)) scan(model.tree_encoder, e.tree);
        scan(model.query_encoder, e.query);
    }
    return margin;
}

// ---------------------------------------------------------------------------
// Checkpoint file:
//   "SSTCKPT\0" | u32 version | u64 header length | header JSON |
//   u32 block count | blocks
// block: u32 name length | name | u32 ndim (2) | u64 rows | u64 cols | f32 LE data, row-major

namespace detail {

inline constexpr std::string_view kCheckpointMagic{"SSTCKPT\0", 8};

inline nlohmann::json encoder_header(const EncoderParams& p) {
    if (p.empty()) return nullptr;
    return nlohmann::json{{"kind", to_string(p.kind)}, {"dim", p.dim}, {"max_len", p.max_len}, {"heads", p.heads}};
}

inline nlohmann::json nan_to_null(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }

inline double null_to_nan(const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace detail

inline std::string serialize_checkpoint(const Model& m) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : m.history) {
        history.push_back({{"epoch", h.epoch},
                           {"train_loss", detail::nan_to_null(h.train_loss)},
                           {"valid_loss", detail::nan_to_null(h.valid_loss)},
                           {"valid_mrr", detail::nan_to_null(h.valid_mrr)}});
    }
    const nlohmann::json header{
        {"version", Model::kVersion},
        {"mode", to_string(m.mode)},
        {"config", to_json(m.config)},
        {"sampler", to_json(m.sampler)},
        {"rules", rules_to_json(m.rules)},
        {"vocabularies", {{"code", m.code_vocab.tokens()}, {"tree", m.tree_vocab.tokens()}, {"query", m.query_vocab.tokens()}}},
        {"encoders",
         {{"code", detail::encoder_header(m.code_encoder)},
          {"tree", detail::encoder_header(m.tree_encoder)},
          {"query", detail::encoder_header(m.query_encoder)}}},
        {"history", history},
        {"stats", {{"skipped", m.stats.skipped}, {"truncated", m.stats.truncated}}},
    };
    const std::string header_text = header.dump();

    std::string out(detail::kCheckpointMagic);
    le::put_u32(out, Model::kVersion);
    le::put_u64(out, header_text.size());
    out += header_text;

    std::vector<std::pair<std::string, const Matrix*>> blocks;
    for (const auto& [prefix, enc] : {std::pair<const char*, const EncoderParams*>{"code", &m.code_encoder},
                                      {"tree", &m.tree_encoder},
                                      {"query", &m.query_encoder}}) {
        for (const auto& [name, mat] : enc->blocks) blocks.emplace_back(std::string(prefix) + "." + name, &mat);
    }
    le::put_u32(out, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& [name, mat] : blocks) {
        le::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        le::put_u32(out, 2);
        le::put_u64(out, mat->rows);
        le::put_u64(out, mat->cols);
        for (float x : mat->data) le::put_f32(out, x);
    }
    return out;
}

inline Model parse_checkpoint(std::string_view bytes) {
    le::Reader in(bytes, "checkpoint");
    if (in.bytes(8) != detail::kCheckpointMagic) throw DataError("checkpoint: bad magic");
    const auto version = in.u32();
    if (version != Model::kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
    const auto header_len = in.u64();
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(in.bytes(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: malformed header (") + e.what() + ")");
    }

    Model m;
    try {
        const auto mode = parse_mode(h.at("mode").get<std::string>());
        if (!mode) throw DataError("checkpoint: unknown mode");
        m.mode = *mode;
        const auto& c = h.at("config");
        m.config.batch_size = c.at("batch_size").get<std::size_t>();
        m.config.embedding_dim = c.at("embedding_dim").get<std::size_t>();
        m.config.learning_rate = c.at("learning_rate").get<double>();
        m.config.epochs = c.at("epochs").get<std::size_t>();
        m.config.seed = c.at("seed").get<std::uint64_t>();
        m.config.max_seq_len = c.at("max_seq_len").get<std::size_t>();
        const auto kind = parse_encoder_kind(c.at("encoder").get<std::string>());
        if (!kind) throw DataError("checkpoint: unknown encoder kind");
        m.config.encoder = *kind;
        m.config.vocab_size = c.at("vocab_size").get<std::size_t>();
        m.config.min_count = c.at("min_count").get<std::size_t>();
        const auto& s = h.at("sampler");
        m.sampler.n_paths = s.at("n_paths").get<std::size_t>();
        m.sampler.length_threshold = s.at("length_threshold").get<std::size_t>();
        m.sampler.width_threshold = s.at("width_threshold").get<std::size_t>();
        m.sampler.seed = s.at("seed").get<std::uint64_t>();
        m.rules = rules_from_json(h.at("rules"));
        const auto& v = h.at("vocabularies");
        m.code_vocab = Vocabulary::from_tokens(v.at("code").get<std::vector<std::string>>());
        m.tree_vocab = Vocabulary::from_tokens(v.at("tree").get<std::vector<std::string>>());
        m.query_vocab = Vocabulary::from_tokens(v.at("query").get<std::vector<std::string>>());
        for (const auto& e : h.at("history")) {
            EpochRecord r;
            r.epoch = e.at("epoch").get<std::size_t>();
            r.train_loss = detail::null_to_nan(e.at("train_loss"));
            r.valid_loss = detail::null_to_nan(e.at("valid_loss"));
            r.valid_mrr = detail::null_to_nan(e.at("valid_mrr"));
            m.history.push_back(r);
        }
        m.stats.skipped = h.at("stats").at("skipped").get<std::size_t>();
        m.stats.truncated = h.at("stats").at("truncated").get<std::size_t>();

        auto setup = [&](const char* name, EncoderParams& enc) {
            const auto& e = h.at("encoders").at(name);
            if (e.is_null()) return;
            const auto k = parse_encoder_kind(e.at("kind").get<std::string>());
            if (!k) throw DataError("checkpoint: unknown encoder kind");
            enc.kind = *k;
            enc.dim = e.at("dim").get<std::size_t>();
            enc.max_len = e.at("max_len").get<std::size_t>();
            enc.heads = e.at("heads").get<std::size_t>();
        };
        setup("code", m.code_encoder);
        setup("tree", m.tree_encoder);
        setup("query", m.query_encoder);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: invalid header (") + e.what() + ")");
    }

    const auto n_blocks = in.u32();
    for (std::uint32_t b = 0; b < n_blocks; ++b) {
        const auto name_len = in.u32();
        const std::string name(in.bytes(name_len));
        if (in.u32() != 2) throw DataError("checkpoint: block " + name + " is not 2-dimensional");
        const auto rows = in.u64();
        const auto cols = in.u64();
        const auto dot = name.find('.');
        if (dot == std::string::npos) throw DataError("checkpoint: bad block name " + name);
        const auto prefix = name.substr(0, dot);
        EncoderParams* enc = prefix == "code" ? &m.code_encoder
                             : prefix == "tree" ? &m.tree_encoder
                             : prefix == "query" ? &m.query_encoder
                                                 : nullptr;
        if (!enc) throw DataError("checkpoint: bad block name " + name);
        if (rows * cols > bytes.size()) throw DataError("checkpoint: block " + name + " larger than file");
        Matrix mat(rows, cols);
        for (auto& x : mat.data) x = in.f32();
        enc->blocks.emplace_back(name.substr(dot + 1), std::move(mat));
    }
    if (!in.at_end()) throw DataError("checkpoint: trailing bytes");

    // Shape validation against vocabularies and encoder settings.
    auto validate = [&](const char* name, const EncoderParams& enc, const Vocabulary& vocab, bool required) {
        if (enc.empty()) {
            if (required) throw DataError(std::string("checkpoint: missing ") + name + " encoder");
            return;
        }
        const std::vector<std::string> expected =
            enc.kind == EncoderKind::nbow
                ? std::vector<std::string>{"embedding"}
                : std::vector<std::string>{"embedding", "position", "wq", "wk", "wv", "wo", "w1", "b1", "w2", "b2"};
        if (enc.blocks.size() != expected.size()) throw DataError(std::string("checkpoint: wrong block set for ") + name);
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (enc.blocks[i].first != expected[i]) throw DataError(std::string("checkpoint: wrong block order for ") + name);
        }
        const std::size_t d = enc.dim;
        const std::size_t ff = 2 * d;
        auto shape = [&](const char* block, std::size_t r, std::size_t c) {
            const auto& mat = enc.get(block);
            if (mat.rows != r || mat.cols != c) {
                throw DataError(std::string("checkpoint: ") + name + "." + block + " has shape " +
                                std::to_string(mat.rows) + "x" + std::to_string(mat.cols) + ", expected " +
                                std::to_string(r) + "x" + std::to_string(c));
            }
            if (!linalg::all_finite(mat.data)) throw DataError(std::string("checkpoint: non-finite values in ") + name);
        };
        if (d != m.config.embedding_dim) throw DataError(std::string("checkpoint: ") + name + " dimension mismatch");
        shape("embedding", vocab.size(), d);
        if (enc.kind == EncoderKind::selfatt) {
            if (enc.heads == 0 || d % enc.heads != 0) throw DataError("checkpoint: bad head count");
            shape("position", enc.max_len, d);
            shape("wq", d, d);
            shape("wk", d, d);
            shape("wv", d, d);
            shape("wo", d, d);
            shape("w1", d, ff);
            shape("b1", 1, ff);
            shape("w2", ff, d);
            shape("b2", 1, d);
        }
    };
    validate("code", m.code_encoder, m.code_vocab, true);
    validate("tree", m.tree_encoder, m.tree_vocab, is_multimodal(m.mode));
    validate("query", m.query_encoder, m.query_vocab, true);
    return m;
}

inline void save_checkpoint(const std::string& path, const Model& m) { write_file(path, serialize_checkpoint(m)); }

inline Model load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

}  // namespace sstsearch
