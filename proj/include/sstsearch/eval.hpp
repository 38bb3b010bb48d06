#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sstsearch/common.hpp"
#include "sstsearch/corpus.hpp"
#include "sstsearch/coverage.hpp"
#include "sstsearch/metrics.hpp"
#include "sstsearch/model.hpp"
#include "sstsearch/representation.hpp"

namespace sstsearch {

/// Scores of one trained mode on one split.
struct ModeResult {
    Mode mode = Mode::uni_code;
    double mrr = 0.0;
    std::optional<double> ndcg;
    double link_coverage = 0.0;
    double node_coverage = 0.0;
    std::size_t distractors = 0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
};

inline constexpr const char* kNdcgVariant = "gain 2^rel-1, discount log2(pos+1), binary in-batch relevance";

/// Relevances in ranked order for query i of a batch whose cosine scores are
/// laid out as scores(code j, query i): 1 for the paired code, 0 otherwise.
/// Ties rank the paired code first, as in target_rank.
inline std::vector<double> ranked_relevance(const Matrix& scores, std::size_t i) {
    std::vector<double> rel(scores.rows, 0.0);
    rel[target_rank(scores, i) - 1] = 1.0;
    return rel;
}

/// Batched MRR and NDCG over the pairs at `indices`, in corpus order, plus
/// the mean coverage of the mode's code-side representation.
inline ModeResult evaluate_split(const Model& model, const std::vector<CodeQueryPair>& pairs,
                                 const std::vector<std::size_t>& indices) {
    ModeResult r;
    r.mode = model.mode;
    std::vector<std::size_t> kept;
    const auto features =
        collect_features(pairs, indices, model.mode, model.rules, model.sampler, r.skipped, &kept);
    if (features.size() < 2) throw DataError("eval: fewer than 2 usable pairs in the evaluation split");
    std::vector<Example> examples;
    for (const auto& f : features) examples.push_back(make_example(model, f));
    std::vector<const Example*> ptrs;
    for (const auto& e : examples) ptrs.push_back(&e);

    const auto s = score_examples(model, ptrs);
    r.mrr = s.mrr;
    r.distractors = s.distractors;
    r.evaluated = examples.size();
    std::vector<std::vector<double>> rankings;
    for (const auto& batch : s.cosine) {
        for (std::size_t i = 0; i < batch.cols; ++i) rankings.push_back(ranked_relevance(batch, i));
    }
    r.ndcg = ndcg(rankings);

    std::vector<CoverageReport> reports;
    for (auto i : kept) reports.push_back(mode_coverage(pairs[i], model.mode, model.rules, model.sampler));
    const auto agg = corpus_coverage(reports);
    r.link_coverage = agg.link_coverage;
    r.node_coverage = agg.node_coverage;
    return r;
}

struct ReportRow {
    ModeResult result;
    double change_ratio = 0.0;
    bool best = false;
};

struct EvalReport {
    std::vector<ReportRow> rows;
    std::string ndcg_variant = kNdcgVariant;
};

/// Builds the comparison table: change ratio of each mode's MRR against
/// uni-code, with the highest MRR flagged (all tied maxima are flagged).
inline EvalReport compare(const std::vector<ModeResult>& results) {
    const ModeResult* base = nullptr;
    for (const auto& r : results) {
        if (r.mode == Mode::uni_code) base = &r;
    }
    if (!base) throw PreconditionError("compare: the uni-code baseline is missing");
    EvalReport rep;
    double best = -INFINITY;
    for (const auto& r : results) best = std::max(best, r.mrr);
    for (const auto& r : results) rep.rows.push_back({r, change_ratio(r.mrr, base->mrr), r.mrr == best});
    return rep;
}

inline nlohmann::json to_json(const EvalReport& rep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : rep.rows) {
        const auto& r = row.result;
        rows.push_back({{"mode", to_string(r.mode)},
                        {"mrr", r.mrr},
                        {"ndcg", r.ndcg ? nlohmann::json(*r.ndcg) : nlohmann::json(nullptr)},
                        {"link_coverage", r.link_coverage},
                        {"node_coverage", r.node_coverage},
                        {"change_ratio", row.change_ratio},
                        {"distractors", r.distractors},
                        {"best", row.best}});
    }
    return {{"ndcg_variant", rep.ndcg_variant}, {"results", rows}};
}

namespace detail {

inline std::string fixed(double x, int places) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", places, x);
    return buf;
}

inline std::string percent(double ratio) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.2f%%", ratio * 100.0);
    return buf;
}

inline std::string pad(std::string s, std::size_t width, bool left = false) {
    if (s.size() >= width) return s;
    const std::string fill(width - s.size(), ' ');
    return left ? s + fill : fill + s;
}

}  // namespace detail

/// Aligned plain-text table; the best MRR is marked with '*'.
inline std::string format_table(const EvalReport& rep) {
    std::string out = detail::pad("mode", 16, true) + detail::pad("MRR", 9) + detail::pad("NDCG", 9) +
                      detail::pad("change", 10) + detail::pad("link", 9) + detail::pad("node", 9) +
                      detail::pad("distr.", 8) + "\n";
    for (const auto& row : rep.rows) {
        const auto& r = row.result;
        out += detail::pad(to_string(r.mode), 16, true);
        out += detail::pad(detail::fixed(r.mrr, 4) + (row.best ? "*" : " "), 9);
        out += detail::pad(r.ndcg ? detail::fixed(*r.ndcg, 4) : "-", 9);
        out += detail::pad(detail::percent(row.change_ratio), 10);
        out += detail::pad(detail::fixed(r.link_coverage * 100.0, 2) + "%", 9);
        out += detail::pad(detail::fixed(r.node_coverage * 100.0, 2) + "%", 9);
        out += detail::pad(std::to_string(r.distractors), 8);
        out += "\n";
    }
    out += "NDCG: " + rep.ndcg_variant + "\n";
    return out;
}

}  // namespace sstsearch
