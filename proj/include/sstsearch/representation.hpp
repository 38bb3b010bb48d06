#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sstsearch/corpus.hpp"
#include "sstsearch/coverage.hpp"
#include "sstsearch/minilang.hpp"
#include "sstsearch/serialize.hpp"
#include "sstsearch/sst.hpp"
#include "sstsearch/tree.hpp"

namespace sstsearch {

/// Training/retrieval setups: Uni-X feeds one code-side encoder with X's
/// sequence; Multi-X sums a token encoder and a tree encoder fed with X.
enum class Mode {
    uni_code,
    uni_rootpath,
    uni_leafpath,
    uni_sbt,
    uni_lcrs,
    multi_rootpath,
    multi_leafpath,
    multi_sbt,
    multi_lcrs,
};

inline constexpr Mode kAllModes[] = {Mode::uni_code,       Mode::uni_rootpath,   Mode::uni_leafpath,
                                     Mode::uni_sbt,        Mode::uni_lcrs,       Mode::multi_rootpath,
                                     Mode::multi_leafpath, Mode::multi_sbt,      Mode::multi_lcrs};

inline bool is_multimodal(Mode m) {
    return m == Mode::multi_rootpath || m == Mode::multi_leafpath || m == Mode::multi_sbt || m == Mode::multi_lcrs;
}

/// The tree serialization a mode consumes; empty for uni-code.
inline std::optional<Method> mode_method(Mode m) {
    switch (m) {
        case Mode::uni_code: return std::nullopt;
        case Mode::uni_rootpath:
        case Mode::multi_rootpath: return Method::rootpath;
        case Mode::uni_leafpath:
        case Mode::multi_leafpath: return Method::leafpath;
        case Mode::uni_sbt:
        case Mode::multi_sbt: return Method::sbt;
        case Mode::uni_lcrs:
        case Mode::multi_lcrs: return Method::lcrs;
    }
    return std::nullopt;
}

inline std::string to_string(Mode m) {
    if (m == Mode::uni_code) return "uni-code";
    return std::string(is_multimodal(m) ? "multi-" : "uni-") + std::string(to_string(*mode_method(m)));
}

inline std::optional<Mode> parse_mode(std::string_view s) {
    for (Mode m : kAllModes) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

/// The pair's AST: its pre-parsed tree if present, otherwise a MiniLang parse
/// of the code. Throws DataError / SyntaxError when neither works.
inline Tree ast_for(const CodeQueryPair& pair) {
    if (pair.ast) return load_ast(*pair.ast, pair.id);
    return parse_minilang(pair.code, pair.id);
}

inline Tree sst_for(const CodeQueryPair& pair, const TransformRuleSet& rules) { return to_sst(ast_for(pair), rules); }

/// Sampler settings for one item: the run seed mixed with a hash of the id,
/// so sampling does not depend on processing order.
inline SamplerConfig item_sampler(const SamplerConfig& base, std::string_view item_id) {
    SamplerConfig cfg = base;
    cfg.seed = item_seed(base.seed, item_id);
    return cfg;
}

/// Token inputs for one pair under a mode.
struct Features {
    std::vector<std::string> code_tokens;  // code-side encoder input
    std::vector<std::string> tree_tokens;  // tree encoder input (multi modes only)
    std::vector<std::string> query_tokens;
};

inline Features extract_features(const CodeQueryPair& pair, Mode mode, const TransformRuleSet& rules,
                                 const SamplerConfig& sampler) {
    Features f;
    f.query_tokens = tokenize_text(pair.query);
    const auto method = mode_method(mode);
    if (!method) {
        f.code_tokens = tokenize_text(pair.code);
        return f;
    }
    const Tree sst = sst_for(pair, rules);
    auto tree_tokens = flatten_tokens(serialize_tree(sst, *method, item_sampler(sampler, pair.id)));
    if (is_multimodal(mode)) {
        f.code_tokens = tokenize_text(pair.code);
        f.tree_tokens = std::move(tree_tokens);
    } else {
        f.code_tokens = std::move(tree_tokens);
    }
    return f;
}

/// Coverage of the representation a mode feeds to the code side, measured
/// on the pair's SST. Uni-code uses the token footprint; Multi-X unions the
/// token footprint with X's.
inline CoverageReport mode_coverage(const CodeQueryPair& pair, Mode mode, const TransformRuleSet& rules,
                                    const SamplerConfig& sampler) {
    const Tree sst = sst_for(pair, rules);
    std::vector<CoverageFootprint> fps;
    const auto method = mode_method(mode);
    if (!method || is_multimodal(mode)) fps.push_back(token_footprint(sst));
    if (method) {
        for (auto& seq : serialize_tree(sst, *method, item_sampler(sampler, pair.id))) {
            fps.push_back(std::move(seq.footprint));
        }
    }
    return coverage(fps, sst);
}

}  // namespace sstsearch
