#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sstsearch/common.hpp"
#include "sstsearch/tree.hpp"

namespace sstsearch {

enum class Method { rootpath, leafpath, sbt, lcrs };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::rootpath: return "rootpath";
        case Method::leafpath: return "leafpath";
        case Method::sbt: return "sbt";
        case Method::lcrs: return "lcrs";
    }
    return "sbt";
}

inline std::optional<Method> parse_method(std::string_view s) {
    if (s == "rootpath") return Method::rootpath;
    if (s == "leafpath") return Method::leafpath;
    if (s == "sbt") return Method::sbt;
    if (s == "lcrs") return Method::lcrs;
    return std::nullopt;
}

/// The tree links and labels a representation actually carries.
struct CoverageFootprint {
    std::string tree_id;
    std::set<Link> covered_links;
    std::set<std::string> covered_labels;

    void merge(const CoverageFootprint& other) {
        covered_links.insert(other.covered_links.begin(), other.covered_links.end());
        covered_labels.insert(other.covered_labels.begin(), other.covered_labels.end());
    }
};

struct SerializedSeq {
    std::vector<std::string> tokens;
    CoverageFootprint footprint;
    Method method = Method::sbt;
};

struct SamplerConfig {
    std::size_t n_paths = 20;
    std::size_t length_threshold = 8;
    std::size_t width_threshold = 2;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_paths < 1) throw PreconditionError("SamplerConfig: n_paths must be >= 1");
        if (length_threshold < 1 || width_threshold < 1) {
            throw PreconditionError("SamplerConfig: thresholds must be >= 1");
        }
    }
};

/// Raised by the deserializers; `index` is the offending token position.
class SequenceError : public DataError {
public:
    SequenceError(std::size_t index, const std::string& what)
        : DataError("token " + std::to_string(index) + ": " + what), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

namespace detail {

inline bool single_char_terminal(const Tree& t, NodeId n) {
    const auto& node = t.node(n);
    return node.kind == NodeKind::terminal && node.label.size() == 1;
}

/// Takes up to `n` items, all of `preferred` first, topping up from `fallback`
/// when `preferred` runs short. Sampling is uniform without replacement.
template <typename T>
std::vector<T> sample_with_priority(const std::vector<T>& preferred, const std::vector<T>& fallback, std::size_t n,
                                    Rng& rng) {
    std::vector<T> out;
    if (preferred.size() >= n) {
        for (auto i : rng.sample_indices(preferred.size(), n)) out.push_back(preferred[i]);
    } else {
        out = preferred;
        for (auto i : rng.sample_indices(fallback.size(), n - preferred.size())) out.push_back(fallback[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// One path per leaf: the leaf label, then each ancestor label up to and
/// including the root. Single-character terminal leaves are used only when
/// there are fewer than `n_paths` other leaves.
inline std::vector<SerializedSeq> root_paths(const Tree& tree, const SamplerConfig& cfg) {
    cfg.validate();
    std::vector<NodeId> multi, single;
    for (NodeId leaf : tree.leaves()) {
        (detail::single_char_terminal(tree, leaf) ? single : multi).push_back(leaf);
    }
    Rng rng(cfg.seed);
    const auto chosen = detail::sample_with_priority(multi, single, cfg.n_paths, rng);

    std::vector<SerializedSeq> out;
    out.reserve(chosen.size());
    for (NodeId leaf : chosen) {
        SerializedSeq seq;
        seq.method = Method::rootpath;
        seq.footprint.tree_id = tree.id();
        NodeId n = leaf;
        seq.tokens.push_back(tree.node(n).label);
        seq.footprint.covered_labels.insert(tree.node(n).label);
        while (tree.node(n).parent != kNoParent) {
            const NodeId p = tree.node(n).parent;
            seq.tokens.push_back(tree.node(p).label);
            seq.footprint.covered_labels.insert(tree.node(p).label);
            seq.footprint.covered_links.emplace(p, n);
            n = p;
        }
        out.push_back(std::move(seq));
    }
    return out;
}

/// Path between a pair of leaves through their lowest common ancestor:
/// start leaf, the ancestors up to the LCA, the descendants down to the end
/// leaf. A candidate is discarded when it has more than `length_threshold`
/// tokens, or when the heights of its two legs differ by less than
/// `width_threshold`. Pairs of multi-character terminals are sampled first.
inline std::vector<SerializedSeq> leaf_paths(const Tree& tree, const SamplerConfig& cfg) {
    cfg.validate();
    const auto leaves = tree.leaves();
    std::vector<std::size_t> depth(tree.size(), 0);
    for (NodeId n = 1; n < tree.size(); ++n) depth[n] = depth[tree.node(n).parent] + 1;

    using Pair = std::pair<NodeId, NodeId>;
    std::vector<Pair> preferred, fallback;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        for (std::size_t j = i + 1; j < leaves.size(); ++j) {
            NodeId a = leaves[i], b = leaves[j];
            const std::size_t da = depth[a], db = depth[b];
            const std::size_t gap = da > db ? da - db : db - da;
            // Token count is at least gap + 3 (two leaves plus the LCA).
            if (gap + 3 > cfg.length_threshold) continue;
            while (depth[a] > depth[b]) a = tree.node(a).parent;
            while (depth[b] > depth[a]) b = tree.node(b).parent;
            while (a != b) {
                a = tree.node(a).parent;
                b = tree.node(b).parent;
            }
            const std::size_t up = da - depth[a];
            const std::size_t down = db - depth[a];
            if (up + down + 1 > cfg.length_threshold) continue;
            if ((up > down ? up - down : down - up) < cfg.width_threshold) continue;
            const bool both_multi = !detail::single_char_terminal(tree, leaves[i]) &&
                                    tree.node(leaves[i]).kind == NodeKind::terminal &&
                                    !detail::single_char_terminal(tree, leaves[j]) &&
                                    tree.node(leaves[j]).kind == NodeKind::terminal;
            (both_multi ? preferred : fallback).emplace_back(leaves[i], leaves[j]);
        }
    }

    Rng rng(cfg.seed);
    const auto chosen = detail::sample_with_priority(preferred, fallback, cfg.n_paths, rng);

    std::vector<SerializedSeq> out;
    out.reserve(chosen.size());
    for (const auto& [start, end] : chosen) {
        SerializedSeq seq;
        seq.method = Method::leafpath;
        seq.footprint.tree_id = tree.id();
        std::vector<NodeId> down_leg;
        NodeId a = start, b = end;
        std::vector<NodeId> up_leg{a};
        while (depth[b] > depth[a]) {
            down_leg.push_back(b);
            b = tree.node(b).parent;
        }
        while (depth[a] > depth[b]) {
            a = tree.node(a).parent;
            up_leg.push_back(a);
        }
        while (a != b) {
            down_leg.push_back(b);
            a = tree.node(a).parent;
            b = tree.node(b).parent;
            up_leg.push_back(a);
        }
        std::vector<NodeId> path = up_leg;
        path.insert(path.end(), down_leg.rbegin(), down_leg.rend());
        for (std::size_t k = 0; k < path.size(); ++k) {
            const auto& label = tree.node(path[k]).label;
            seq.tokens.push_back(label);
            seq.footprint.covered_labels.insert(label);
            if (k > 0) {
                const NodeId x = path[k - 1], y = path[k];
                if (tree.node(x).parent == y) {
                    seq.footprint.covered_links.emplace(y, x);
                } else {
                    seq.footprint.covered_links.emplace(x, y);
                }
            }
        }
        out.push_back(std::move(seq));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structure-based traversal: SBT(n) = "(" SBT(c1) ... SBT(ck) ")" label(n)

inline SerializedSeq sbt_serialize(const Tree& tree) {
    SerializedSeq seq;
    seq.method = Method::sbt;
    seq.footprint.tree_id = tree.id();
    seq.tokens.reserve(tree.size() * 3);
    // Explicit stack: (node, next child index).
    std::vector<std::pair<NodeId, std::size_t>> stack{{tree.root(), 0}};
    seq.tokens.emplace_back("(");
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        const auto& node = tree.node(n);
        if (next < node.children.size()) {
            const NodeId c = node.children[next++];
            seq.footprint.covered_links.emplace(n, c);
            seq.tokens.emplace_back("(");
            stack.emplace_back(c, 0);
            continue;
        }
        seq.tokens.emplace_back(")");
        seq.tokens.push_back(node.label);
        seq.footprint.covered_labels.insert(node.label);
        stack.pop_back();
    }
    return seq;
}

namespace detail {

/// Intermediate nested form used when rebuilding a tree from tokens.
struct ParsedNode {
    std::string label;
    std::vector<std::size_t> children;
};

inline Tree build_parsed(const std::vector<ParsedNode>& nodes, std::size_t root) {
    TreeBuilder b;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    b.open(nodes[root].label, nodes[root].children.empty() ? NodeKind::terminal : NodeKind::nonterminal);
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < nodes[n].children.size()) {
            const auto c = nodes[n].children[next++];
            b.open(nodes[c].label, nodes[c].children.empty() ? NodeKind::terminal : NodeKind::nonterminal);
            stack.emplace_back(c, 0);
        } else {
            b.close();
            stack.pop_back();
        }
    }
    return b.finish();
}

}  // namespace detail

/// Inverse of sbt_serialize. Childless nodes come back as terminals.
inline Tree sbt_deserialize(const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw SequenceError(0, "empty sequence");
    if (tokens[0] != "(") throw SequenceError(0, "expected \"(\"");
    std::vector<detail::ParsedNode> nodes;
    std::vector<std::vector<std::size_t>> open{{}};
    std::size_t i = 1;
    while (true) {
        if (i >= tokens.size()) throw SequenceError(i, "unbalanced brackets: unexpected end of sequence");
        if (tokens[i] == "(") {
            open.emplace_back();
            ++i;
            continue;
        }
        if (tokens[i] != ")") throw SequenceError(i, "expected \"(\" or \")\", found \"" + tokens[i] + "\"");
        if (i + 1 >= tokens.size()) throw SequenceError(i + 1, "missing label after \")\"");
        nodes.push_back(detail::ParsedNode{tokens[i + 1], std::move(open.back())});
        open.pop_back();
        i += 2;
        if (open.empty()) break;
        open.back().push_back(nodes.size() - 1);
    }
    if (i != tokens.size()) throw SequenceError(i, "trailing tokens after the root");
    return detail::build_parsed(nodes, nodes.size() - 1);
}

// ---------------------------------------------------------------------------
// Left-child right-sibling

/// Binary form of a tree. Node i corresponds to node i of the source tree.
struct BinaryTree {
    struct BNode {
        std::string label;
        std::optional<std::size_t> left;
        std::optional<std::size_t> right;
    };
    std::vector<BNode> nodes;
    std::size_t root = 0;
};

inline BinaryTree lcrs_transform(const Tree& tree) {
    BinaryTree bt;
    bt.nodes.resize(tree.size());
    for (NodeId n = 0; n < tree.size(); ++n) {
        const auto& node = tree.node(n);
        bt.nodes[n].label = node.label;
        if (!node.children.empty()) bt.nodes[n].left = node.children.front();
        for (std::size_t k = 0; k + 1 < node.children.size(); ++k) {
            bt.nodes[node.children[k]].right = node.children[k + 1];
        }
    }
    bt.root = tree.root();
    return bt;
}

namespace detail {

inline void lcrs_emit(const BinaryTree& bt, std::size_t n, std::vector<std::string>& out) {
    const auto& node = bt.nodes[n];
    out.emplace_back("(");
    if (node.left) lcrs_emit(bt, *node.left, out);
    out.emplace_back(")");
    out.push_back(node.label);
    out.emplace_back("(");
    if (node.right) lcrs_emit(bt, *node.right, out);
    out.emplace_back(")");
}

}  // namespace detail

/// In-order walk of the LCRS form: "(" left ")" label "(" right ")". Empty
/// subtrees still emit their brackets. The footprint holds only the
/// parent-to-first-child links, which are the ones the binary form keeps.
inline SerializedSeq lcrs_serialize(const Tree& tree) {
    const auto bt = lcrs_transform(tree);
    SerializedSeq seq;
    seq.method = Method::lcrs;
    seq.footprint.tree_id = tree.id();
    seq.tokens.reserve(tree.size() * 5);
    detail::lcrs_emit(bt, bt.root, seq.tokens);
    for (NodeId n = 0; n < tree.size(); ++n) {
        const auto& node = tree.node(n);
        seq.footprint.covered_labels.insert(node.label);
        if (!node.children.empty()) seq.footprint.covered_links.emplace(n, node.children.front());
    }
    return seq;
}

namespace detail {

class LcrsReader {
public:
    explicit LcrsReader(const std::vector<std::string>& tokens) : tokens_(tokens) {}

    BinaryTree read() {
        BinaryTree bt;
        bt.root = node(bt);
        if (pos_ != tokens_.size()) throw SequenceError(pos_, "trailing tokens after the root");
        if (bt.nodes[bt.root].right) throw SequenceError(0, "root has a right sibling");
        return bt;
    }

private:
    void expect(const char* tok) {
        if (pos_ >= tokens_.size()) throw SequenceError(pos_, std::string("expected \"") + tok + "\", found end");
        if (tokens_[pos_] != tok) {
            throw SequenceError(pos_, std::string("expected \"") + tok + "\", found \"" + tokens_[pos_] + "\"");
        }
        ++pos_;
    }

    bool at(const char* tok) const { return pos_ < tokens_.size() && tokens_[pos_] == tok; }

    std::size_t node(BinaryTree& bt) {
        expect("(");
        const std::size_t id = bt.nodes.size();
        bt.nodes.emplace_back();
        if (at("(")) {
            const auto l = node(bt);
            bt.nodes[id].left = l;
        }
        expect(")");
        if (pos_ >= tokens_.size()) throw SequenceError(pos_, "missing label");
        bt.nodes[id].label = tokens_[pos_++];
        expect("(");
        if (at("(")) {
            const auto r = node(bt);
            bt.nodes[id].right = r;
        }
        expect(")");
        return id;
    }

    const std::vector<std::string>& tokens_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Rebuilds a general tree from its LCRS binary form.
inline Tree lcrs_inverse(const BinaryTree& bt) {
    std::vector<detail::ParsedNode> nodes(bt.nodes.size());
    for (std::size_t n = 0; n < bt.nodes.size(); ++n) {
        nodes[n].label = bt.nodes[n].label;
        for (auto c = bt.nodes[n].left; c; c = bt.nodes[*c].right) nodes[n].children.push_back(*c);
    }
    return detail::build_parsed(nodes, bt.root);
}

inline Tree lcrs_deserialize(const std::vector<std::string>& tokens) {
    return lcrs_inverse(detail::LcrsReader(tokens).read());
}

// ---------------------------------------------------------------------------

/// All sequences a method produces for one tree: sampled paths for
/// rootpath/leafpath, a single traversal for sbt/lcrs.
inline std::vector<SerializedSeq> serialize_tree(const Tree& tree, Method method, const SamplerConfig& cfg) {
    switch (method) {
        case Method::rootpath: return root_paths(tree, cfg);
        case Method::leafpath: return leaf_paths(tree, cfg);
        case Method::sbt: return {sbt_serialize(tree)};
        case Method::lcrs: return {lcrs_serialize(tree)};
    }
    return {};
}

/// Concatenates sequences into the single token stream fed to an encoder.
inline std::vector<std::string> flatten_tokens(const std::vector<SerializedSeq>& seqs) {
    std::vector<std::string> out;
    for (const auto& s : seqs) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
    return out;
}

}  // namespace sstsearch
