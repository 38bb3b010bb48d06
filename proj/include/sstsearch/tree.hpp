#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sstsearch/common.hpp"

namespace sstsearch {

using NodeId = std::size_t;
inline constexpr NodeId kNoParent = static_cast<NodeId>(-1);

enum class NodeKind { terminal, nonterminal };

struct Node {
    std::string label;
    NodeKind kind = NodeKind::terminal;
    std::vector<NodeId> children;
    NodeId parent = kNoParent;
};

/// A parent-child adjacency, identified by node ids.
using Link = std::pair<NodeId, NodeId>;

/// Ordered, labeled, rooted tree stored as an arena. Node ids are assigned in
/// pre-order, so the root is always node 0 and every child id is larger than
/// its parent's.
class Tree {
public:
    Tree() = default;

    const std::string& id() const { return id_; }
    void set_id(std::string id) { id_ = std::move(id); }

    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    NodeId root() const { return 0; }
    const Node& node(NodeId n) const { return nodes_.at(n); }
    const std::vector<Node>& nodes() const { return nodes_; }

    bool is_leaf(NodeId n) const { return nodes_[n].children.empty(); }

    std::vector<NodeId> leaves() const {
        std::vector<NodeId> out;
        for (NodeId n = 0; n < nodes_.size(); ++n) {
            if (is_leaf(n)) out.push_back(n);
        }
        return out;
    }

    /// Number of links between n and the root.
    std::size_t depth(NodeId n) const {
        std::size_t d = 0;
        while (nodes_[n].parent != kNoParent) {
            n = nodes_[n].parent;
            ++d;
        }
        return d;
    }

    std::vector<Link> links() const {
        std::vector<Link> out;
        out.reserve(nodes_.empty() ? 0 : nodes_.size() - 1);
        for (NodeId n = 0; n < nodes_.size(); ++n) {
            for (NodeId c : nodes_[n].children) out.emplace_back(n, c);
        }
        return out;
    }

    std::set<std::string> unique_labels() const {
        std::set<std::string> out;
        for (const auto& n : nodes_) out.insert(n.label);
        return out;
    }

    friend bool operator==(const Tree& a, const Tree& b) {
        if (a.nodes_.size() != b.nodes_.size()) return false;
        for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
            const auto& x = a.nodes_[i];
            const auto& y = b.nodes_[i];
            if (x.label != y.label || x.kind != y.kind || x.children != y.children) return false;
        }
        return true;
    }

private:
    friend class TreeBuilder;
    std::string id_;
    std::vector<Node> nodes_;
};

/// Builds a Tree in pre-order. Callers open a node, add its descendants, and
/// close it; leaves are added with `leaf`.
class TreeBuilder {
public:
    NodeId open(std::string label, NodeKind kind = NodeKind::nonterminal) {
        const NodeId id = add(std::move(label), kind);
        stack_.push_back(id);
        return id;
    }

    void close() {
        if (stack_.empty()) throw PreconditionError("TreeBuilder::close without open");
        stack_.pop_back();
    }

    NodeId leaf(std::string label, NodeKind kind = NodeKind::terminal) { return add(std::move(label), kind); }

    Tree finish(std::string id = {}) {
        if (!stack_.empty()) throw PreconditionError("TreeBuilder::finish with open nodes");
        if (tree_.nodes_.empty()) throw PreconditionError("TreeBuilder::finish on empty tree");
        tree_.id_ = std::move(id);
        Tree out = std::move(tree_);
        tree_ = Tree{};
        return out;
    }

private:
    NodeId add(std::string label, NodeKind kind) {
        const NodeId id = tree_.nodes_.size();
        Node node;
        node.label = std::move(label);
        node.kind = kind;
        if (stack_.empty()) {
            if (id != 0) throw PreconditionError("TreeBuilder: second root");
        } else {
            node.parent = stack_.back();
            tree_.nodes_[stack_.back()].children.push_back(id);
        }
        tree_.nodes_.push_back(std::move(node));
        return id;
    }

    Tree tree_;
    std::vector<NodeId> stack_;
};

/// Copies the subtree of `src` rooted at `n` into `b`, keeping only children
/// accepted by `keep`. `relabel` maps each copied label.
template <typename Keep, typename Relabel>
void copy_subtree(const Tree& src, NodeId n, TreeBuilder& b, Keep&& keep, Relabel&& relabel) {
    const Node& node = src.node(n);
    b.open(relabel(node.label), node.kind);
    for (NodeId c : node.children) {
        if (keep(c)) copy_subtree(src, c, b, keep, relabel);
    }
    b.close();
}

struct TreeStats {
    std::size_t node_count = 0;
    std::size_t link_count = 0;
    std::size_t unique_label_count = 0;
    std::size_t leaf_count = 0;
    /// Number of nodes on the longest root-to-leaf path.
    std::size_t height = 0;

    friend bool operator==(const TreeStats&, const TreeStats&) = default;
};

inline TreeStats tree_stats(const Tree& tree) {
    TreeStats s;
    s.node_count = tree.size();
    s.link_count = tree.links().size();
    s.unique_label_count = tree.unique_labels().size();
    std::vector<std::size_t> level(tree.size(), 1);
    for (NodeId n = 0; n < tree.size(); ++n) {
        const auto& node = tree.node(n);
        if (node.children.empty()) ++s.leaf_count;
        if (node.parent != kNoParent) level[n] = level[node.parent] + 1;
        s.height = std::max(s.height, level[n]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// JSON tree objects: {"label": str, "kind": "terminal"|"nonterminal", "children": [...]}

namespace detail {

inline void load_node(const nlohmann::json& obj, const std::string& path, TreeBuilder& b) {
    if (!obj.is_object()) throw DataError(path + ": expected a tree object");
    const auto label_it = obj.find("label");
    if (label_it == obj.end() || !label_it->is_string()) throw DataError(path + ".label: expected a string");
    auto label = label_it->get<std::string>();
    if (label.empty()) throw DataError(path + ".label: must be non-empty");

    const auto kind_it = obj.find("kind");
    if (kind_it == obj.end() || !kind_it->is_string()) throw DataError(path + ".kind: expected a string");
    const auto kind_text = kind_it->get<std::string>();
    NodeKind kind;
    if (kind_text == "terminal") {
        kind = NodeKind::terminal;
    } else if (kind_text == "nonterminal") {
        kind = NodeKind::nonterminal;
    } else {
        throw DataError(path + ".kind: expected \"terminal\" or \"nonterminal\", got \"" + kind_text + "\"");
    }

    const nlohmann::json* children = nullptr;
    if (auto it = obj.find("children"); it != obj.end()) {
        if (!it->is_array()) throw DataError(path + ".children: expected an array");
        children = &*it;
    }
    const bool has_children = children != nullptr && !children->empty();
    if (kind == NodeKind::terminal && has_children) {
        throw DataError(path + ".children: terminal node must not have children");
    }

    b.open(std::move(label), kind);
    if (has_children) {
        for (std::size_t i = 0; i < children->size(); ++i) {
            load_node((*children)[i], path + ".children[" + std::to_string(i) + "]", b);
        }
    }
    b.close();
}

inline nlohmann::json dump_node(const Tree& tree, NodeId n) {
    const auto& node = tree.node(n);
    nlohmann::json children = nlohmann::json::array();
    for (NodeId c : node.children) children.push_back(dump_node(tree, c));
    return nlohmann::json{{"label", node.label},
                          {"kind", node.kind == NodeKind::terminal ? "terminal" : "nonterminal"},
                          {"children", std::move(children)}};
}

}  // namespace detail

/// Loads a tree object. Node ids follow pre-order. Errors carry a JSON path
/// such as `$.children[1].label`.
inline Tree load_ast(const nlohmann::json& obj, std::string tree_id = {}) {
    TreeBuilder b;
    detail::load_node(obj, "$", b);
    return b.finish(std::move(tree_id));
}

inline nlohmann::json tree_to_json(const Tree& tree) { return detail::dump_node(tree, tree.root()); }

}  // namespace sstsearch
