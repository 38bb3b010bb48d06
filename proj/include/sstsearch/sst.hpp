#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sstsearch/common.hpp"
#include "sstsearch/tree.hpp"

namespace sstsearch {

/// Exact label, or a suffix family written with a leading '*' ("*_Stmt").
class LabelMatcher {
public:
    LabelMatcher() = default;
    explicit LabelMatcher(std::string pattern) : pattern_(std::move(pattern)) {
        if (pattern_.empty() || pattern_ == "*") throw DataError("label matcher must be non-empty: \"" + pattern_ + "\"");
    }

    bool is_wildcard() const { return pattern_.front() == '*'; }
    const std::string& pattern() const { return pattern_; }

    bool matches(std::string_view label) const {
        if (!is_wildcard()) return label == pattern_;
        const std::string_view suffix = std::string_view(pattern_).substr(1);
        return label.size() >= suffix.size() && label.substr(label.size() - suffix.size()) == suffix;
    }

    friend bool operator==(const LabelMatcher&, const LabelMatcher&) = default;

private:
    std::string pattern_;
};

/// Label → replacement lookup. Exact keys win; among wildcard keys the longest
/// suffix wins.
class LabelMap {
public:
    void add(const std::string& key, std::string target) {
        if (target.empty()) throw DataError("rule target for \"" + key + "\" must be non-empty");
        LabelMatcher m(key);
        for (auto& [existing, _] : entries_) {
            if (existing == m) throw DataError("duplicate rule key \"" + key + "\"");
        }
        entries_.emplace_back(std::move(m), std::move(target));
    }

    std::optional<std::string> lookup(std::string_view label) const {
        const std::pair<LabelMatcher, std::string>* best = nullptr;
        for (const auto& e : entries_) {
            if (!e.first.matches(label)) continue;
            if (!e.first.is_wildcard()) return e.second;
            if (best == nullptr || e.first.pattern().size() > best->first.pattern().size()) best = &e;
        }
        if (best != nullptr) return best->second;
        return std::nullopt;
    }

    bool covers(std::string_view label) const { return lookup(label).has_value(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<std::pair<LabelMatcher, std::string>>& entries() const { return entries_; }

private:
    std::vector<std::pair<LabelMatcher, std::string>> entries_;
};

/// Rules mapping an AST to a Simplified Semantic Tree: prune, then relabel,
/// then unify.
struct TransformRuleSet {
    std::vector<LabelMatcher> prune;
    LabelMap relabel;
    LabelMap unify;

    bool prunes(std::string_view label) const {
        for (const auto& m : prune) {
            if (m.matches(label)) return true;
        }
        return false;
    }

    bool is_identity() const { return prune.empty() && relabel.empty() && unify.empty(); }

    /// Rejects rule sets whose output could still contain a rule's own
    /// domain, which would make the transform non-idempotent.
    void validate() const {
        for (const auto& [key, target] : relabel.entries()) {
            if (prunes(target)) throw DataError("relabel target \"" + target + "\" is pruned");
            if (relabel.covers(target)) throw DataError("relabel target \"" + target + "\" is itself relabeled");
            if (auto u = unify.lookup(target)) {
                if (prunes(*u) || relabel.covers(*u) || unify.covers(*u)) {
                    throw DataError("relabel target \"" + target + "\" unifies to a rule-covered label");
                }
            }
        }
        for (const auto& [key, target] : unify.entries()) {
            if (prunes(target)) throw DataError("unify target \"" + target + "\" is pruned");
            if (relabel.covers(target)) throw DataError("unify target \"" + target + "\" is relabeled");
            if (unify.covers(target)) throw DataError("unify target \"" + target + "\" is itself unified");
        }
    }

    std::string map_label(const std::string& label) const {
        std::string out = label;
        if (auto r = relabel.lookup(out)) out = *r;
        if (auto u = unify.lookup(out)) out = *u;
        return out;
    }
};

inline TransformRuleSet rules_from_json(const nlohmann::json& obj) {
    TransformRuleSet rules;
    if (obj.is_null()) return rules;
    if (!obj.is_object()) throw DataError("rule file: expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (key == "prune") {
            if (!value.is_array()) throw DataError("rule file: \"prune\" must be an array");
            for (const auto& v : value) {
                if (!v.is_string()) throw DataError("rule file: \"prune\" entries must be strings");
                rules.prune.emplace_back(v.get<std::string>());
            }
        } else if (key == "relabel" || key == "unify") {
            if (!value.is_object()) throw DataError("rule file: \"" + key + "\" must be an object");
            auto& map = key == "relabel" ? rules.relabel : rules.unify;
            for (const auto& [from, to] : value.items()) {
                if (!to.is_string()) throw DataError("rule file: \"" + key + "\"." + from + " must be a string");
                map.add(from, to.get<std::string>());
            }
        } else {
            throw DataError("rule file: unknown key \"" + key + "\"");
        }
    }
    rules.validate();
    return rules;
}

inline nlohmann::json rules_to_json(const TransformRuleSet& rules) {
    nlohmann::json prune = nlohmann::json::array();
    for (const auto& m : rules.prune) prune.push_back(m.pattern());
    nlohmann::json relabel = nlohmann::json::object();
    for (const auto& [m, t] : rules.relabel.entries()) relabel[m.pattern()] = t;
    nlohmann::json unify = nlohmann::json::object();
    for (const auto& [m, t] : rules.unify.entries()) unify[m.pattern()] = t;
    return nlohmann::json{{"prune", prune}, {"relabel", relabel}, {"unify", unify}};
}

/// Loads a `<lang>.rules.json` file. An empty file yields the identity rule set.
inline TransformRuleSet load_rules(const std::string& path) {
    const auto text = read_file(path);
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {};
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("rule file " + path + ": malformed JSON (" + e.what() + ")");
    }
    return rules_from_json(obj);
}

/// Built-in rules. Only "minilang" has defaults; other languages get the
/// identity rule set and should supply a rule file.
inline TransformRuleSet default_rules(std::string_view lang) {
    if (lang != "minilang") return {};
    return rules_from_json(nlohmann::json::parse(R"json({
        "prune": ["def", "for", "in", "while", "if", "else", "return",
                  "(", ")", ":", "{", "}", ",", ".", "=", "self"],
        "relabel": {"for_statement": "loop", "while_statement": "loop",
                    "if_statement": "conditional", "string": "literal"},
        "unify": {"function": "module", "program": "module", "define": "module"}
    })json"));
}

/// Builds the SST: removes every node matching a prune rule together with its
/// subtree, then applies relabel, then unify. A parent whose only child is
/// pruned is kept. The output is renumbered in pre-order and keeps the AST's id.
inline Tree to_sst(const Tree& ast, const TransformRuleSet& rules) {
    if (ast.empty()) throw PreconditionError("to_sst: empty tree");
    if (rules.prunes(ast.node(ast.root()).label)) {
        throw DataError("to_sst: prune rules would delete the root \"" + ast.node(ast.root()).label + "\"");
    }
    TreeBuilder b;
    copy_subtree(
        ast, ast.root(), b, [&](NodeId c) { return !rules.prunes(ast.node(c).label); },
        [&](const std::string& label) { return rules.map_label(label); });
    return b.finish(ast.id());
}

}  // namespace sstsearch
