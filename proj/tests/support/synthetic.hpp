#pragma once

// Synthetic MiniLang corpora for training and pipeline tests.

#include <algorithm>
#include <string>
#include <vector>

#include "sstsearch/common.hpp"
#include "sstsearch/corpus.hpp"

namespace sstsearch::testing {

inline const std::vector<std::string>& word_pool() {
    static const std::vector<std::string> words = {
        "account",  "address", "amount",  "archive", "balance", "batch",   "buffer",  "cache",   "channel", "client",
        "config",   "counter", "cursor",  "customer", "date",   "device",  "digest",  "email",   "engine",  "event",
        "feature",  "field",   "filter",  "folder",  "format",  "frame",   "graph",   "group",   "handler", "header",
        "image",    "index",   "invoice", "item",    "journal", "key",     "label",   "layer",   "ledger",  "limit",
        "listener", "lock",    "logger",  "mailbox", "matrix",  "member",  "message", "metric",  "mutex",   "network",
        "node",     "offset",  "order",   "owner",   "packet",  "page",    "parser",  "payload", "policy",  "pool",
        "price",    "printer", "profile", "queue",   "quota",   "record",  "region",  "report",  "request", "result",
        "router",   "sample",  "schema",  "score",   "server",  "session", "signal",  "socket",  "source",  "stream",
        "table",    "target",  "task",    "thread",  "ticket",  "timer",   "token",   "topic",   "tracker", "user",
        "value",    "vector",  "version", "volume",  "wallet",  "window",  "worker",  "writer",  "zone",    "year",
    };
    return words;
}

inline std::string pick(const std::vector<std::string>& pool, Rng& rng) { return pool[rng.below(pool.size())]; }

/// Pairs whose query is the snippet's identifier words in shuffled order:
///   def <verb>_<noun>(<arg>): { <x> = <arg>.<method>(<y>)  return <x> }
inline std::vector<CodeQueryPair> identifier_corpus(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    const auto& pool = word_pool();
    std::vector<CodeQueryPair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> w;
        while (w.size() < 6) {
            auto cand = pick(pool, rng);
            if (std::find(w.begin(), w.end(), cand) == w.end()) w.push_back(cand);
        }
        CodeQueryPair p;
        p.id = "ident-" + std::to_string(i);
        p.lang = "minilang";
        p.code = "def " + w[0] + "_" + w[1] + "(" + w[2] + "): {\n    " + w[3] + " = " + w[2] + "." + w[4] + "(" +
                 w[5] + ")\n    return " + w[3] + "\n}\n";
        auto q = w;
        rng.shuffle(q);
        for (std::size_t k = 0; k < q.size(); ++k) p.query += (k ? " " : "") + q[k];
        pairs.push_back(std::move(p));
    }
    return pairs;
}

/// Structural concepts and the MiniLang body that realizes each over two
/// identifiers. The query words never occur as code tokens; the first four
/// bodies produce the same code-token bag {a, b}.
struct Concept {
    const char* query_word;
    std::string (*body)(const std::string& a, const std::string& b);
};

inline const std::vector<Concept>& concepts() {
    static const std::vector<Concept> list = {
        {"call", [](const std::string& a, const std::string& b) { return a + "(" + b + ")"; }},
        {"attribute", [](const std::string& a, const std::string& b) { return a + "." + b; }},
        {"assignment", [](const std::string& a, const std::string& b) { return a + " = " + b; }},
        {"comparison", [](const std::string& a, const std::string& b) { return a + " == " + b; }},
        {"loop", [](const std::string& a, const std::string& b) { return "while " + a + ": { " + b + " }"; }},
        {"conditional", [](const std::string& a, const std::string& b) { return "if " + a + ": { " + b + " }"; }},
    };
    return list;
}

/// `groups` groups of one pair per concept sharing two identifiers. Splits
/// are pre-assigned by group: the last `test_groups` groups are test, the
/// `valid_groups` before them valid, the rest train.
inline std::vector<CodeQueryPair> concept_corpus(std::size_t groups, std::size_t valid_groups,
                                                 std::size_t test_groups, std::uint64_t seed) {
    Rng rng(seed);
    const auto& pool = word_pool();
    std::vector<CodeQueryPair> pairs;
    for (std::size_t g = 0; g < groups; ++g) {
        std::string a = pick(pool, rng), b = pick(pool, rng);
        while (b == a) b = pick(pool, rng);
        SplitName split = SplitName::train;
        if (g >= groups - test_groups) split = SplitName::test;
        else if (g >= groups - test_groups - valid_groups) split = SplitName::valid;
        for (std::size_t c = 0; c < concepts().size(); ++c) {
            const auto& shape = concepts()[c];
            CodeQueryPair p;
            p.id = "concept-" + std::to_string(g) + "-" + shape.query_word;
            p.lang = "minilang";
            p.code = "def " + pick(pool, rng) + "(): { " + shape.body(a, b) + " }\n";
            std::vector<std::string> q = {shape.query_word, a, b};
            rng.shuffle(q);
            p.query = q[0] + " " + q[1] + " " + q[2];
            p.split = split;
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

}  // namespace sstsearch::testing
