#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "sstsearch/common.hpp"
#include "sstsearch/tree.hpp"
#include "support/random_trees.hpp"

using namespace sstsearch;
using nlohmann::json;

TEST_CASE("load_ast single node") {
    const auto t = load_ast(json::parse(R"({"label":"module","kind":"nonterminal","children":[]})"));
    REQUIRE(t.size() == 1);
    CHECK(t.node(0).label == "module");
    CHECK(t.node(0).kind == NodeKind::nonterminal);
    CHECK(tree_stats(t) == TreeStats{1, 0, 1, 1, 1});
}

TEST_CASE("load_ast assigns pre-order ids") {
    const auto t = load_ast(json::parse(R"({"label":"r","kind":"nonterminal","children":[
        {"label":"a","kind":"nonterminal","children":[{"label":"b","kind":"terminal"}]}]})"));
    REQUIRE(t.size() == 3);
    CHECK(t.node(0).label == "r");
    CHECK(t.node(1).label == "a");
    CHECK(t.node(2).label == "b");
    CHECK(t.node(2).parent == 1);
    CHECK(t.node(1).parent == 0);
    CHECK(t.depth(2) == 2);
}

TEST_CASE("load_ast errors carry a path") {
    CHECK_THROWS_WITH(load_ast(json::parse(R"({"label":"r","kind":"nonterminal","children":[
        {"label":"a","kind":"terminal"},{"label":"","kind":"terminal"}]})")),
                      Catch::Matchers::ContainsSubstring("$.children[1].label"));
    CHECK_THROWS_WITH(load_ast(json::parse(R"({"label":"r","kind":"leaf"})")),
                      Catch::Matchers::ContainsSubstring("$.kind"));
    CHECK_THROWS_AS(load_ast(json::parse(R"({"label":"r","kind":"terminal","children":[{"label":"x","kind":"terminal"}]})")),
                    DataError);
    CHECK_THROWS_AS(load_ast(json::parse(R"([1,2])")), DataError);
    CHECK_THROWS_AS(load_ast(json::parse(R"({"label":"r","kind":"nonterminal","children":{}})")), DataError);
}

TEST_CASE("worked SST fixture statistics") {
    const auto t = load_ast(json::parse(read_file(SSTSEARCH_TEST_DATA "/worked_sst.json")));
    const auto s = tree_stats(t);
    CHECK(s.node_count == 32);
    CHECK(s.link_count == 31);
    CHECK(s.unique_label_count == 16);
}

TEST_CASE("random tree invariants") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(200);
        const auto t = testing::random_tree(rng, n);
        const auto s = tree_stats(t);
        INFO("trial " << trial << " n=" << n);
        CHECK(s.node_count == n);
        CHECK(s.link_count == n - 1);
        CHECK(s.leaf_count >= 1);
        CHECK(s.leaf_count == t.leaves().size());
        // Children always come after their parent in pre-order.
        for (NodeId v = 1; v < t.size(); ++v) CHECK(t.node(v).parent < v);
    }
    Rng fifty(9);
    CHECK(tree_stats(testing::random_tree(fifty, 50)).link_count == 49);
}

TEST_CASE("tree JSON round-trip") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = testing::random_tree(rng, 1 + rng.below(120));
        const auto back = load_ast(tree_to_json(t));
        CHECK(back == t);
        CHECK(tree_to_json(back) == tree_to_json(t));
    }
}

TEST_CASE("TreeBuilder misuse") {
    TreeBuilder b;
    CHECK_THROWS_AS(b.close(), PreconditionError);
    CHECK_THROWS_AS(b.finish(), PreconditionError);
    b.open("r");
    CHECK_THROWS_AS(b.finish(), PreconditionError);
    b.close();
    CHECK_THROWS_AS(b.leaf("second root"), PreconditionError);
}

TEST_CASE("Rng helpers") {
    Rng a(5), b(5);
    for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
    Rng r(1);
    for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
    const auto pick = r.sample_indices(10, 4);
    CHECK(pick.size() == 4);
    CHECK(std::set<std::size_t>(pick.begin(), pick.end()).size() == 4);
    CHECK(r.sample_indices(3, 10).size() == 3);
    CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
    CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
}
