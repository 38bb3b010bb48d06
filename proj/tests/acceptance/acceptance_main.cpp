// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion ids
// (A1 ... A9) as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sstsearch.hpp"
#include "sstsearch/cli.hpp"
#include "support/grad_fixture.hpp"
#include "support/oracles.hpp"
#include "support/random_trees.hpp"
#include "support/synthetic.hpp"

using namespace sstsearch;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kCoverageTolerance = 1e-4;
constexpr double kLossTolerance = 1e-6;
constexpr double kGradTolerance = 1e-3;
constexpr double kGradEpsilon = 1e-3;
constexpr double kLearnabilityFloor = 0.8;
constexpr double kMultimodalMargin = 0.10;
constexpr double kUniformMrrTarget = 0.00748;
constexpr double kUniformMrrTolerance = 0.002;
constexpr std::size_t kRandomTrees = 1000;
constexpr std::size_t kMinNodes = 5;
constexpr std::size_t kMaxNodes = 200;

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    const char* id;
    const char* name;
    double limit_seconds;  // 0: no limit
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

Tree random_sized_tree(Rng& rng) { return testing::random_tree(rng, kMinNodes + rng.below(kMaxNodes - kMinNodes + 1)); }

Outcome coverage_arithmetic() {
    const Tree sst = load_ast(nlohmann::json::parse(read_file(SSTSEARCH_TEST_DATA "/worked_sst.json")), "worked");
    SamplerConfig all;
    all.n_paths = 1000;
    all.width_threshold = 1;
    CoverageFootprint root, leaf;
    for (const auto& s : root_paths(sst, all)) {
        if (s.tokens.front() == "anniversary") root = s.footprint;
    }
    for (const auto& s : leaf_paths(sst, all)) {
        if (s.tokens.front() == "anniversary" && s.tokens.back() == "SMS") leaf = s.footprint;
    }
    const auto r = coverage({root}, sst);
    const auto l = coverage({leaf}, sst);
    const struct {
        double got, want;
    } checks[] = {{r.link_coverage, 0.2581}, {l.link_coverage, 0.2258}, {r.node_coverage, 0.5000},
                  {l.node_coverage, 0.3750}};
    Outcome o;
    for (const auto& c : checks) {
        o.pass = o.pass && std::abs(c.got - c.want) <= kCoverageTolerance;
        o.detail += (o.detail.empty() ? "" : " ") + fmt("%.4f", c.got);
    }
    o.pass = o.pass && r.covered_links == 8 && l.covered_links == 7 && r.covered_nodes == 8 && l.covered_nodes == 6 &&
             r.total_links == 31 && r.total_nodes == 16;
    return o;
}

Outcome coverage_invariants() {
    Rng rng(1001);
    std::size_t failures = 0;
    for (std::size_t trial = 0; trial < kRandomTrees; ++trial) {
        const auto t = random_sized_tree(rng);
        const auto sbt = coverage({sbt_serialize(t).footprint}, t);
        const auto tok = coverage({token_footprint(t)}, t);
        const auto lcrs_fp = lcrs_serialize(t).footprint;
        const auto lcrs = coverage({lcrs_fp}, t);
        std::set<Link> first_child;
        for (NodeId v = 0; v < t.size(); ++v) {
            if (!t.node(v).children.empty()) first_child.emplace(v, t.node(v).children.front());
        }
        const bool ok = sbt.link_coverage == 1.0 && sbt.node_coverage == 1.0 && tok.link_coverage == 0.0 &&
                        tok.node_coverage == 1.0 && lcrs.node_coverage == 1.0 && lcrs_fp.covered_links == first_child;
        failures += !ok;
    }
    return {failures == 0, std::to_string(failures) + " failures on " + std::to_string(kRandomTrees) + " trees"};
}

Outcome round_trips() {
    Rng rng(1002);
    std::size_t failures = 0;
    for (std::size_t trial = 0; trial < kRandomTrees; ++trial) {
        const auto t = random_sized_tree(rng);
        try {
            failures += !(sbt_deserialize(sbt_serialize(t).tokens) == t);
            failures += !(lcrs_deserialize(lcrs_serialize(t).tokens) == t);
        } catch (const DataError&) {
            ++failures;
        }
    }
    return {failures == 0, std::to_string(failures) + " failures on " + std::to_string(2 * kRandomTrees) + " round trips"};
}

Outcome lcrs_inverse_check() {
    Rng rng(1003);
    std::size_t failures = 0;
    for (std::size_t trial = 0; trial < kRandomTrees; ++trial) {
        const auto t = random_sized_tree(rng);
        const auto bt = lcrs_transform(t);
        std::vector<std::string> labels;
        std::vector<std::optional<std::size_t>> left, right;
        for (const auto& n : bt.nodes) {
            labels.push_back(n.label);
            left.push_back(n.left);
            right.push_back(n.right);
        }
        failures += !(testing::nested_from_binary(labels, left, right, bt.root) == testing::nested_from_tree(t));
    }
    return {failures == 0, std::to_string(failures) + " failures on " + std::to_string(kRandomTrees) + " trees"};
}

Outcome loss_checks() {
    Outcome o;
    const double zero = loss_from_scores(BasicMatrix<double>(2, 2)).loss;
    o.pass = std::abs(zero - std::log(2.0)) <= kLossTolerance;
    o.detail = "ln2 err " + fmt("%.1e", std::abs(zero - std::log(2.0)));

    Rng rng(1005);
    double worst_shift = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(15);
        BasicMatrix<double> s(n, n);
        for (auto& x : s.data) x = rng.uniform(-5.0, 5.0);
        auto shifted = s;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = rng.uniform(-100.0, 100.0);
            for (std::size_t j = 0; j < n; ++j) shifted(j, i) += c;
        }
        worst_shift = std::max(worst_shift, std::abs(loss_from_scores(s).loss - loss_from_scores(shifted).loss));
    }
    o.pass = o.pass && worst_shift <= kLossTolerance;
    o.detail += ", shift err " + fmt("%.1e", worst_shift);

    const auto nbow = testing::grad_fixture(EncoderKind::nbow, 4, 3, 0.0);
    const auto selfatt = testing::grad_fixture(EncoderKind::selfatt, 8, 2, 3 * kGradEpsilon);
    const auto gn = grad_check(nbow.model, nbow.batch, kGradEpsilon);
    const auto gs = grad_check(selfatt.model, selfatt.batch, kGradEpsilon);
    o.pass = o.pass && gn.max_relative_error < kGradTolerance && gs.max_relative_error < kGradTolerance;
    o.detail += ", grad nbow " + fmt("%.1e", gn.max_relative_error) + " selfatt " + fmt("%.1e", gs.max_relative_error);
    return o;
}

Outcome learnability() {
    const auto pairs = testing::identifier_corpus(200, 11);
    const auto split = split_corpus(pairs, 3);
    TrainConfig tc;
    tc.encoder = EncoderKind::nbow;
    tc.epochs = 30;
    tc.batch_size = 32;
    tc.embedding_dim = 128;
    tc.seed = 1;
    const auto m = train(pairs, split, Mode::uni_code, tc, default_rules("minilang"), SamplerConfig{});
    const auto r = evaluate_split(m, pairs, split.test);
    return {r.mrr >= kLearnabilityFloor,
            "held-out MRR " + fmt("%.4f", r.mrr) + " over " + std::to_string(r.evaluated) + " pairs"};
}

Outcome multimodal_advantage() {
    const auto pairs = testing::concept_corpus(50, 5, 5, 21);
    const auto split = split_corpus(pairs, 3);
    TrainConfig tc;
    tc.encoder = EncoderKind::nbow;
    tc.embedding_dim = 64;
    tc.batch_size = 32;
    tc.learning_rate = 1e-2;
    tc.epochs = 100;
    tc.seed = 147;
    const auto rules = default_rules("minilang");
    auto held_out = [&](Mode mode) {
        return evaluate_split(train(pairs, split, mode, tc, rules, SamplerConfig{}), pairs, split.test).mrr;
    };
    const double uni = held_out(Mode::uni_code);
    const double multi = held_out(Mode::multi_sbt);
    return {multi - uni >= kMultimodalMargin,
            "uni-code " + fmt("%.4f", uni) + ", multi-sbt " + fmt("%.4f", multi) + ", margin " + fmt("%+.4f", multi - uni)};
}

Outcome metric_units() {
    Matrix one(4, 1);
    one(0, 0) = 0.5f;
    one(1, 0) = 0.9f;
    one(2, 0) = 0.7f;
    one(3, 0) = 0.1f;
    const double rr = 1.0 / static_cast<double>(target_rank(one, 0));
    const double ideal = ndcg_single({3, 2, 1, 0});

    constexpr std::size_t candidates = 1000;
    constexpr std::size_t trials = 10000;
    Rng rng(1008);
    Matrix column(candidates, 1);
    double sum = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        for (auto& x : column.data) x = static_cast<float>(rng.uniform());
        sum += 1.0 / static_cast<double>(target_rank(column, 0));
    }
    const double uniform = sum / static_cast<double>(trials);
    return {rr == 1.0 / 3.0 && ideal == 1.0 && std::abs(uniform - kUniformMrrTarget) <= kUniformMrrTolerance,
            "rank-3 RR " + fmt("%.6f", rr) + ", ideal NDCG " + fmt("%.1f", ideal) + ", uniform MRR " +
                fmt("%.5f", uniform)};
}

int run_cli(std::vector<std::string> args, std::string& log) {
    args.insert(args.begin(), "sstsearch");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    log += err.str();
    return code;
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / "sstsearch_acceptance_determinism";
    fs::remove_all(root);
    const auto pairs = testing::identifier_corpus(48, 77);
    const std::vector<std::string> training = {"--encoder", "selfatt", "--dim",      "16", "--epochs", "3",
                                               "--batch-size", "8",    "--min-count", "1", "--max-len", "64"};
    const std::vector<std::string> outputs = {"train.sbt.txt", "valid.sbt.txt", "test.sbt.txt", "model.ckpt",
                                              "index.bin",     "report.json",   "report.txt"};
    std::string log;
    std::vector<std::vector<std::string>> contents;
    for (const char* run : {"a", "b"}) {
        const auto dir = root / run;
        fs::create_directories(dir);
        const auto corpus = (dir / "corpus.jsonl").string();
        save_corpus(corpus, pairs);
        const std::vector<std::string> common = {"--seed", "2024", "--out", dir.string()};
        auto with = [&](std::vector<std::string> args, const std::vector<std::string>& extra) {
            args.insert(args.begin(), common.begin(), common.end());
            args.insert(args.end(), {"--corpus", corpus});
            args.insert(args.end(), extra.begin(), extra.end());
            return args;
        };
        const bool ok = run_cli(with({"serialize", "--method", "sbt"}, {}), log) == 0 &&
                        run_cli(with({"train", "--mode", "multi-sbt"}, training), log) == 0 &&
                        run_cli(with({"index"}, {}), log) == 0 &&
                        run_cli(with({"eval", "--mode", "uni-code", "--mode", "multi-sbt"}, training), log) == 0;
        if (!ok) return {false, "pipeline " + std::string(run) + " failed: " + log};
        std::vector<std::string> files;
        for (const auto& name : outputs) files.push_back(read_file((dir / name).string()));
        contents.push_back(std::move(files));
    }
    std::string differing;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (contents[0][i] != contents[1][i]) differing += " " + outputs[i];
    }
    fs::remove_all(root);
    if (!differing.empty()) return {false, "differs:" + differing};
    return {true, std::to_string(outputs.size()) + " output files byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {"A1", "coverage arithmetic", 1, coverage_arithmetic},
        {"A2", "coverage invariants", 30, coverage_invariants},
        {"A3", "serialization round trips", 30, round_trips},
        {"A4", "independent LCRS inverse", 0, lcrs_inverse_check},
        {"A5", "loss and gradient checks", 60, loss_checks},
        {"A6", "end-to-end learnability", 300, learnability},
        {"A7", "multimodal advantage", 600, multimodal_advantage},
        {"A8", "MRR and NDCG units", 0, metric_units},
        {"A9", "pipeline determinism", 0, determinism},
    };
    std::set<std::string> only(argv + 1, argv + argc);

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt("%.2fs", secs);
        if (c.limit_seconds > 0) {
            timing += fmt(" (limit %.0fs)", c.limit_seconds);
            if (secs >= c.limit_seconds) {
                o.pass = false;
                o.detail += ", over time limit";
            }
        }
        std::printf("%s %s %s: %s [%s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
