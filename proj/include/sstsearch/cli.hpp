#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sstsearch/common.hpp"
#include "sstsearch/corpus.hpp"
#include "sstsearch/coverage.hpp"
#include "sstsearch/eval.hpp"
#include "sstsearch/minilang.hpp"
#include "sstsearch/model.hpp"
#include "sstsearch/representation.hpp"
#include "sstsearch/search.hpp"
#include "sstsearch/serialize.hpp"
#include "sstsearch/sst.hpp"
#include "sstsearch/tree.hpp"

namespace sstsearch {

/// Settings shared by all subcommands. A config file holds the same fields
/// as a flat JSON object.
struct RunConfig {
    std::string corpus;
    std::string lang = "minilang";
    std::string rules;  // empty: built-in rules for `lang`
    std::optional<Method> method;
    Mode mode = Mode::uni_code;
    std::uint64_t seed = 0;
    std::string out = ".";
    SamplerConfig sampler;
    TrainConfig train;

    TransformRuleSet load_rule_set() const { return rules.empty() ? default_rules(lang) : load_rules(rules); }
};

inline void apply_config_json(RunConfig& cfg, const nlohmann::json& obj) {
    if (!obj.is_object()) throw DataError("config: expected a JSON object");
    for (const auto& [key, value] : obj.items()) {
        try {
            if (key == "corpus") cfg.corpus = value.get<std::string>();
            else if (key == "lang" || key == "language") cfg.lang = value.get<std::string>();
            else if (key == "rules") cfg.rules = value.get<std::string>();
            else if (key == "out") cfg.out = value.get<std::string>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "method") {
                const auto m = parse_method(value.get<std::string>());
                if (!m) throw DataError("config: unknown method \"" + value.get<std::string>() + "\"");
                cfg.method = *m;
            } else if (key == "mode") {
                const auto m = parse_mode(value.get<std::string>());
                if (!m) throw DataError("config: unknown mode \"" + value.get<std::string>() + "\"");
                cfg.mode = *m;
            } else if (key == "encoder") {
                const auto k = parse_encoder_kind(value.get<std::string>());
                if (!k) throw DataError("config: unknown encoder \"" + value.get<std::string>() + "\"");
                cfg.train.encoder = *k;
            }
            else if (key == "n_paths") cfg.sampler.n_paths = value.get<std::size_t>();
            else if (key == "length_threshold") cfg.sampler.length_threshold = value.get<std::size_t>();
            else if (key == "width_threshold") cfg.sampler.width_threshold = value.get<std::size_t>();
            else if (key == "batch_size") cfg.train.batch_size = value.get<std::size_t>();
            else if (key == "embedding_dim") cfg.train.embedding_dim = value.get<std::size_t>();
            else if (key == "learning_rate") cfg.train.learning_rate = value.get<double>();
            else if (key == "epochs") cfg.train.epochs = value.get<std::size_t>();
            else if (key == "max_seq_len") cfg.train.max_seq_len = value.get<std::size_t>();
            else if (key == "vocab_size") cfg.train.vocab_size = value.get<std::size_t>();
            else if (key == "min_count") cfg.train.min_count = value.get<std::size_t>();
            else throw DataError("config: unknown key \"" + key + "\"");
        } catch (const nlohmann::json::exception&) {
            throw DataError("config: wrong type for \"" + key + "\"");
        }
    }
}

namespace detail {

namespace fs = std::filesystem;

/// Flag values as parsed; a flag counts only when given on the command line.
struct CliFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    std::string corpus, lang, rules, method, mode, encoder;
    std::size_t n_paths = 0, length_threshold = 0, width_threshold = 0;
    std::size_t batch_size = 0, embedding_dim = 0, epochs = 0, max_seq_len = 0, vocab_size = 0, min_count = 0;
    double learning_rate = 0.0;
    std::string file;
    std::string checkpoint;
    std::string index;
    std::string query;
    std::size_t k = 10;
    std::string split = "all";
    std::vector<std::string> modes;
    std::vector<std::string> checkpoints;
};

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) s += ' ';
        s += tokens[i];
    }
    return s;
}

inline std::string output_path(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out);
    return (fs::path(cfg.out) / name).string();
}

inline std::vector<std::size_t> select_split(const std::vector<CodeQueryPair>& pairs, const CorpusSplit& split,
                                             const std::string& which) {
    if (which == "all") {
        std::vector<std::size_t> all(pairs.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    if (which == "train") return split.train;
    if (which == "valid") return split.valid;
    if (which == "test") return split.test;
    throw UsageError("unknown split \"" + which + "\" (expected all, train, valid or test)");
}

inline std::uint64_t split_seed(const RunConfig& cfg) { return item_seed(cfg.seed, "split"); }

inline std::vector<CodeQueryPair> require_corpus(const RunConfig& cfg) {
    if (cfg.corpus.empty()) throw UsageError("a corpus is required (--corpus or \"corpus\" in the config)");
    return load_corpus(cfg.corpus);
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_file(path, text);
}

inline int run_parse_or_transform(const RunConfig& cfg, const CliFlags& flags, bool transform, std::ostream& out,
                                  std::ostream& err) {
    const auto rules = transform ? cfg.load_rule_set() : TransformRuleSet{};
    auto convert = [&](const Tree& ast) { return transform ? to_sst(ast, rules) : ast; };
    if (!flags.file.empty()) {
        const auto tree = convert(parse_minilang(read_file(flags.file), flags.file));
        out << tree_to_json(tree).dump(2) << "\n";
        return 0;
    }
    const auto pairs = require_corpus(cfg);
    std::vector<std::string> lines;
    std::size_t skipped = 0;
    for (const auto& p : pairs) {
        try {
            const auto tree = convert(ast_for(p));
            lines.push_back(nlohmann::json{{"id", p.id}, {transform ? "sst" : "ast", tree_to_json(tree)}}.dump());
        } catch (const DataError& e) {
            ++skipped;
            err << "skipped " << p.id << ": " << e.what() << "\n";
        }
    }
    const auto path = output_path(cfg, transform ? "sst.jsonl" : "ast.jsonl");
    write_lines(path, lines);
    out << "wrote " << lines.size() << " trees to " << path << " (" << skipped << " skipped)\n";
    return 0;
}

inline int run_serialize(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (!cfg.method) throw UsageError("serialize needs --method (rootpath, leafpath, sbt or lcrs)");
    const auto pairs = require_corpus(cfg);
    const auto rules = cfg.load_rule_set();
    const auto split = split_corpus(pairs, split_seed(cfg));
    for (SplitName name : {SplitName::train, SplitName::valid, SplitName::test}) {
        std::vector<std::string> lines, ids;
        std::size_t skipped = 0;
        for (auto i : split.get(name)) {
            const auto& p = pairs[i];
            ids.push_back(p.id);
            try {
                const auto seqs = serialize_tree(sst_for(p, rules), *cfg.method, item_sampler(cfg.sampler, p.id));
                std::string line;
                for (std::size_t s = 0; s < seqs.size(); ++s) {
                    if (s) line += '\t';
                    line += join_tokens(seqs[s].tokens);
                }
                lines.push_back(std::move(line));
            } catch (const DataError& e) {
                ++skipped;
                lines.emplace_back();
                err << "skipped " << p.id << ": " << e.what() << "\n";
            }
        }
        const std::string stem(to_string(name));
        const auto path = output_path(cfg, stem + "." + std::string(to_string(*cfg.method)) + ".txt");
        write_lines(path, lines);
        write_lines(output_path(cfg, stem + ".ids.txt"), ids);
        out << "wrote " << lines.size() << " lines to " << path << " (" << skipped << " skipped)\n";
    }
    return 0;
}

inline int run_coverage(const RunConfig& cfg, const CliFlags& flags, std::ostream& out, std::ostream& err) {
    const auto pairs = require_corpus(cfg);
    const auto rules = cfg.load_rule_set();
    std::vector<Mode> modes;
    if (!flags.modes.empty()) {
        for (const auto& s : flags.modes) {
            const auto m = parse_mode(s);
            if (!m) throw UsageError("unknown mode \"" + s + "\"");
            modes.push_back(*m);
        }
    } else {
        modes.assign(std::begin(kAllModes), std::end(kAllModes));
    }
    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream table;
    table << pad("mode", 16, true) << pad("link", 10) << pad("node", 10) << pad("items", 8) << "\n";
    for (Mode m : modes) {
        std::vector<CoverageReport> reports;
        std::size_t skipped = 0;
        for (const auto& p : pairs) {
            try {
                reports.push_back(mode_coverage(p, m, rules, cfg.sampler));
            } catch (const DataError&) {
                ++skipped;
            }
        }
        if (reports.empty()) throw DataError("coverage: no pair in the corpus yields a tree");
        const auto agg = corpus_coverage(reports);
        rows.push_back({{"mode", to_string(m)},
                        {"link_coverage", agg.link_coverage},
                        {"node_coverage", agg.node_coverage},
                        {"items", agg.items},
                        {"skipped", skipped}});
        table << pad(to_string(m), 16, true) << pad(fixed(agg.link_coverage * 100.0, 2) + "%", 10)
              << pad(fixed(agg.node_coverage * 100.0, 2) + "%", 10) << pad(std::to_string(agg.items), 8) << "\n";
        if (skipped) err << to_string(m) << ": skipped " << skipped << " pairs without a tree\n";
    }
    write_file(output_path(cfg, "coverage.json"), nlohmann::json{{"coverage", rows}}.dump(2) + "\n");
    out << table.str();
    return 0;
}

inline nlohmann::json history_json(const Model& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& h : m.history) {
        rows.push_back({{"epoch", h.epoch},
                        {"train_loss", nan_to_null(h.train_loss)},
                        {"valid_loss", nan_to_null(h.valid_loss)},
                        {"valid_mrr", nan_to_null(h.valid_mrr)}});
    }
    return {{"mode", to_string(m.mode)},
            {"history", rows},
            {"skipped", m.stats.skipped},
            {"truncated", m.stats.truncated}};
}

inline Model train_mode(const RunConfig& cfg, const std::vector<CodeQueryPair>& pairs, const CorpusSplit& split,
                        Mode mode) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    SamplerConfig sc = cfg.sampler;
    sc.seed = cfg.seed;
    return train(pairs, split, mode, tc, cfg.load_rule_set(), sc);
}

inline int run_train(const RunConfig& cfg, std::ostream& out) {
    const auto pairs = require_corpus(cfg);
    const auto split = split_corpus(pairs, split_seed(cfg));
    const auto model = train_mode(cfg, pairs, split, cfg.mode);
    const auto ckpt = output_path(cfg, "model.ckpt");
    save_checkpoint(ckpt, model);
    write_file(output_path(cfg, "history.json"), history_json(model).dump(2) + "\n");
    for (const auto& h : model.history) {
        out << "epoch " << h.epoch << "  train_loss " << fixed(h.train_loss, 4);
        if (!std::isnan(h.valid_mrr)) out << "  valid_loss " << fixed(h.valid_loss, 4) << "  valid_mrr " << fixed(h.valid_mrr, 4);
        out << "\n";
    }
    out << "wrote " << ckpt << "\n";
    return 0;
}

inline int run_index(const RunConfig& cfg, const CliFlags& flags, std::ostream& out) {
    const auto pairs = require_corpus(cfg);
    const std::string ckpt = flags.checkpoint.empty() ? (fs::path(cfg.out) / "model.ckpt").string() : flags.checkpoint;
    const auto model = load_checkpoint(ckpt);
    const auto split = split_corpus(pairs, split_seed(cfg));
    std::vector<CodeQueryPair> chosen;
    for (auto i : select_split(pairs, split, flags.split)) chosen.push_back(pairs[i]);
    auto index = build_index(model, chosen);
    const auto path = output_path(cfg, "index.bin");
    index.checkpoint = fs::proximate(fs::absolute(ckpt), fs::absolute(cfg.out)).generic_string();
    save_index(path, index);
    out << "indexed " << index.size() << " snippets (" << index.skipped << " skipped) into " << path << "\n";
    return 0;
}

inline int run_search(const CliFlags& flags, std::ostream& out) {
    if (flags.index.empty()) throw UsageError("search needs --index");
    if (flags.query.empty()) throw UsageError("search needs --query");
    const auto index = load_index(flags.index);
    std::string ckpt = flags.checkpoint;
    if (ckpt.empty()) {
        if (index.checkpoint.empty()) throw UsageError("the index does not name a checkpoint; pass --checkpoint");
        ckpt = (fs::path(flags.index).parent_path() / index.checkpoint).string();
    }
    const auto model = load_checkpoint(ckpt);
    const auto hits = query(index, model, flags.query, flags.k);
    std::size_t rank = 0;
    for (const auto& h : hits) {
        out << ++rank << "\t" << fixed(h.similarity, 4) << "\t" << h.ref.id << "\t" << h.ref.preview << "\n";
    }
    return 0;
}

inline int run_eval(const RunConfig& cfg, const CliFlags& flags, std::ostream& out) {
    const auto pairs = require_corpus(cfg);
    const auto split = split_corpus(pairs, split_seed(cfg));
    const auto eval_indices = select_split(pairs, split, flags.split == "all" ? "test" : flags.split);
    std::vector<ModeResult> results;
    if (!flags.checkpoints.empty()) {
        for (const auto& path : flags.checkpoints) results.push_back(evaluate_split(load_checkpoint(path), pairs, eval_indices));
    } else {
        std::vector<Mode> modes;
        if (flags.modes.empty()) {
            modes.assign(std::begin(kAllModes), std::end(kAllModes));
        } else {
            for (const auto& s : flags.modes) {
                const auto m = parse_mode(s);
                if (!m) throw UsageError("unknown mode \"" + s + "\"");
                modes.push_back(*m);
            }
        }
        for (Mode m : modes) results.push_back(evaluate_split(train_mode(cfg, pairs, split, m), pairs, eval_indices));
    }
    const auto report = compare(results);
    const auto text = format_table(report);
    write_file(output_path(cfg, "report.json"), to_json(report).dump(2) + "\n");
    write_file(output_path(cfg, "report.txt"), text);
    out << text;
    return 0;
}

inline std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("SSTSEARCH_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used, 10);
        if (used != std::string_view(s).size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw UsageError(std::string("SSTSEARCH_SEED is not an unsigned integer: ") + s);
    }
}

}  // namespace detail

/// Runs the command line; returns 0 on success, 1 on usage errors and 2 on
/// data errors.
inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    using detail::CliFlags;
    CliFlags f;
    CLI::App app{"Semantic code search over simplified syntax trees", "sstsearch"};
    app.require_subcommand(1);
    auto* opt_config = app.add_option("--config", f.config_path, "JSON run configuration file")->check(CLI::ExistingFile);
    auto* opt_seed = app.add_option("--seed", f.seed, "Seed for all random choices (SSTSEARCH_SEED overrides)");
    auto* opt_out = app.add_option("--out", f.out, "Output directory");

    std::vector<CLI::Option*> set_flags;
    auto corpus_opt = [&](CLI::App* s) { set_flags.push_back(s->add_option("--corpus", f.corpus, "Corpus file (JSON lines)")); };
    auto lang_opts = [&](CLI::App* s) {
        set_flags.push_back(s->add_option("--lang", f.lang, "Language name, selects built-in rules"));
        set_flags.push_back(s->add_option("--rules", f.rules, "Transform rule file"));
    };
    auto sampler_opts = [&](CLI::App* s) {
        set_flags.push_back(s->add_option("--n-paths", f.n_paths, "Paths sampled per tree"));
        set_flags.push_back(s->add_option("--length-threshold", f.length_threshold, "Longest leaf path kept"));
        set_flags.push_back(s->add_option("--width-threshold", f.width_threshold, "Leaf path leg-height threshold"));
    };
    auto train_opts = [&](CLI::App* s) {
        set_flags.push_back(s->add_option("--encoder", f.encoder, "nbow or selfatt"));
        set_flags.push_back(s->add_option("--batch-size", f.batch_size, "Pairs per batch"));
        set_flags.push_back(s->add_option("--dim", f.embedding_dim, "Embedding dimension"));
        set_flags.push_back(s->add_option("--lr", f.learning_rate, "Learning rate"));
        set_flags.push_back(s->add_option("--epochs", f.epochs, "Training epochs"));
        set_flags.push_back(s->add_option("--max-len", f.max_seq_len, "Encoder input length limit"));
        set_flags.push_back(s->add_option("--vocab-size", f.vocab_size, "Vocabulary cap per modality"));
        set_flags.push_back(s->add_option("--min-count", f.min_count, "Minimum token count for the vocabulary"));
    };
    auto mode_help = "Mode: uni-code, uni-{rootpath,leafpath,sbt,lcrs} or multi-{rootpath,leafpath,sbt,lcrs}";

    auto* parse = app.add_subcommand("parse", "Parse MiniLang source into syntax trees");
    parse->add_option("--file", f.file, "MiniLang source file; prints its tree");
    corpus_opt(parse);

    auto* transform = app.add_subcommand("transform", "Build simplified semantic trees");
    transform->add_option("--file", f.file, "MiniLang source file; prints its simplified tree");
    corpus_opt(transform);
    lang_opts(transform);

    auto* serialize = app.add_subcommand("serialize", "Write <split>.<method>.txt sequence files");
    set_flags.push_back(serialize->add_option("--method", f.method, "rootpath, leafpath, sbt or lcrs"));
    corpus_opt(serialize);
    lang_opts(serialize);
    sampler_opts(serialize);

    auto* cov = app.add_subcommand("coverage", "Link and node coverage per mode");
    corpus_opt(cov);
    lang_opts(cov);
    sampler_opts(cov);
    cov->add_option("--mode", f.modes, "Modes to report (default: all)");

    auto* trn = app.add_subcommand("train", "Train a model and write model.ckpt");
    set_flags.push_back(trn->add_option("--mode", f.mode, mode_help));
    corpus_opt(trn);
    lang_opts(trn);
    sampler_opts(trn);
    train_opts(trn);

    auto* idx = app.add_subcommand("index", "Encode a corpus into index.bin");
    idx->add_option("--checkpoint", f.checkpoint, "Checkpoint (default: <out>/model.ckpt)");
    idx->add_option("--split", f.split, "Which pairs to index: all, train, valid or test");
    corpus_opt(idx);

    auto* srch = app.add_subcommand("search", "Rank indexed snippets for a query");
    srch->add_option("--index", f.index, "Index file")->required();
    srch->add_option("--query", f.query, "Natural-language query")->required();
    srch->add_option("-k", f.k, "Number of results")->check(CLI::PositiveNumber);
    srch->add_option("--checkpoint", f.checkpoint, "Checkpoint (default: the one recorded in the index)");

    auto* ev = app.add_subcommand("eval", "Train and compare modes; write report.json and report.txt");
    corpus_opt(ev);
    lang_opts(ev);
    sampler_opts(ev);
    train_opts(ev);
    ev->add_option("--mode", f.modes, "Modes to compare (default: all nine)");
    ev->add_option("--checkpoint", f.checkpoints, "Evaluate these checkpoints instead of training");
    ev->add_option("--split", f.split, "Evaluation split (default: test)");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        RunConfig cfg;
        if (opt_config->count()) apply_config_json(cfg, nlohmann::json::parse(read_file(f.config_path)));
        if (opt_seed->count()) cfg.seed = f.seed;
        if (const auto s = detail::env_seed()) cfg.seed = *s;
        if (opt_out->count()) cfg.out = f.out;
        auto given = [&](const char* name) {
            for (auto* o : set_flags) {
                if (o->get_name() == name && o->count()) return true;
            }
            return false;
        };
        if (given("--corpus")) cfg.corpus = f.corpus;
        if (given("--lang")) cfg.lang = f.lang;
        if (given("--rules")) cfg.rules = f.rules;
        if (given("--method")) {
            const auto m = parse_method(f.method);
            if (!m) throw detail::UsageError("unknown method \"" + f.method + "\"");
            cfg.method = *m;
        }
        if (given("--mode")) {
            const auto m = parse_mode(f.mode);
            if (!m) throw detail::UsageError("unknown mode \"" + f.mode + "\"");
            cfg.mode = *m;
        }
        if (given("--encoder")) {
            const auto k = parse_encoder_kind(f.encoder);
            if (!k) throw detail::UsageError("unknown encoder \"" + f.encoder + "\"");
            cfg.train.encoder = *k;
        }
        if (given("--n-paths")) cfg.sampler.n_paths = f.n_paths;
        if (given("--length-threshold")) cfg.sampler.length_threshold = f.length_threshold;
        if (given("--width-threshold")) cfg.sampler.width_threshold = f.width_threshold;
        if (given("--batch-size")) cfg.train.batch_size = f.batch_size;
        if (given("--dim")) cfg.train.embedding_dim = f.embedding_dim;
        if (given("--lr")) cfg.train.learning_rate = f.learning_rate;
        if (given("--epochs")) cfg.train.epochs = f.epochs;
        if (given("--max-len")) cfg.train.max_seq_len = f.max_seq_len;
        if (given("--vocab-size")) cfg.train.vocab_size = f.vocab_size;
        if (given("--min-count")) cfg.train.min_count = f.min_count;
        cfg.sampler.seed = cfg.seed;
        cfg.sampler.validate();
        cfg.train.seed = cfg.seed;

        if (parse->parsed()) return detail::run_parse_or_transform(cfg, f, false, out, err);
        if (transform->parsed()) return detail::run_parse_or_transform(cfg, f, true, out, err);
        if (serialize->parsed()) return detail::run_serialize(cfg, out, err);
        if (cov->parsed()) return detail::run_coverage(cfg, f, out, err);
        if (trn->parsed()) return detail::run_train(cfg, out);
        if (idx->parsed()) return detail::run_index(cfg, f, out);
        if (srch->parsed()) return detail::run_search(f, out);
        if (ev->parsed()) return detail::run_eval(cfg, f, out);
        err << app.help();
        return 1;
    } catch (const detail::UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed JSON: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace sstsearch
