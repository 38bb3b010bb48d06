// Library walkthrough: parse a MiniLang file, simplify it, serialize it four
// ways with coverage, then train a small model on a corpus and query it.
//
//   sstsearch_quickstart <file.ml> <corpus.jsonl>

#include <cstdio>
#include <iostream>

#include "sstsearch.hpp"

using namespace sstsearch;

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: " << argv[0] << " <file.ml> <corpus.jsonl>\n";
        return 1;
    }
    try {
        const Tree ast = parse_minilang(read_file(argv[1]), argv[1]);
        const Tree sst = to_sst(ast, default_rules("minilang"));
        std::printf("AST %zu nodes, SST %zu nodes, %zu unique labels\n", ast.size(), sst.size(),
                    tree_stats(sst).unique_label_count);

        SamplerConfig sampler;
        for (Method m : {Method::rootpath, Method::leafpath, Method::sbt, Method::lcrs}) {
            const auto seqs = serialize_tree(sst, m, sampler);
            std::vector<CoverageFootprint> fps;
            for (const auto& s : seqs) fps.push_back(s.footprint);
            const auto cov = coverage(fps, sst);
            std::printf("%-9s %3zu sequences  link %.4f  node %.4f\n", std::string(to_string(m)).c_str(), seqs.size(),
                        cov.link_coverage, cov.node_coverage);
        }

        const auto pairs = load_corpus(argv[2]);
        const auto split = split_corpus(pairs, 1);
        TrainConfig cfg;
        cfg.encoder = EncoderKind::nbow;
        cfg.embedding_dim = 32;
        cfg.batch_size = 8;
        cfg.epochs = 20;
        cfg.min_count = 1;
        cfg.seed = 1;
        const Model model = train(pairs, split, Mode::multi_sbt, cfg, default_rules("minilang"), sampler);
        const auto result = evaluate_split(model, pairs, split.test);
        std::printf("multi-sbt held-out MRR %.4f over %zu pairs\n", result.mrr, result.evaluated);

        const auto index = build_index(model, pairs);
        const std::string text = pairs.front().query;
        std::printf("query: %s\n", text.c_str());
        for (const auto& hit : query(index, model, text, 3)) {
            std::printf("  %.4f  %s  %s\n", hit.similarity, hit.ref.id.c_str(), hit.ref.preview.c_str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
