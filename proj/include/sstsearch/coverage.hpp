#pragma once

#include <set>
#include <string>
#include <vector>

#include "sstsearch/common.hpp"
#include "sstsearch/serialize.hpp"
#include "sstsearch/tree.hpp"

namespace sstsearch {

struct CoverageReport {
    double link_coverage = 0.0;
    double node_coverage = 0.0;
    std::size_t covered_links = 0;
    std::size_t total_links = 0;
    std::size_t covered_nodes = 0;
    std::size_t total_nodes = 0;
};

/// Link coverage = |union of covered links| / (node_count - 1).
/// Node coverage = |union of covered labels| / |unique labels|.
/// A single-node tree has no links; its link coverage is reported as 0.
inline CoverageReport coverage(const std::vector<CoverageFootprint>& footprints, const Tree& tree) {
    const auto tree_labels = tree.unique_labels();
    std::set<Link> links;
    std::set<std::string> labels;
    for (const auto& fp : footprints) {
        if (fp.tree_id != tree.id()) {
            throw DataError("coverage: footprint of tree \"" + fp.tree_id + "\" applied to tree \"" + tree.id() + "\"");
        }
        for (const auto& [p, c] : fp.covered_links) {
            if (p >= tree.size() || c >= tree.size() || tree.node(c).parent != p) {
                throw DataError("coverage: footprint link (" + std::to_string(p) + "," + std::to_string(c) +
                                ") is not a link of tree \"" + tree.id() + "\"");
            }
            links.emplace(p, c);
        }
        for (const auto& l : fp.covered_labels) {
            if (!tree_labels.count(l)) {
                throw DataError("coverage: label \"" + l + "\" is not in tree \"" + tree.id() + "\"");
            }
            labels.insert(l);
        }
    }
    CoverageReport r;
    r.covered_links = links.size();
    r.total_links = tree.size() - 1;
    r.covered_nodes = labels.size();
    r.total_nodes = tree_labels.size();
    r.link_coverage = r.total_links == 0 ? 0.0 : static_cast<double>(r.covered_links) / r.total_links;
    r.node_coverage = r.total_nodes == 0 ? 0.0 : static_cast<double>(r.covered_nodes) / r.total_nodes;
    return r;
}

/// The plain code-token representation: no links, and by definition every
/// unique label.
inline CoverageFootprint token_footprint(const Tree& tree) {
    CoverageFootprint fp;
    fp.tree_id = tree.id();
    fp.covered_labels = tree.unique_labels();
    return fp;
}

struct AggregateCoverage {
    double link_coverage = 0.0;
    double node_coverage = 0.0;
    std::size_t items = 0;
};

/// Arithmetic mean of per-item ratios.
inline AggregateCoverage corpus_coverage(const std::vector<CoverageReport>& reports) {
    if (reports.empty()) throw PreconditionError("corpus_coverage: no reports");
    AggregateCoverage agg;
    for (const auto& r : reports) {
        agg.link_coverage += r.link_coverage;
        agg.node_coverage += r.node_coverage;
    }
    agg.items = reports.size();
    agg.link_coverage /= static_cast<double>(reports.size());
    agg.node_coverage /= static_cast<double>(reports.size());
    return agg;
}

}  // namespace sstsearch
