#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sstsearch/common.hpp"
#include "sstsearch/corpus.hpp"
#include "sstsearch/model.hpp"
#include "sstsearch/representation.hpp"
#include "sstsearch/tensor.hpp"

namespace sstsearch {

struct SnippetRef {
    std::string id;
    std::string lang;
    std::string preview;

    bool operator==(const SnippetRef&) const = default;
};

/// Code vectors, one unit-norm row per snippet (or all zeros), with a
/// parallel reference table.
struct SearchIndex {
    Matrix vectors;
    std::vector<SnippetRef> refs;
    std::size_t skipped = 0;
    std::vector<std::string> skipped_ids;
    /// Mode of the checkpoint that produced the vectors.
    std::string mode;
    /// Checkpoint location relative to the index file, when known.
    std::string checkpoint;

    std::size_t size() const { return refs.size(); }
    std::size_t dim() const { return vectors.cols; }
};

struct SearchHit {
    SnippetRef ref;
    double similarity = 0.0;
};

/// Code text with whitespace runs collapsed, cut to at most `max_bytes`
/// without splitting a UTF-8 sequence.
inline std::string make_preview(std::string_view code, std::size_t max_bytes = 80) {
    std::string out;
    bool space = false;
    for (char ch : code) {
        const bool ws = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r';
        if (ws) {
            space = !out.empty();
            continue;
        }
        if (space) out.push_back(' ');
        space = false;
        out.push_back(ch);
    }
    if (out.size() <= max_bytes) return out;
    std::size_t cut = max_bytes;
    while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80) --cut;
    out.resize(cut);
    return out + "...";
}

/// Scales `v` to unit length in place; zero vectors are left as they are.
inline void normalize(std::span<float> v) {
    const double n = linalg::norm(std::span<const float>(v));
    if (n == 0.0) return;
    for (auto& x : v) x = static_cast<float>(x / n);
}

/// Encodes every snippet's code side with the model (fusing in multimodal
/// modes) and normalizes the result. Snippets whose tree cannot be built are
/// skipped and counted.
inline SearchIndex build_index(const Model& model, const std::vector<CodeQueryPair>& pairs) {
    SearchIndex index;
    index.mode = to_string(model.mode);
    std::vector<std::vector<float>> rows;
    for (const auto& pair : pairs) {
        Features f;
        try {
            f = extract_features(pair, model.mode, model.rules, model.sampler);
        } catch (const DataError&) {
            ++index.skipped;
            index.skipped_ids.push_back(pair.id);
            continue;
        }
        auto v = encode_code_side(model, make_example(model, f));
        normalize(v);
        rows.push_back(std::move(v));
        index.refs.push_back({pair.id, pair.lang, make_preview(pair.code)});
    }
    index.vectors = Matrix(rows.size(), model.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), index.vectors.row(i).begin());
    return index;
}

/// Ranks all rows against a query vector: descending cosine similarity, rows
/// that are zero vectors last, ties by ascending snippet id.
inline std::vector<SearchHit> query_vector(const SearchIndex& index, std::span<const float> query, std::size_t k) {
    if (k == 0) throw PreconditionError("search: k must be >= 1");
    if (index.size() == 0) return {};
    if (query.size() != index.dim()) throw PreconditionError("search: query dimension does not match the index");
    const double qn = linalg::norm(query);
    struct Entry {
        bool zero;
        double sim;
        std::size_t row;
    };
    std::vector<Entry> entries;
    entries.reserve(index.size());
    for (std::size_t r = 0; r < index.size(); ++r) {
        const auto row = index.vectors.row(r);
        const bool zero = linalg::norm(row) == 0.0;
        const double sim = (zero || qn == 0.0) ? 0.0 : linalg::dot(row, query) / qn;
        entries.push_back({zero, sim, r});
    }
    const auto better = [&](const Entry& a, const Entry& b) {
        if (a.zero != b.zero) return !a.zero;
        if (a.sim != b.sim) return a.sim > b.sim;
        return index.refs[a.row].id < index.refs[b.row].id;
    };
    const std::size_t take = std::min(k, entries.size());
    std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(take), entries.end(), better);
    std::vector<SearchHit> hits;
    for (std::size_t i = 0; i < take; ++i) hits.push_back({index.refs[entries[i].row], entries[i].sim});
    return hits;
}

/// Encodes `text` with the query encoder and ranks the index against it.
inline std::vector<SearchHit> query(const SearchIndex& index, const Model& model, std::string_view text,
                                    std::size_t k) {
    if (k == 0) throw PreconditionError("search: k must be >= 1");
    if (index.size() == 0) return {};
    if (!index.mode.empty() && index.mode != to_string(model.mode)) {
        throw DataError("search: index built with mode " + index.mode + " but checkpoint has mode " +
                        to_string(model.mode));
    }
    const auto q = encode_query_side(model, model.query_vocab.encode(tokenize_text(text)));
    return query_vector(index, q, k);
}

// Index file:
//   "SSTINDEX" | u32 version | u64 count | u64 dim | count*dim f32 LE |
//   u64 table length | table JSON {mode, checkpoint, skipped, skipped_ids, refs}

namespace detail {
inline constexpr std::string_view kIndexMagic{"SSTINDEX", 8};
inline constexpr std::uint32_t kIndexVersion = 1;
}  // namespace detail

inline std::string serialize_index(const SearchIndex& index) {
    std::string out(detail::kIndexMagic);
    le::put_u32(out, detail::kIndexVersion);
    le::put_u64(out, index.size());
    le::put_u64(out, index.dim());
    for (float x : index.vectors.data) le::put_f32(out, x);
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& r : index.refs) refs.push_back({{"id", r.id}, {"lang", r.lang}, {"preview", r.preview}});
    const nlohmann::json table{{"mode", index.mode},
                               {"checkpoint", index.checkpoint},
                               {"skipped", index.skipped},
                               {"skipped_ids", index.skipped_ids},
                               {"refs", refs}};
    const auto text = table.dump();
    le::put_u64(out, text.size());
    out += text;
    return out;
}

inline SearchIndex parse_index(std::string_view bytes) {
    le::Reader in(bytes, "index");
    if (in.bytes(8) != detail::kIndexMagic) throw DataError("index: bad magic");
    if (const auto v = in.u32(); v != detail::kIndexVersion) {
        throw DataError("index: unsupported version " + std::to_string(v));
    }
    const auto count = in.u64();
    const auto dim = in.u64();
    if (count != 0 && dim > bytes.size() / 4 / count) throw DataError("index: matrix larger than file");
    SearchIndex index;
    index.vectors = Matrix(count, dim);
    for (auto& x : index.vectors.data) x = in.f32();
    const auto len = in.u64();
    try {
        const auto table = nlohmann::json::parse(in.bytes(len));
        index.mode = table.at("mode").get<std::string>();
        index.checkpoint = table.at("checkpoint").get<std::string>();
        index.skipped = table.at("skipped").get<std::size_t>();
        index.skipped_ids = table.at("skipped_ids").get<std::vector<std::string>>();
        for (const auto& r : table.at("refs")) {
            index.refs.push_back(
                {r.at("id").get<std::string>(), r.at("lang").get<std::string>(), r.at("preview").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("index: invalid reference table (") + e.what() + ")");
    }
    if (!in.at_end()) throw DataError("index: trailing bytes");
    if (index.refs.size() != count) throw DataError("index: reference count does not match row count");
    return index;
}

inline void save_index(const std::string& path, const SearchIndex& index) { write_file(path, serialize_index(index)); }

inline SearchIndex load_index(const std::string& path) { return parse_index(read_file(path)); }

}  // namespace sstsearch
