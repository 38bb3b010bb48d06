#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sstsearch/common.hpp"
#include "sstsearch/tree.hpp"

namespace sstsearch {

enum class SplitName { train, valid, test };

inline std::string_view to_string(SplitName s) {
    switch (s) {
        case SplitName::train: return "train";
        case SplitName::valid: return "valid";
        case SplitName::test: return "test";
    }
    return "train";
}

struct CodeQueryPair {
    std::string id;
    std::string lang;
    std::string code;
    std::string query;
    /// Pre-parsed tree, when the corpus provides one.
    std::optional<nlohmann::json> ast;
    /// Pre-assigned split, when the corpus provides one.
    std::optional<SplitName> split;
};

/// Indices into the corpus vector, each list in corpus order.
struct CorpusSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    std::vector<std::size_t> test;

    const std::vector<std::size_t>& get(SplitName s) const {
        switch (s) {
            case SplitName::valid: return valid;
            case SplitName::test: return test;
            default: return train;
        }
    }
};

namespace detail {

inline std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line_no) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw DataError("corpus line " + std::to_string(line_no) + ": missing field \"" + key + "\"");
    }
    if (!it->is_string()) {
        throw DataError("corpus line " + std::to_string(line_no) + ": field \"" + key + "\" must be a string");
    }
    return it->get<std::string>();
}

}  // namespace detail

/// Parses one corpus record. `line_no` is 1-based and only used in messages.
inline CodeQueryPair parse_corpus_record(std::string_view line, std::size_t line_no) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("corpus line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError("corpus line " + std::to_string(line_no) + ": expected an object");

    CodeQueryPair p;
    p.id = detail::required_string(obj, "id", line_no);
    p.lang = detail::required_string(obj, "lang", line_no);
    p.code = detail::required_string(obj, "code", line_no);
    p.query = detail::required_string(obj, "query", line_no);
    const auto where = "corpus line " + std::to_string(line_no);
    if (p.id.empty()) throw DataError(where + ": field \"id\" must be non-empty");
    if (p.code.empty()) throw DataError(where + ": field \"code\" must be non-empty");
    if (p.query.empty()) throw DataError(where + ": field \"query\" must be non-empty");

    if (auto it = obj.find("ast"); it != obj.end() && !it->is_null()) {
        try {
            (void)load_ast(*it);
        } catch (const DataError& e) {
            throw DataError(where + ": field \"ast\": " + e.what());
        }
        p.ast = *it;
    }
    if (auto it = obj.find("split"); it != obj.end() && !it->is_null()) {
        const auto s = it->is_string() ? it->get<std::string>() : std::string{};
        if (s == "train") {
            p.split = SplitName::train;
        } else if (s == "valid") {
            p.split = SplitName::valid;
        } else if (s == "test") {
            p.split = SplitName::test;
        } else {
            throw DataError(where + ": field \"split\" must be \"train\", \"valid\" or \"test\"");
        }
    }
    return p;
}

/// Reads a line-delimited corpus. Blank lines are skipped; line numbers in
/// errors are 1-based and count blank lines.
inline std::vector<CodeQueryPair> parse_corpus(std::string_view text) {
    std::vector<CodeQueryPair> pairs;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        auto pair = parse_corpus_record(line, line_no);
        if (!seen.insert(pair.id).second) {
            throw DataError("corpus line " + std::to_string(line_no) + ": duplicate id \"" + pair.id + "\"");
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

inline std::vector<CodeQueryPair> load_corpus(const std::string& path) { return parse_corpus(read_file(path)); }

inline nlohmann::json corpus_record_to_json(const CodeQueryPair& p) {
    nlohmann::json obj{{"id", p.id}, {"lang", p.lang}, {"code", p.code}, {"query", p.query}};
    if (p.ast) obj["ast"] = *p.ast;
    if (p.split) obj["split"] = std::string(to_string(*p.split));
    return obj;
}

inline std::string dump_corpus(const std::vector<CodeQueryPair>& pairs) {
    std::string out;
    for (const auto& p : pairs) {
        out += corpus_record_to_json(p).dump();
        out += '\n';
    }
    return out;
}

inline void save_corpus(const std::string& path, const std::vector<CodeQueryPair>& pairs) {
    write_file(path, dump_corpus(pairs));
}

/// 80/10/10 partition. Pairs carrying a pre-assigned split keep it; the
/// remaining pairs are shuffled under `seed` and divided with
/// valid = test = floor(n/10) and the remainder in train. Each list is
/// returned in corpus order.
inline CorpusSplit split_corpus(const std::vector<CodeQueryPair>& pairs, std::uint64_t seed) {
    if (pairs.empty()) throw PreconditionError("split_corpus: empty corpus");
    CorpusSplit out;
    std::vector<std::size_t> unassigned;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!pairs[i].split) {
            unassigned.push_back(i);
            continue;
        }
        switch (*pairs[i].split) {
            case SplitName::train: out.train.push_back(i); break;
            case SplitName::valid: out.valid.push_back(i); break;
            case SplitName::test: out.test.push_back(i); break;
        }
    }

    Rng rng(seed);
    rng.shuffle(unassigned);
    const std::size_t n = unassigned.size();
    const std::size_t n_valid = n / 10;
    const std::size_t n_test = n / 10;
    const std::size_t n_train = n - n_valid - n_test;
    out.train.insert(out.train.end(), unassigned.begin(), unassigned.begin() + n_train);
    out.valid.insert(out.valid.end(), unassigned.begin() + n_train, unassigned.begin() + n_train + n_valid);
    out.test.insert(out.test.end(), unassigned.begin() + n_train + n_valid, unassigned.end());

    std::sort(out.train.begin(), out.train.end());
    std::sort(out.valid.begin(), out.valid.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

namespace detail {

inline bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }
inline bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_lower(unsigned char c) { return (c >= 'a' && c <= 'z') || c >= 0x80; }
inline bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

/// Splits one alphanumeric run at camel-case and letter/digit boundaries.
inline void split_identifier(std::string_view word, std::vector<std::string>& out) {
    std::size_t start = 0;
    for (std::size_t i = 1; i <= word.size(); ++i) {
        bool boundary = i == word.size();
        if (!boundary) {
            const auto prev = static_cast<unsigned char>(word[i - 1]);
            const auto cur = static_cast<unsigned char>(word[i]);
            if (is_lower(prev) && is_upper(cur)) boundary = true;
            else if (is_digit(prev) != is_digit(cur)) boundary = true;
            // "HTTPResponse": break before the upper that starts a lower run.
            else if (is_upper(prev) && is_upper(cur) && i + 1 < word.size() &&
                     is_lower(static_cast<unsigned char>(word[i + 1])))
                boundary = true;
        }
        if (boundary) {
            std::string piece(word.substr(start, i - start));
            for (auto& ch : piece) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            out.push_back(std::move(piece));
            start = i;
        }
    }
}

}  // namespace detail

/// Word-level tokenizer: splits on anything that is not alphanumeric (so
/// punctuation and underscores are separators), then splits identifiers at
/// camel-case and letter/digit boundaries, and lowercases. Bytes >= 0x80 are
/// kept as caseless letters.
inline std::vector<std::string> tokenize_text(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !detail::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && detail::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) detail::split_identifier(text.substr(start, i - start), out);
    }
    return out;
}

}  // namespace sstsearch
