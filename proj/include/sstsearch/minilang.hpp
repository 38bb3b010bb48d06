#pragma once

// MiniLang: a small brace/colon-delimited Python-like language used to produce
// ASTs without an external grammar.
//
//   program := stmt*
//   stmt    := "def" IDENT "(" params? ")" ":" block
//            | IDENT ("." IDENT)* "=" expr
//            | "for" IDENT "in" expr ":" block
//            | "while" expr ":" block
//            | "if" expr ":" block ("else" ":" block)?
//            | "return" expr?
//            | expr
//   block   := "{" stmt* "}" | stmt
//   expr    := atom (BINOP atom)*
//   atom    := IDENT ("." IDENT)* ("(" args? ")")? | NUMBER | STRING
//
// A `return` takes an expression only when one starts on the same line.
// Comments run from '#' to end of line.

#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sstsearch/common.hpp"
#include "sstsearch/tree.hpp"

namespace sstsearch {

class SyntaxError : public DataError {
public:
    SyntaxError(std::size_t line, std::size_t column, std::set<std::string> expected, std::string found)
        : DataError(format(line, column, expected, found)),
          line_(line),
          column_(column),
          expected_(std::move(expected)),
          found_(std::move(found)) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }
    const std::set<std::string>& expected() const { return expected_; }
    const std::string& found() const { return found_; }

private:
    static std::string format(std::size_t line, std::size_t column, const std::set<std::string>& expected,
                              const std::string& found) {
        std::string msg = "syntax error at line " + std::to_string(line) + ", column " + std::to_string(column) +
                          ": expected one of {";
        bool first = true;
        for (const auto& e : expected) {
            if (!first) msg += ", ";
            msg += e;
            first = false;
        }
        return msg + "}, found " + found;
    }

    std::size_t line_;
    std::size_t column_;
    std::set<std::string> expected_;
    std::string found_;
};

namespace minilang {

enum class Tok { ident, number, string, keyword, punct, op, end };

struct Token {
    Tok type = Tok::end;
    std::string text;
    std::size_t line = 1;
    std::size_t column = 1;
};

inline bool is_keyword(std::string_view w) {
    return w == "def" || w == "for" || w == "in" || w == "while" || w == "if" || w == "else" || w == "return" ||
           w == "and" || w == "or";
}

inline std::vector<Token> lex(std::string_view src) {
    std::vector<Token> toks;
    std::size_t i = 0, line = 1, col = 1;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    auto at = [&](std::size_t k) -> char { return i + k < src.size() ? src[i + k] : '\0'; };

    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalpha(uc) || c == '_' || uc >= 0x80) {
            std::size_t j = i;
            while (j < src.size()) {
                const auto u = static_cast<unsigned char>(src[j]);
                if (!(std::isalnum(u) || src[j] == '_' || u >= 0x80)) break;
                ++j;
            }
            t.text = std::string(src.substr(i, j - i));
            if (t.text == "and" || t.text == "or") {
                t.type = Tok::op;
            } else {
                t.type = is_keyword(t.text) ? Tok::keyword : Tok::ident;
            }
            advance(j - i);
        } else if (std::isdigit(uc)) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            t.type = Tok::number;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else if (c == '"' || c == '\'') {
            const bool triple = at(1) == c && at(2) == c;
            const std::size_t quote = triple ? 3 : 1;
            std::size_t j = i + quote;
            bool closed = false;
            while (j < src.size()) {
                if (src[j] == '\\' && j + 1 < src.size()) {
                    j += 2;
                    continue;
                }
                if (!triple && src[j] == '\n') break;
                if (src[j] == c && (!triple || (j + 2 < src.size() && src[j + 1] == c && src[j + 2] == c))) {
                    closed = true;
                    break;
                }
                ++j;
            }
            if (!closed) throw SyntaxError(line, col, {"closing quote"}, "end of input");
            t.type = Tok::string;
            t.text = std::string(src.substr(i + quote, j - i - quote));
            advance(j + quote - i);
        } else {
            const char n = at(1);
            std::string two{c, n};
            if (two == "==" || two == "!=" || two == "<=" || two == ">=") {
                t.type = Tok::op;
                t.text = two;
                advance(2);
            } else if (c == '<' || c == '>' || c == '+' || c == '-' || c == '*' || c == '/' || c == '%') {
                t.type = Tok::op;
                t.text = std::string(1, c);
                advance(1);
            } else if (c == '(' || c == ')' || c == ':' || c == '{' || c == '}' || c == ',' || c == '.' || c == '=') {
                t.type = Tok::punct;
                t.text = std::string(1, c);
                advance(1);
            } else {
                throw SyntaxError(line, col, {"token"}, std::string("'") + c + "'");
            }
        }
        toks.push_back(std::move(t));
    }
    Token end;
    end.type = Tok::end;
    end.line = line;
    end.column = col;
    toks.push_back(end);
    return toks;
}

/// String literal contents become a terminal label; whitespace runs are
/// folded to '_' so labels stay single tokens in space-joined sequence files.
inline std::string literal_label(std::string_view raw) {
    std::string out;
    bool in_space = false;
    for (char ch : raw) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += '_';
        in_space = false;
        out += ch;
    }
    return out.empty() ? std::string("\"\"") : out;
}

class Parser {
public:
    explicit Parser(std::string_view src) : toks_(lex(src)) {}

    Tree parse_program(std::string tree_id) {
        b_.open("module");
        while (peek().type != Tok::end) statement();
        b_.close();
        return b_.finish(std::move(tree_id));
    }

private:
    const Token& peek(std::size_t k = 0) const {
        const auto idx = std::min(pos_ + k, toks_.size() - 1);
        return toks_[idx];
    }

    bool is(std::string_view text) const {
        const auto& t = peek();
        return (t.type == Tok::keyword || t.type == Tok::punct || t.type == Tok::op) && t.text == text;
    }

    [[noreturn]] void fail(std::set<std::string> expected) const {
        const auto& t = peek();
        std::string found = t.type == Tok::end ? "end of input" : "\"" + t.text + "\"";
        throw SyntaxError(t.line, t.column, std::move(expected), std::move(found));
    }

    void expect(std::string_view text) {
        if (!is(text)) fail({"\"" + std::string(text) + "\""});
        b_.leaf(std::string(text));
        ++pos_;
    }

    void identifier() {
        if (peek().type != Tok::ident) fail({"identifier"});
        b_.leaf(peek().text);
        ++pos_;
    }

    bool starts_atom() const {
        const auto t = peek().type;
        return t == Tok::ident || t == Tok::number || t == Tok::string;
    }

    void statement() {
        const auto& t = peek();
        if (t.type == Tok::keyword) {
            if (t.text == "def") return function_definition();
            if (t.text == "for") return for_statement();
            if (t.text == "while") return while_statement();
            if (t.text == "if") return if_statement();
            if (t.text == "return") return return_statement();
            fail({"statement"});
        }
        if (t.type == Tok::ident && is_assignment()) return assignment();
        if (!starts_atom()) fail({"\"def\"", "\"for\"", "\"while\"", "\"if\"", "\"return\"", "identifier", "number", "string"});
        b_.open("expression_statement");
        expression();
        b_.close();
    }

    bool is_assignment() const {
        std::size_t k = 0;
        if (peek(k).type != Tok::ident) return false;
        ++k;
        while (peek(k).type == Tok::punct && peek(k).text == "." && peek(k + 1).type == Tok::ident) k += 2;
        return peek(k).type == Tok::punct && peek(k).text == "=";
    }

    void function_definition() {
        b_.open("function_definition");
        expect("def");
        identifier();
        b_.open("parameters");
        expect("(");
        if (!is(")")) {
            if (peek().type != Tok::ident) fail({"\")\"", "identifier"});
            identifier();
            while (is(",")) {
                expect(",");
                identifier();
            }
        }
        expect(")");
        b_.close();
        expect(":");
        block();
        b_.close();
    }

    void assignment() {
        b_.open("assignment");
        dotted_name();
        expect("=");
        expression();
        b_.close();
    }

    void for_statement() {
        b_.open("for_statement");
        expect("for");
        identifier();
        expect("in");
        expression();
        expect(":");
        block();
        b_.close();
    }

    void while_statement() {
        b_.open("while_statement");
        expect("while");
        expression();
        expect(":");
        block();
        b_.close();
    }

    void if_statement() {
        b_.open("if_statement");
        expect("if");
        expression();
        expect(":");
        block();
        if (is("else")) {
            expect("else");
            expect(":");
            block();
        }
        b_.close();
    }

    void return_statement() {
        b_.open("return_statement");
        const auto line = peek().line;
        expect("return");
        if (starts_atom() && peek().line == line) expression();
        b_.close();
    }

    void block() {
        b_.open("block");
        if (is("{")) {
            expect("{");
            while (!is("}")) {
                if (peek().type == Tok::end) fail({"\"}\"", "statement"});
                statement();
            }
            expect("}");
        } else {
            if (peek().type == Tok::end) fail({"\"{\"", "statement"});
            statement();
        }
        b_.close();
    }

    // Binary operators fold left without precedence: a + b * c is ((a + b) * c).
    void expression() {
        std::size_t lhs_start = mark();
        atom();
        while (peek().type == Tok::op) {
            wrap_from(lhs_start, "binary_op");
            b_.leaf(peek().text);
            ++pos_;
            atom();
            b_.close();
        }
    }

    void atom() {
        const auto& t = peek();
        if (t.type == Tok::number) {
            b_.leaf(t.text);
            ++pos_;
            return;
        }
        if (t.type == Tok::string) {
            b_.open("string");
            b_.leaf(literal_label(t.text));
            ++pos_;
            b_.close();
            return;
        }
        if (t.type != Tok::ident) fail({"identifier", "number", "string"});
        const std::size_t start = mark();
        dotted_name();
        if (is("(")) {
            wrap_from(start, "call");
            expect("(");
            if (!is(")")) {
                expression();
                while (is(",")) {
                    expect(",");
                    expression();
                }
            }
            expect(")");
            b_.close();
        }
    }

    void dotted_name() {
        const std::size_t start = mark();
        identifier();
        while (is(".")) {
            wrap_from(start, "attribute");
            expect(".");
            identifier();
            b_.close();
        }
    }

    // Left-recursive constructs (call, attribute, binary_op) are recognized
    // after their first operand is built, so nodes go into a pending arena
    // where a finished operand can be re-parented. finish() renumbers in
    // pre-order.
    std::size_t mark() { return b_.mark(); }
    void wrap_from(std::size_t m, const char* label) { b_.wrap(m, label); }

    class Builder {
    public:
        struct Pending {
            std::string label;
            NodeKind kind;
            std::vector<std::size_t> children;
        };

        void open(std::string label) {
            const auto id = add(std::move(label), NodeKind::nonterminal);
            stack_.push_back(id);
        }

        void close() { stack_.pop_back(); }

        void leaf(std::string label) { add(std::move(label), NodeKind::terminal); }

        /// Position in the current parent's child list.
        std::size_t mark() const { return nodes_[stack_.back()].children.size(); }

        /// Moves the current parent's children from position `m` onward under a
        /// new nonterminal, which becomes the open node.
        void wrap(std::size_t m, std::string label) {
            auto& siblings = nodes_[stack_.back()].children;
            std::vector<std::size_t> moved(siblings.begin() + static_cast<std::ptrdiff_t>(m), siblings.end());
            siblings.resize(m);
            const auto id = add(std::move(label), NodeKind::nonterminal);
            nodes_[id].children = std::move(moved);
            stack_.push_back(id);
        }

        Tree finish(std::string tree_id) {
            TreeBuilder tb;
            emit(0, tb);
            return tb.finish(std::move(tree_id));
        }

    private:
        std::size_t add(std::string label, NodeKind kind) {
            const auto id = nodes_.size();
            nodes_.push_back(Pending{std::move(label), kind, {}});
            if (!stack_.empty()) nodes_[stack_.back()].children.push_back(id);
            return id;
        }

        void emit(std::size_t n, TreeBuilder& tb) const {
            const auto& p = nodes_[n];
            if (p.kind == NodeKind::terminal) {
                tb.leaf(p.label, NodeKind::terminal);
                return;
            }
            tb.open(p.label, NodeKind::nonterminal);
            for (auto c : p.children) emit(c, tb);
            tb.close();
        }

        std::vector<Pending> nodes_;
        std::vector<std::size_t> stack_;
    };

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    Builder b_;
};

}  // namespace minilang

/// Parses MiniLang source into an AST rooted at `module`. Throws SyntaxError
/// with line, column and the expected-token set.
inline Tree parse_minilang(std::string_view source, std::string tree_id = {}) {
    return minilang::Parser(source).parse_program(std::move(tree_id));
}

}  // namespace sstsearch
