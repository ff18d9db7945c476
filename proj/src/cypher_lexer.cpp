#include "cypherprune/cypher_lexer.hpp"

#include <array>
#include <algorithm>
#include <cctype>

#include "cypherprune/text.hpp"

namespace cypherprune {

std::string_view to_string(TokenKind kind) noexcept {
    switch (kind) {
    case TokenKind::kKeyword: return "keyword";
    case TokenKind::kIdentifier: return "identifier";
    case TokenKind::kStringLiteral: return "literal_string";
    case TokenKind::kNumberLiteral: return "literal_number";
    case TokenKind::kSymbol: return "symbol";
    case TokenKind::kComment: return "comment";
    case TokenKind::kWhitespace: return "whitespace";
    }
    return "unknown";
}

KeywordSet::KeywordSet(std::initializer_list<std::string_view> words) {
    for (auto w : words) insert(w);
}

void KeywordSet::insert(std::string_view word) {
    if (word.empty()) return;
    words_.insert(to_upper_ascii(word));
    max_len_ = std::max(max_len_, word.size());
}

bool KeywordSet::contains(std::string_view word) const {
    if (word.empty() || word.size() > max_len_) return false;
    // keywords are short, so upper-case into a stack buffer
    std::array<char, 64> buf{};
    if (word.size() > buf.size()) return words_.count(to_upper_ascii(word)) != 0;
    for (std::size_t i = 0; i < word.size(); ++i) {
        char c = word[i];
        buf[i] = (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
    }
    return words_.count(std::string(buf.data(), word.size())) != 0;
}

const KeywordSet& KeywordSet::cypher_defaults() {
    static const KeywordSet kDefaults{
        "ALL",      "AND",     "AS",        "ASC",      "ASCENDING", "BY",       "CALL",
        "CASE",     "CONTAINS", "COUNT",    "CREATE",   "CSV",       "DELETE",   "DESC",
        "DESCENDING", "DETACH", "DISTINCT", "ELSE",     "END",       "ENDS",     "EXISTS",
        "FALSE",    "FOREACH", "FROM",      "HEADERS",  "IN",        "IS",       "LIMIT",
        "LOAD",     "MATCH",   "MERGE",     "NOT",      "NULL",      "ON",       "OPTIONAL",
        "OR",       "ORDER",   "REMOVE",    "RETURN",   "SET",       "SKIP",     "STARTS",
        "THEN",     "TRUE",    "UNION",     "UNWIND",   "USE",       "WHEN",     "WHERE",
        "WITH",     "XOR",     "YIELD",
    };
    return kDefaults;
}

namespace {

constexpr bool is_word_start(unsigned char c) noexcept {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c >= 0x80;
}

constexpr bool is_word_char(unsigned char c) noexcept {
    return is_word_start(c) || (c >= '0' && c <= '9');
}

constexpr bool is_digit(unsigned char c) noexcept { return c >= '0' && c <= '9'; }

constexpr std::array<std::string_view, 9> kTwoCharSymbols = {"<>", "<=", ">=", "=~", "->",
                                                             "<-", "..", "+=", "!="};

class Lexer {
  public:
    Lexer(std::string_view src, const KeywordSet& keywords) : src_(src), keywords_(keywords) {}

    LexResult run() {
        while (pos_ < src_.size()) step();
        return std::move(out_);
    }

  private:
    [[nodiscard]] unsigned char at(std::size_t i) const noexcept {
        return i < src_.size() ? static_cast<unsigned char>(src_[i]) : 0;
    }

    void emit(TokenKind kind, std::size_t begin) {
        out_.tokens.push_back({kind, src_.substr(begin, pos_ - begin), begin});
    }

    void step() {
        const std::size_t begin = pos_;
        const unsigned char c = at(pos_);

        if (is_space(static_cast<char>(c))) {
            while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
            emit(TokenKind::kWhitespace, begin);
        } else if (c == '/' && at(pos_ + 1) == '/') {
            while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            emit(TokenKind::kComment, begin);
        } else if (c == '/' && at(pos_ + 1) == '*') {
            auto end = src_.find("*/", pos_ + 2);
            if (end == std::string_view::npos) {
                out_.issues.push_back({LexIssueKind::kUnterminatedComment, begin});
                pos_ = src_.size();
            } else {
                pos_ = end + 2;
            }
            emit(TokenKind::kComment, begin);
        } else if (c == '\'' || c == '"') {
            quoted(c, /*backslash_escapes=*/true);
            emit(TokenKind::kStringLiteral, begin);
        } else if (c == '`') {
            quoted(c, /*backslash_escapes=*/false);
            emit(TokenKind::kIdentifier, begin);
        } else if (is_digit(c)) {
            number();
            emit(TokenKind::kNumberLiteral, begin);
        } else if (is_word_start(c)) {
            while (pos_ < src_.size() && is_word_char(at(pos_))) ++pos_;
            emit(classify_word(begin), begin);
        } else {
            symbol();
            emit(TokenKind::kSymbol, begin);
        }
    }

    // Closing quote doubles as escape for backticks (``), backslash otherwise.
    void quoted(unsigned char quote, bool backslash_escapes) {
        const std::size_t begin = pos_;
        ++pos_;
        while (pos_ < src_.size()) {
            unsigned char c = at(pos_);
            if (backslash_escapes && c == '\\') {
                pos_ = std::min(pos_ + 2, src_.size());
                continue;
            }
            if (c == quote) {
                if (!backslash_escapes && at(pos_ + 1) == quote) {
                    pos_ += 2;
                    continue;
                }
                ++pos_;
                return;
            }
            ++pos_;
        }
        out_.issues.push_back({LexIssueKind::kUnterminatedString, begin});
    }

    void number() {
        if (at(pos_) == '0' && (at(pos_ + 1) == 'x' || at(pos_ + 1) == 'X')) {
            pos_ += 2;
            while (std::isxdigit(at(pos_)) != 0) ++pos_;
            return;
        }
        while (is_digit(at(pos_))) ++pos_;
        // "1..3" is a range, not a decimal
        if (at(pos_) == '.' && is_digit(at(pos_ + 1))) {
            ++pos_;
            while (is_digit(at(pos_))) ++pos_;
        }
        if ((at(pos_) == 'e' || at(pos_) == 'E') &&
            (is_digit(at(pos_ + 1)) ||
             ((at(pos_ + 1) == '+' || at(pos_ + 1) == '-') && is_digit(at(pos_ + 2))))) {
            pos_ += 2;
            while (is_digit(at(pos_))) ++pos_;
        }
    }

    void symbol() {
        auto rest = src_.substr(pos_);
        for (auto op : kTwoCharSymbols) {
            if (rest.starts_with(op)) {
                pos_ += op.size();
                return;
            }
        }
        // one code point
        ++pos_;
        while (pos_ < src_.size() && (at(pos_) & 0xC0U) == 0x80U) ++pos_;
    }

    TokenKind classify_word(std::size_t begin) const {
        auto word = src_.substr(begin, pos_ - begin);
        if (!keywords_.contains(word)) return TokenKind::kIdentifier;
        if (begin > 0) {
            char prev = src_[begin - 1];
            if (prev == '.' || prev == ':' || prev == '$') return TokenKind::kIdentifier;
        }
        if (at(pos_) == ':') return TokenKind::kIdentifier;
        return TokenKind::kKeyword;
    }

    std::string_view src_;
    const KeywordSet& keywords_;
    std::size_t pos_ = 0;
    LexResult out_;
};

} // namespace

LexResult lex(std::string_view query) { return lex(query, KeywordSet::cypher_defaults()); }

LexResult lex(std::string_view query, const KeywordSet& keywords) {
    return Lexer(query, keywords).run();
}

} // namespace cypherprune
