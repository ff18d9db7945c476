#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace cypherprune {

enum class TokenKind {
    kKeyword,
    kIdentifier,
    kStringLiteral,
    kNumberLiteral,
    kSymbol,
    kComment,
    kWhitespace,
};

std::string_view to_string(TokenKind kind) noexcept;

/// A slice of the lexed query. `text` points into the caller's buffer, so the
/// query must outlive the token stream.
struct CypherToken {
    TokenKind kind;
    std::string_view text;
    std::size_t offset;

    [[nodiscard]] bool significant() const noexcept {
        return kind != TokenKind::kWhitespace && kind != TokenKind::kComment;
    }
};

enum class LexIssueKind { kUnterminatedString, kUnterminatedComment };

struct LexIssue {
    LexIssueKind kind;
    std::size_t offset;
};

struct LexResult {
    std::vector<CypherToken> tokens;
    /// Recovered problems; the offending token was closed at end of input.
    std::vector<LexIssue> issues;
};

/// Case-insensitive set of words the lexer classifies as keywords.
class KeywordSet {
  public:
    KeywordSet() = default;
    KeywordSet(std::initializer_list<std::string_view> words);

    void insert(std::string_view word);
    [[nodiscard]] bool contains(std::string_view word) const;
    [[nodiscard]] std::size_t size() const noexcept { return words_.size(); }

    /// Cypher clause, operator and function words commonly treated as reserved.
    static const KeywordSet& cypher_defaults();

  private:
    std::unordered_set<std::string> words_;
    std::size_t max_len_ = 0;
};

/// Lossless tokenisation: concatenating every token's text reproduces `query`.
/// String literals, backtick-quoted names and comments are single tokens, so
/// words inside them are never keywords. A word directly preceded by '.', ':'
/// or '$', or directly followed by ':', is a property/label/parameter/map key
/// and is lexed as an identifier.
LexResult lex(std::string_view query);
LexResult lex(std::string_view query, const KeywordSet& keywords);

} // namespace cypherprune
