#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cypherprune/cypher_lexer.hpp"

namespace cypherprune {

class DatasetFile;

/// Canonical Cypher terms to count. Terms are upper-cased with single spaces
/// between words ("order  by" -> "ORDER BY"); multi-word terms match runs of
/// consecutive keyword tokens.
class TermSet {
  public:
    /// Throws ConfigError if `terms` is empty or contains a blank entry.
    explicit TermSet(const std::vector<std::string>& terms);

    static const TermSet& defaults();

    [[nodiscard]] const std::vector<std::string>& terms() const noexcept { return terms_; }
    /// Default keywords plus every word appearing in a term.
    [[nodiscard]] const KeywordSet& keywords() const noexcept { return keywords_; }

    struct Entry {
        std::string term;
        std::vector<std::string> words;
    };
    /// Terms keyed by first word, longest first.
    [[nodiscard]] const std::vector<Entry>* starting_with(const std::string& upper_word) const;

  private:
    std::vector<std::string> terms_;
    KeywordSet keywords_;
    std::unordered_map<std::string, std::vector<Entry>> by_first_word_;
};

enum class LengthUnit { kChars, kTokens };

std::string_view to_string(LengthUnit unit) noexcept;
LengthUnit parse_length_unit(std::string_view text);

struct CypherProfile {
    /// Code points of the whitespace-normalised query.
    std::size_t char_length = 0;
    /// Tokens other than whitespace and comments.
    std::size_t token_length = 0;
    /// Only non-zero counts are stored.
    std::map<std::string, std::size_t> term_counts;
    std::size_t term_total = 0;
    /// Lexer closed an unterminated string or comment at end of input.
    bool recovered = false;

    [[nodiscard]] std::size_t count(const std::string& term) const;
    [[nodiscard]] std::size_t length(LengthUnit unit) const noexcept {
        return unit == LengthUnit::kChars ? char_length : token_length;
    }
    [[nodiscard]] nlohmann::ordered_json to_json() const;

    bool operator==(const CypherProfile&) const = default;
};

CypherProfile profile(std::string_view query, const TermSet& terms = TermSet::defaults());

using ProfileTable = std::unordered_map<std::string, CypherProfile>;

/// One profile per record keyed by record id. `threads` == 0 picks the
/// hardware concurrency; the result does not depend on it.
ProfileTable profile_dataset(const DatasetFile& file, const TermSet& terms = TermSet::defaults(),
                             unsigned threads = 1);

/// Aggregate view over a set of profiles.
struct CorpusSummary {
    std::size_t count = 0;
    double mean_char_length = 0.0;
    double mean_token_length = 0.0;
    double mean_term_total = 0.0;
    std::size_t recovered = 0;
    /// Nearest-rank 10th..100th percentiles of char_length and token_length.
    std::vector<std::size_t> char_length_deciles;
    std::vector<std::size_t> token_length_deciles;
    /// term_total value -> number of queries.
    std::map<std::size_t, std::size_t> term_total_histogram;
    /// Summed counts per term.
    std::map<std::string, std::size_t> term_frequencies;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

CorpusSummary summarize(const std::vector<const CypherProfile*>& profiles);

/// Nearest-rank percentile of an unsorted sample: the ceil(p*n)-th smallest.
/// `fraction` must be in (0, 1]; `values` must be non-empty.
std::size_t nearest_rank(std::vector<std::size_t> values, double fraction);

} // namespace cypherprune
