#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace cypherprune {

class DatasetFile;

struct EvalPair {
    std::string record_id;
    /// Raw model output; may be empty.
    std::string generated;
    std::string reference;
};

struct LexicalScores {
    double google_bleu = 0.0;
    double exact_match = 0.0;
    std::size_t n = 0;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// Strips surrounding ``` fences (with an optional language tag), a leading
/// case-insensitive "cypher:" prefix and outer whitespace, repeating until
/// nothing changes, then collapses internal whitespace. Idempotent.
std::string postprocess(std::string_view generated);

/// Whitespace split after isolating ASCII punctuation (except '_'). Quoted
/// literals ('...', "...", `...`) stay whole.
std::vector<std::string> tokenize_for_bleu(std::string_view text);

/// Clipped n-gram matches and n-gram totals summed over orders 1..max_n.
struct GleuCounts {
    std::uint64_t matches = 0;
    std::uint64_t hypothesis_ngrams = 0;
    std::uint64_t reference_ngrams = 0;

    GleuCounts& operator+=(const GleuCounts& o) noexcept {
        matches += o.matches;
        hypothesis_ngrams += o.hypothesis_ngrams;
        reference_ngrams += o.reference_ngrams;
        return *this;
    }
    /// min(precision, recall) = matches / max(totals); 0 when both totals are 0.
    [[nodiscard]] double score() const noexcept;

    bool operator==(const GleuCounts&) const = default;
};

GleuCounts gleu_counts(std::span<const std::string> hypothesis, std::span<const std::string> reference,
                       std::size_t max_n = 4);

/// Per-pair outcome; corpus scores are sums over these.
struct PairScore {
    std::string record_id;
    GleuCounts counts;
    bool exact = false;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    static PairScore from_json(const nlohmann::json& j);
};

/// Postprocesses generated text, whitespace-normalises the reference, and
/// scores each pair. Throws MetricError(kEmptyInput / kInvalidArgument).
std::vector<PairScore> score_pairs(std::span<const EvalPair> pairs, std::size_t max_n = 4);

/// Micro-averaged corpus scores. Throws MetricError(kEmptyInput).
LexicalScores aggregate(std::span<const PairScore> scores);

double google_bleu(std::span<const EvalPair> pairs, std::size_t max_n = 4);
double exact_match(std::span<const EvalPair> pairs);

struct GroupedScores {
    LexicalScores all;
    std::map<std::string, LexicalScores> groups;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

using Grouping = std::unordered_map<std::string, std::string>;

/// Scores each group independently; the "all" row is computed over the union.
/// Throws MetricError(kUnknownRecordId) for pairs missing from `grouping`.
GroupedScores grouped_report(std::span<const PairScore> scores, const Grouping& grouping);
GroupedScores grouped_report(std::span<const EvalPair> pairs, const Grouping& grouping,
                             std::size_t max_n = 4);

/// record_id -> data_source / database_ref ("" when absent).
Grouping group_by_data_source(const DatasetFile& file);
Grouping group_by_database_ref(const DatasetFile& file);

/// Reads a predictions JSON-lines file ({record_id|instance_id, generated|prediction})
/// and pairs it with references from `dataset`. Throws DatasetError.
std::vector<EvalPair> load_predictions(const std::filesystem::path& path, const DatasetFile& dataset);

} // namespace cypherprune
