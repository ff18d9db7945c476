#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cypherprune/cypher_profile.hpp"
#include "cypherprune/dataset.hpp"

namespace cypherprune {

enum class Strategy {
    kOriginal,
    kRandomStratified,
    kComplexity,
    kLength,
    kCypherTerms,
    kComplexityThenLength,
    kComplexityThenTerms,
};

std::string_view to_string(Strategy s) noexcept;
/// Throws ConfigError for unknown names.
Strategy parse_strategy(std::string_view name);
const std::vector<Strategy>& all_strategies();
/// True for the strategies that rank by a CypherProfile key.
bool needs_profiles(Strategy s) noexcept;

enum class GroupKey { kDataSource, kDatabaseRef };

std::string_view to_string(GroupKey g) noexcept;
GroupKey parse_group_key(std::string_view name);

/// Configuration of one pruning run. Defaults are the published constants:
/// 16,173 selected instances, at most 4,000 per data source, 2,755 per
/// stratum for the random baseline, and the three hardest demo databases and
/// data sources.
struct SelectionSpec {
    Strategy strategy = Strategy::kComplexity;
    std::size_t target_size = 16173;
    std::size_t group_cap = 4000;
    /// Explicit stratum size; when absent, `stratum_percentile` is used.
    std::optional<std::size_t> stratum_size = 2755;
    double stratum_percentile = 0.75;
    std::set<std::string> hard_databases = {"recommendations", "companies", "neoflix"};
    std::set<std::string> hard_sources = {"functional_cypher", "synthetic_gemini",
                                          "text2cypher2023_train"};
    std::uint64_t seed = 42;
    LengthUnit length_unit = LengthUnit::kChars;
    /// Grouping used by the complexity cap.
    GroupKey group_by = GroupKey::kDataSource;

    /// Throws ConfigError when an invariant is violated.
    void validate() const;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    /// Missing keys keep their defaults. Throws ConfigError.
    static SelectionSpec from_json(const nlohmann::json& j, SelectionSpec base);
    static SelectionSpec from_json(const nlohmann::json& j);
};

struct GroupStats {
    /// Train records in the group (complexity: candidates only).
    std::size_t available = 0;
    /// Left after the per-group cap or stratum sample.
    std::size_t eligible = 0;
    std::size_t selected = 0;

    bool operator==(const GroupStats&) const = default;
};

/// Which side of min(target_size, achievable) determined the output size.
enum class SizeBound { kTargetSize, kAchievable };

struct SelectionResult {
    /// Training order.
    std::vector<std::string> selected;
    std::map<std::string, GroupStats> per_group_stats;
    std::size_t achievable = 0;
    SizeBound bound = SizeBound::kTargetSize;
    /// Set when fewer than target_size records could be selected.
    std::optional<std::string> shortfall;
    nlohmann::ordered_json manifest;
};

/// Values stamped into manifests that are not part of the computation.
struct RunStamp {
    std::string created_at;
    const TermSet* terms = nullptr;
};

/// UTC ISO-8601 time; honours SOURCE_DATE_EPOCH when set.
std::string current_timestamp();
std::string_view tool_version() noexcept;

/// Nearest-rank percentile of the train split's data-source group sizes.
std::size_t compute_stratum_size(const DatasetFile& file, double percentile);

SelectionResult select_original(const DatasetFile& file, const SelectionSpec& spec,
                                const RunStamp& stamp = {});
SelectionResult select_complexity(const DatasetFile& file, const SelectionSpec& spec,
                                  const RunStamp& stamp = {});
SelectionResult select_by_rank(const DatasetFile& file, const ProfileTable& profiles,
                               const SelectionSpec& spec, const RunStamp& stamp = {});
SelectionResult select_combined(const DatasetFile& file, const ProfileTable& profiles,
                                const SelectionSpec& spec, const RunStamp& stamp = {});
SelectionResult select_random_stratified(const DatasetFile& file, const SelectionSpec& spec,
                                         const RunStamp& stamp = {});

/// Dispatches on spec.strategy. `profiles` may be null for strategies that
/// do not rank.
SelectionResult run_selection(const DatasetFile& file, const ProfileTable* profiles,
                              const SelectionSpec& spec, const RunStamp& stamp = {});

/// Selected train records in selection order, followed by every test record
/// in source order.
std::vector<DatasetRecord> materialize(const DatasetFile& file, const SelectionResult& result);

} // namespace cypherprune
