#include "cypherprune/selection.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <unordered_set>
#include <utility>

#include "cypherprune/errors.hpp"
#include "cypherprune/sampling.hpp"

namespace cypherprune {

using nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 7> kStrategyNames = {{
    {Strategy::kOriginal, "original"},
    {Strategy::kRandomStratified, "random_stratified"},
    {Strategy::kComplexity, "complexity"},
    {Strategy::kLength, "length"},
    {Strategy::kCypherTerms, "cypher_terms"},
    {Strategy::kComplexityThenLength, "complexity_then_length"},
    {Strategy::kComplexityThenTerms, "complexity_then_terms"},
}};

constexpr std::string_view kVersion = "0.3.1";

} // namespace

std::string_view to_string(Strategy s) noexcept {
    for (auto [value, name] : kStrategyNames) {
        if (value == s) return name;
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view name) {
    for (auto [value, known] : kStrategyNames) {
        if (known == name) return value;
    }
    throw ConfigError("unknown strategy \"" + std::string(name) + "\"");
}

const std::vector<Strategy>& all_strategies() {
    static const std::vector<Strategy> kAll = [] {
        std::vector<Strategy> v;
        for (auto [value, name] : kStrategyNames) v.push_back(value);
        return v;
    }();
    return kAll;
}

bool needs_profiles(Strategy s) noexcept {
    return s == Strategy::kLength || s == Strategy::kCypherTerms ||
           s == Strategy::kComplexityThenLength || s == Strategy::kComplexityThenTerms;
}

std::string_view to_string(GroupKey g) noexcept {
    return g == GroupKey::kDataSource ? "data_source" : "database_ref";
}

GroupKey parse_group_key(std::string_view name) {
    if (name == "data_source") return GroupKey::kDataSource;
    if (name == "database_ref") return GroupKey::kDatabaseRef;
    throw ConfigError("group key must be \"data_source\" or \"database_ref\"");
}

void SelectionSpec::validate() const {
    if (target_size < 1) throw ConfigError("target_size must be >= 1");
    if (group_cap < 1) throw ConfigError("group_cap must be >= 1");
    if (stratum_size && *stratum_size < 1) throw ConfigError("stratum_size must be >= 1");
    if (!(stratum_percentile > 0.0 && stratum_percentile <= 1.0)) {
        throw ConfigError("stratum_percentile must be in (0, 1]");
    }
    bool complexity_family = strategy == Strategy::kComplexity ||
                             strategy == Strategy::kComplexityThenLength ||
                             strategy == Strategy::kComplexityThenTerms;
    if (complexity_family && hard_databases.empty() && hard_sources.empty()) {
        throw ConfigError("complexity selection needs at least one hard database or data source");
    }
}

ordered_json SelectionSpec::to_json() const {
    ordered_json j;
    j["strategy"] = to_string(strategy);
    j["target_size"] = target_size;
    j["group_cap"] = group_cap;
    j["stratum_size"] = stratum_size ? ordered_json(*stratum_size) : ordered_json(nullptr);
    j["stratum_percentile"] = stratum_percentile;
    j["hard_databases"] = hard_databases;
    j["hard_sources"] = hard_sources;
    j["seed"] = seed;
    j["length_unit"] = to_string(length_unit);
    j["group_by"] = to_string(group_by);
    return j;
}

SelectionSpec SelectionSpec::from_json(const nlohmann::json& j, SelectionSpec base) {
    try {
        if (j.contains("strategy")) base.strategy = parse_strategy(j["strategy"].get<std::string>());
        if (j.contains("target_size")) base.target_size = j["target_size"].get<std::size_t>();
        if (j.contains("group_cap")) base.group_cap = j["group_cap"].get<std::size_t>();
        if (j.contains("stratum_size")) {
            base.stratum_size = j["stratum_size"].is_null()
                                    ? std::nullopt
                                    : std::optional<std::size_t>(j["stratum_size"].get<std::size_t>());
        }
        if (j.contains("stratum_percentile")) {
            base.stratum_percentile = j["stratum_percentile"].get<double>();
        }
        if (j.contains("hard_databases")) {
            base.hard_databases = j["hard_databases"].get<std::set<std::string>>();
        }
        if (j.contains("hard_sources")) {
            base.hard_sources = j["hard_sources"].get<std::set<std::string>>();
        }
        if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("length_unit")) {
            base.length_unit = parse_length_unit(j["length_unit"].get<std::string>());
        }
        if (j.contains("group_by")) base.group_by = parse_group_key(j["group_by"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("selection config: ") + e.what());
    }
    return base;
}

SelectionSpec SelectionSpec::from_json(const nlohmann::json& j) { return from_json(j, SelectionSpec{}); }

std::string current_timestamp() {
    std::time_t t = 0;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string_view tool_version() noexcept { return kVersion; }

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> train_indices(const DatasetFile& file) {
    std::vector<std::size_t> out;
    const auto& records = file.records();
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].split == Split::kTrain) out.push_back(i);
    }
    return out;
}

std::string group_of(const DatasetRecord& r, GroupKey key) {
    return key == GroupKey::kDataSource ? r.data_source : r.database_ref.value_or("");
}

/// Indices grouped by key, each group in source order.
std::map<std::string, std::vector<std::size_t>> group_indices(const DatasetFile& file,
                                                              const std::vector<std::size_t>& idx,
                                                              GroupKey key) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (auto i : idx) groups[group_of(file.records()[i], key)].push_back(i);
    return groups;
}

/// Samples `k` of `pool` (kept in source order) with the stream named `stream`.
std::vector<std::size_t> sample_from(const std::vector<std::size_t>& pool, std::size_t k,
                                     std::uint64_t seed, std::string_view stream) {
    if (k >= pool.size()) return pool;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (auto pos : sample_indices(pool.size(), k, derive_seed(seed, stream))) out.push_back(pool[pos]);
    return out;
}

void count_selected(const DatasetFile& file, const std::vector<std::size_t>& chosen, GroupKey key,
                    std::map<std::string, GroupStats>& stats) {
    for (auto i : chosen) ++stats[group_of(file.records()[i], key)].selected;
}

void finish_size(SelectionResult& r, std::size_t target, std::size_t achievable) {
    r.achievable = achievable;
    if (achievable < target) {
        r.bound = SizeBound::kAchievable;
        r.shortfall = "requested " + std::to_string(target) + " records but only " +
                      std::to_string(achievable) + " are achievable";
    } else {
        r.bound = SizeBound::kTargetSize;
    }
}

ordered_json build_manifest(const DatasetFile& file, const SelectionSpec& spec,
                            const SelectionResult& r, const RunStamp& stamp,
                            std::optional<std::size_t> resolved_stratum) {
    ordered_json m;
    m["tool"] = {{"name", "cypherprune"}, {"version", tool_version()}};
    m["created_at"] = stamp.created_at;
    m["dataset"] = {{"content_hash", file.content_hash()},
                    {"records", file.size()},
                    {"train_records", file.counts().by_split.count("train") != 0
                                          ? file.counts().by_split.at("train")
                                          : 0}};
    auto spec_json = spec.to_json();
    if (resolved_stratum) spec_json["resolved_stratum_size"] = *resolved_stratum;
    m["spec"] = std::move(spec_json);
    if (stamp.terms != nullptr) m["term_set"] = stamp.terms->terms();
    m["sampling"] = {
        {"rng", "mt19937_64 with modulo-rejection bounding"},
        {"stream_seed", "splitmix64(seed ^ splitmix64(fnv1a64(stream_name)))"},
        {"method", "uniform without replacement (partial Fisher-Yates)"},
        {"tie_break", "record_id ascending"},
        {"split", "train only; test records pass through"},
    };
    ordered_json groups = ordered_json::object();
    for (const auto& [key, g] : r.per_group_stats) {
        groups[key] = {{"available", g.available}, {"eligible", g.eligible}, {"selected", g.selected}};
    }
    m["result"] = {
        {"selected", r.selected.size()},
        {"achievable", r.achievable},
        {"active_bound", r.bound == SizeBound::kTargetSize ? "target_size" : "achievable"},
        {"shortfall", r.shortfall ? ordered_json(*r.shortfall) : ordered_json(nullptr)},
        {"target_size_applies", spec.strategy != Strategy::kOriginal},
        {"per_group", std::move(groups)},
    };
    return m;
}

std::vector<std::string> ids_of(const DatasetFile& file, const std::vector<std::size_t>& idx) {
    std::vector<std::string> ids;
    ids.reserve(idx.size());
    for (auto i : idx) ids.push_back(file.records()[i].record_id);
    return ids;
}

struct CapOutcome {
    std::vector<std::size_t> chosen;  // source order
    std::map<std::string, GroupStats> stats;
    std::size_t achievable = 0;
};

CapOutcome complexity_core(const DatasetFile& file, const SelectionSpec& spec) {
    std::vector<std::size_t> candidates;
    for (auto i : train_indices(file)) {
        const auto& r = file.records()[i];
        bool db_hit = r.database_ref && spec.hard_databases.count(*r.database_ref) != 0;
        bool src_hit = spec.hard_sources.count(r.data_source) != 0;
        if (db_hit || src_hit) candidates.push_back(i);
    }
    if (candidates.empty()) {
        throw SelectionError(SelectionErrc::kEmptyCandidateSet,
                             "no train record matches the hard database or data source filters");
    }

    CapOutcome out;
    std::vector<std::size_t> capped;
    for (const auto& [key, members] : group_indices(file, candidates, spec.group_by)) {
        auto kept = sample_from(members, spec.group_cap, spec.seed, "cap:" + key);
        out.stats[key] = {members.size(), kept.size(), 0};
        capped.insert(capped.end(), kept.begin(), kept.end());
    }
    std::sort(capped.begin(), capped.end());
    out.achievable = capped.size();
    out.chosen = sample_from(capped, spec.target_size, spec.seed, "downsample");
    count_selected(file, out.chosen, spec.group_by, out.stats);
    return out;
}

void require_strategy(const SelectionSpec& spec, std::initializer_list<Strategy> allowed) {
    if (std::find(allowed.begin(), allowed.end(), spec.strategy) == allowed.end()) {
        throw SelectionError(SelectionErrc::kInvalidSpec,
                             "strategy " + std::string(to_string(spec.strategy)) +
                                 " is not handled by this selector");
    }
    spec.validate();
}

const CypherProfile& profile_for(const ProfileTable& profiles, const std::string& id) {
    auto it = profiles.find(id);
    if (it == profiles.end()) {
        throw SelectionError(SelectionErrc::kMissingProfile, "no profile for record '" + id + "'");
    }
    return it->second;
}

/// Sorts by key descending, ties by ascending record id.
void order_by_key(const DatasetFile& file, std::vector<std::size_t>& idx,
                  const std::vector<std::size_t>& keys_by_record) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (keys_by_record[a] != keys_by_record[b]) return keys_by_record[a] > keys_by_record[b];
        return file.records()[a].record_id < file.records()[b].record_id;
    });
}

std::vector<std::size_t> keys_for(const DatasetFile& file, const ProfileTable& profiles,
                                  const std::vector<std::size_t>& idx, bool by_terms,
                                  LengthUnit unit) {
    std::vector<std::size_t> keys(file.size(), 0);
    for (auto i : idx) {
        const auto& p = profile_for(profiles, file.records()[i].record_id);
        keys[i] = by_terms ? p.term_total : p.length(unit);
    }
    return keys;
}

} // namespace

std::size_t compute_stratum_size(const DatasetFile& file, double percentile) {
    auto groups = group_indices(file, train_indices(file), GroupKey::kDataSource);
    if (groups.empty()) {
        throw SelectionError(SelectionErrc::kInvalidSpec, "no train records to stratify");
    }
    std::vector<std::size_t> sizes;
    for (const auto& [key, members] : groups) sizes.push_back(members.size());
    return nearest_rank(std::move(sizes), percentile);
}

SelectionResult select_original(const DatasetFile& file, const SelectionSpec& spec,
                                const RunStamp& stamp) {
    require_strategy(spec, {Strategy::kOriginal});
    SelectionResult r;
    auto train = train_indices(file);
    for (const auto& [key, members] : group_indices(file, train, GroupKey::kDataSource)) {
        r.per_group_stats[key] = {members.size(), members.size(), members.size()};
    }
    r.selected = ids_of(file, train);
    r.achievable = train.size();
    r.bound = SizeBound::kAchievable;
    r.manifest = build_manifest(file, spec, r, stamp, std::nullopt);
    return r;
}

SelectionResult select_complexity(const DatasetFile& file, const SelectionSpec& spec,
                                  const RunStamp& stamp) {
    require_strategy(spec, {Strategy::kComplexity});
    auto core = complexity_core(file, spec);
    SelectionResult r;
    r.selected = ids_of(file, core.chosen);
    r.per_group_stats = std::move(core.stats);
    finish_size(r, spec.target_size, core.achievable);
    r.manifest = build_manifest(file, spec, r, stamp, std::nullopt);
    return r;
}

SelectionResult select_by_rank(const DatasetFile& file, const ProfileTable& profiles,
                               const SelectionSpec& spec, const RunStamp& stamp) {
    require_strategy(spec, {Strategy::kLength, Strategy::kCypherTerms});
    auto train = train_indices(file);
    auto keys = keys_for(file, profiles, train, spec.strategy == Strategy::kCypherTerms,
                         spec.length_unit);
    order_by_key(file, train, keys);

    SelectionResult r;
    for (const auto& [key, members] : group_indices(file, train, GroupKey::kDataSource)) {
        r.per_group_stats[key] = {members.size(), members.size(), 0};
    }
    const std::size_t take = std::min(spec.target_size, train.size());
    std::vector<std::size_t> chosen(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(take));
    count_selected(file, chosen, GroupKey::kDataSource, r.per_group_stats);
    r.selected = ids_of(file, chosen);
    finish_size(r, spec.target_size, train.size());
    r.manifest = build_manifest(file, spec, r, stamp, std::nullopt);
    return r;
}

SelectionResult select_combined(const DatasetFile& file, const ProfileTable& profiles,
                                const SelectionSpec& spec, const RunStamp& stamp) {
    require_strategy(spec, {Strategy::kComplexityThenLength, Strategy::kComplexityThenTerms});
    auto core = complexity_core(file, spec);
    auto keys = keys_for(file, profiles, core.chosen,
                         spec.strategy == Strategy::kComplexityThenTerms, spec.length_unit);
    order_by_key(file, core.chosen, keys);

    SelectionResult r;
    r.selected = ids_of(file, core.chosen);
    r.per_group_stats = std::move(core.stats);
    finish_size(r, spec.target_size, core.achievable);
    r.manifest = build_manifest(file, spec, r, stamp, std::nullopt);
    return r;
}

SelectionResult select_random_stratified(const DatasetFile& file, const SelectionSpec& spec,
                                         const RunStamp& stamp) {
    require_strategy(spec, {Strategy::kRandomStratified});
    const std::size_t stratum =
        spec.stratum_size ? *spec.stratum_size : compute_stratum_size(file, spec.stratum_percentile);

    SelectionResult r;
    std::vector<std::size_t> pooled;
    for (const auto& [key, members] :
         group_indices(file, train_indices(file), GroupKey::kDataSource)) {
        auto kept = sample_from(members, stratum, spec.seed, "stratum:" + key);
        r.per_group_stats[key] = {members.size(), kept.size(), 0};
        pooled.insert(pooled.end(), kept.begin(), kept.end());
    }
    std::sort(pooled.begin(), pooled.end());
    auto chosen = sample_from(pooled, spec.target_size, spec.seed, "downsample");
    count_selected(file, chosen, GroupKey::kDataSource, r.per_group_stats);
    r.selected = ids_of(file, chosen);
    finish_size(r, spec.target_size, pooled.size());
    r.manifest = build_manifest(file, spec, r, stamp, stratum);
    return r;
}

SelectionResult run_selection(const DatasetFile& file, const ProfileTable* profiles,
                              const SelectionSpec& spec, const RunStamp& stamp) {
    if (needs_profiles(spec.strategy) && profiles == nullptr) {
        throw SelectionError(SelectionErrc::kMissingProfile,
                             std::string(to_string(spec.strategy)) + " requires query profiles");
    }
    switch (spec.strategy) {
    case Strategy::kOriginal: return select_original(file, spec, stamp);
    case Strategy::kRandomStratified: return select_random_stratified(file, spec, stamp);
    case Strategy::kComplexity: return select_complexity(file, spec, stamp);
    case Strategy::kLength:
    case Strategy::kCypherTerms: return select_by_rank(file, *profiles, spec, stamp);
    case Strategy::kComplexityThenLength:
    case Strategy::kComplexityThenTerms: return select_combined(file, *profiles, spec, stamp);
    }
    throw SelectionError(SelectionErrc::kInvalidSpec, "unhandled strategy");
}

std::vector<DatasetRecord> materialize(const DatasetFile& file, const SelectionResult& result) {
    std::vector<DatasetRecord> out;
    out.reserve(result.selected.size());
    for (const auto& id : result.selected) {
        const auto* r = file.find(id);
        if (r == nullptr) {
            throw SelectionError(SelectionErrc::kInvalidSpec, "selected id '" + id + "' not in dataset");
        }
        out.push_back(*r);
    }
    for (const auto& r : file.records()) {
        if (r.split == Split::kTest) out.push_back(r);
    }
    return out;
}

} // namespace cypherprune
