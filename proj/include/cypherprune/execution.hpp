#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cypherprune/metrics.hpp"

namespace cypherprune {

class DatasetFile;

enum class ExecStatus { kOk, kError, kTimeout, kSkipped };

std::string_view to_string(ExecStatus s) noexcept;
ExecStatus parse_exec_status(std::string_view s);

/// Result rows are JSON values, normally objects keyed by column name.
using ResultRow = nlohmann::json;

struct CanonicalForm {
    std::string text;
    /// Some value (e.g. a binary payload) was replaced by a typed placeholder.
    bool has_placeholder = false;
};

/// Renders each row with keys sorted ascending, floats at 10 significant
/// digits and nulls as `null`, then sorts the rendered rows and joins them
/// with '\n'. Row order never affects the result.
CanonicalForm canonicalize(std::span<const ResultRow> rows);

struct ExecutionOutcome {
    ExecStatus status = ExecStatus::kSkipped;
    std::vector<ResultRow> rows;
    /// Present iff status == kOk.
    std::optional<std::string> canonical;
    /// Present iff status is kError or kTimeout.
    std::optional<std::string> error_detail;
    bool has_placeholder = false;

    static ExecutionOutcome ok(std::vector<ResultRow> rows);
    static ExecutionOutcome error(std::string detail);
    static ExecutionOutcome timeout(std::string detail);
    static ExecutionOutcome skipped();
};

/// Connection details for one logical database.
struct DatabaseTarget {
    std::string uri;
    std::string user;
    std::string password;
    /// Database name on the server; defaults to the database_ref.
    std::string database;
};

enum class BindingKind { kLive, kReplay };

struct ExecutorBinding {
    BindingKind kind = BindingKind::kReplay;
    /// Fixture path (replay) or server URI (live).
    std::string target;
    std::string user;
    std::string password;
    std::chrono::milliseconds timeout{30'000};
    std::size_t max_in_flight = 4;
    /// Extra attempts after a connection failure.
    unsigned retries = 2;
    std::map<std::string, DatabaseTarget> overrides;

    /// Throws ExecutionError(kInvalidBinding).
    void validate() const;
    /// Target for a database_ref after applying overrides.
    [[nodiscard]] DatabaseTarget resolve(const std::string& database_ref) const;

    /// Live binding from GRAPHDB_URI / GRAPHDB_USER / GRAPHDB_PASSWORD.
    static ExecutorBinding live_from_env();
    static ExecutorBinding replay(std::filesystem::path fixture);

    [[nodiscard]] nlohmann::ordered_json to_json() const;  // without secrets
};

/// Sends a query somewhere and reports what happened. Implementations must be
/// safe to call from several threads at once.
class QueryBackend {
  public:
    virtual ~QueryBackend() = default;
    virtual ExecutionOutcome run(std::string_view query, const std::string& database_ref) = 0;
};

/// Recorded outcomes keyed by (database_ref, whitespace-normalised query).
class Fixture {
  public:
    static std::string key_for(std::string_view query);

    /// Throws ExecutionError(kBadFixture) or DatasetError(kMissingFile).
    static Fixture load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    void insert(const std::string& database_ref, std::string_view query, ExecutionOutcome outcome);
    [[nodiscard]] const ExecutionOutcome* find(const std::string& database_ref, std::string_view query) const;
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    static Fixture from_json(const nlohmann::json& j);

  private:
    std::map<std::pair<std::string, std::string>, ExecutionOutcome> entries_;
};

class ReplayBackend final : public QueryBackend {
  public:
    explicit ReplayBackend(Fixture fixture) : fixture_(std::move(fixture)) {}
    ExecutionOutcome run(std::string_view query, const std::string& database_ref) override;

  private:
    Fixture fixture_;
};

/// Talks to a graph database through its HTTP transactional endpoint
/// (POST {uri}/db/{database}/tx/commit).
class HttpGraphBackend final : public QueryBackend {
  public:
    explicit HttpGraphBackend(ExecutorBinding binding) : binding_(std::move(binding)) {}
    ExecutionOutcome run(std::string_view query, const std::string& database_ref) override;

  private:
    ExecutorBinding binding_;
};

/// Returns the first write clause (CREATE, MERGE, DELETE, DETACH DELETE, SET,
/// REMOVE) found outside strings and comments.
std::optional<std::string> find_write_clause(std::string_view query);

/// Read-only front end over a backend.
class Executor {
  public:
    /// Builds the backend named by the binding.
    explicit Executor(ExecutorBinding binding);
    Executor(ExecutorBinding binding, std::shared_ptr<QueryBackend> backend);

    /// Throws ExecutionError(kWriteQueryRefused) without contacting the
    /// backend when the query writes; ExecutionError(kConnectionFailure) when
    /// a live backend stays unreachable.
    ExecutionOutcome execute(std::string_view query, const std::string& database_ref) const;

    [[nodiscard]] const ExecutorBinding& binding() const noexcept { return binding_; }

  private:
    ExecutorBinding binding_;
    std::shared_ptr<QueryBackend> backend_;
};

ExecutionOutcome execute(std::string_view query, const ExecutorBinding& binding,
                         const std::string& database_ref);

struct ExecutionCoverage {
    std::size_t total = 0;
    std::size_t evaluated = 0;
    std::size_t skipped_no_database = 0;
    /// Reference query errored or timed out; excluded.
    std::size_t reference_invalid = 0;
    /// Reference or generated query absent from the fixture; excluded.
    std::size_t fixture_miss = 0;
    /// Evaluated pairs whose generated query failed (scored 0).
    std::size_t generated_failed = 0;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    bool operator==(const ExecutionCoverage&) const = default;
};

struct ExecutionReport {
    LexicalScores scores;
    ExecutionCoverage coverage;
    /// Evaluated pairs only, in input order.
    std::vector<PairScore> per_pair;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// Conventions stamped into every execution report header.
nlohmann::ordered_json execution_conventions();

/// Runs reference and postprocessed generated queries for every pair whose
/// record has a database_ref, at most binding.max_in_flight at a time.
/// Throws ExecutionError(kAllSkipped) when nothing could be evaluated.
ExecutionReport execution_scores(std::span<const EvalPair> pairs, const Executor& executor,
                                 const DatasetFile& dataset);

struct FixtureQuery {
    std::string database_ref;
    std::string query;
};

/// Reference and postprocessed generated queries for pairs with a database_ref.
std::vector<FixtureQuery> fixture_queries(std::span<const EvalPair> pairs, const DatasetFile& dataset);

struct RecordSummary {
    std::size_t recorded = 0;
    std::size_t duplicates = 0;
    std::size_t refused = 0;
};

/// Executes each distinct (database_ref, normalised query) once and saves the
/// outcomes. Write queries are refused and not recorded.
RecordSummary record_fixture(std::span<const FixtureQuery> queries, const Executor& executor,
                             const std::filesystem::path& out);

} // namespace cypherprune
