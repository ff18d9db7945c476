#include "cypherprune/execution.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "cypherprune/cypher_profile.hpp"
#include "cypherprune/dataset.hpp"
#include "cypherprune/errors.hpp"
#include "cypherprune/text.hpp"

namespace cypherprune {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ExecStatus s) noexcept {
    switch (s) {
    case ExecStatus::kOk: return "ok";
    case ExecStatus::kError: return "error";
    case ExecStatus::kTimeout: return "timeout";
    case ExecStatus::kSkipped: return "skipped";
    }
    return "unknown";
}

ExecStatus parse_exec_status(std::string_view s) {
    if (s == "ok") return ExecStatus::kOk;
    if (s == "error") return ExecStatus::kError;
    if (s == "timeout") return ExecStatus::kTimeout;
    if (s == "skipped") return ExecStatus::kSkipped;
    throw ExecutionError(ExecutionErrc::kBadFixture, "unknown status \"" + std::string(s) + "\"");
}

// ---------------------------------------------------------------------------
// canonical rendering

namespace {

void render(const json& v, std::string& out, bool& placeholder) {
    switch (v.type()) {
    case json::value_t::null: out += "null"; break;
    case json::value_t::boolean: out += v.get<bool>() ? "true" : "false"; break;
    case json::value_t::number_integer: out += std::to_string(v.get<std::int64_t>()); break;
    case json::value_t::number_unsigned: out += std::to_string(v.get<std::uint64_t>()); break;
    case json::value_t::number_float: {
        const double d = v.get<double>();
        if (std::isnan(d)) {
            out += "NaN";
        } else if (std::isinf(d)) {
            out += d > 0 ? "Infinity" : "-Infinity";
        } else {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.10g", d);
            out += buf;
        }
        break;
    }
    case json::value_t::string: out += json(v.get<std::string>()).dump(); break;
    case json::value_t::array: {
        out += '[';
        bool first = true;
        for (const auto& e : v) {
            if (!first) out += ',';
            first = false;
            render(e, out, placeholder);
        }
        out += ']';
        break;
    }
    case json::value_t::object: {
        // json objects iterate in ascending key order
        out += '{';
        bool first = true;
        for (const auto& [key, e] : v.items()) {
            if (!first) out += ',';
            first = false;
            out += json(key).dump();
            out += ':';
            render(e, out, placeholder);
        }
        out += '}';
        break;
    }
    case json::value_t::binary:
        out += "\"<binary:" + std::to_string(v.get_binary().size()) + " bytes>\"";
        placeholder = true;
        break;
    case json::value_t::discarded:
        out += "\"<discarded>\"";
        placeholder = true;
        break;
    }
}

} // namespace

CanonicalForm canonicalize(std::span<const ResultRow> rows) {
    CanonicalForm form;
    std::vector<std::string> lines;
    lines.reserve(rows.size());
    for (const auto& row : rows) {
        std::string line;
        render(row, line, form.has_placeholder);
        lines.push_back(std::move(line));
    }
    std::sort(lines.begin(), lines.end());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i != 0) form.text += '\n';
        form.text += lines[i];
    }
    return form;
}

ExecutionOutcome ExecutionOutcome::ok(std::vector<ResultRow> rows) {
    ExecutionOutcome o;
    o.status = ExecStatus::kOk;
    auto form = canonicalize(rows);
    o.rows = std::move(rows);
    o.canonical = std::move(form.text);
    o.has_placeholder = form.has_placeholder;
    return o;
}

ExecutionOutcome ExecutionOutcome::error(std::string detail) {
    ExecutionOutcome o;
    o.status = ExecStatus::kError;
    o.error_detail = std::move(detail);
    return o;
}

ExecutionOutcome ExecutionOutcome::timeout(std::string detail) {
    ExecutionOutcome o;
    o.status = ExecStatus::kTimeout;
    o.error_detail = std::move(detail);
    return o;
}

ExecutionOutcome ExecutionOutcome::skipped() { return {}; }

// ---------------------------------------------------------------------------
// binding

void ExecutorBinding::validate() const {
    if (timeout.count() <= 0) throw ExecutionError(ExecutionErrc::kInvalidBinding, "timeout must be > 0");
    if (max_in_flight < 1) {
        throw ExecutionError(ExecutionErrc::kInvalidBinding, "max_in_flight must be >= 1");
    }
    if (kind == BindingKind::kReplay && target.empty()) {
        throw ExecutionError(ExecutionErrc::kInvalidBinding, "replay binding needs a fixture path");
    }
    if (kind == BindingKind::kLive) {
        auto check = [](const std::string& uri) {
            if (!(uri.starts_with("http://") || uri.starts_with("https://"))) {
                throw ExecutionError(ExecutionErrc::kInvalidBinding,
                                     "live target must be an http:// or https:// URI, got \"" + uri + "\"");
            }
        };
        if (overrides.empty() || !target.empty()) check(target);
        for (const auto& [ref, t] : overrides) {
            if (!t.uri.empty()) check(t.uri);
        }
    }
}

DatabaseTarget ExecutorBinding::resolve(const std::string& database_ref) const {
    DatabaseTarget t{target, user, password, database_ref};
    if (auto it = overrides.find(database_ref); it != overrides.end()) {
        if (!it->second.uri.empty()) t.uri = it->second.uri;
        if (!it->second.user.empty()) t.user = it->second.user;
        if (!it->second.password.empty()) t.password = it->second.password;
        if (!it->second.database.empty()) t.database = it->second.database;
    }
    return t;
}

ExecutorBinding ExecutorBinding::live_from_env() {
    ExecutorBinding b;
    b.kind = BindingKind::kLive;
    auto env = [](const char* name) {
        const char* v = std::getenv(name);
        return v != nullptr ? std::string(v) : std::string();
    };
    b.target = env("GRAPHDB_URI");
    b.user = env("GRAPHDB_USER");
    b.password = env("GRAPHDB_PASSWORD");
    return b;
}

ExecutorBinding ExecutorBinding::replay(std::filesystem::path fixture) {
    ExecutorBinding b;
    b.kind = BindingKind::kReplay;
    b.target = fixture.string();
    return b;
}

ordered_json ExecutorBinding::to_json() const {
    ordered_json overrides_json = ordered_json::object();
    for (const auto& [ref, t] : overrides) {
        overrides_json[ref] = {{"uri", t.uri}, {"user", t.user}, {"database", t.database}};
    }
    return {{"kind", kind == BindingKind::kLive ? "live" : "replay"},
            {"target", target},
            {"user", user},
            {"timeout_ms", timeout.count()},
            {"max_in_flight", max_in_flight},
            {"retries", retries},
            {"overrides", std::move(overrides_json)}};
}

// ---------------------------------------------------------------------------
// fixture

std::string Fixture::key_for(std::string_view query) { return normalize_whitespace(query); }

void Fixture::insert(const std::string& database_ref, std::string_view query, ExecutionOutcome outcome) {
    entries_[{database_ref, key_for(query)}] = std::move(outcome);
}

const ExecutionOutcome* Fixture::find(const std::string& database_ref, std::string_view query) const {
    auto it = entries_.find({database_ref, key_for(query)});
    return it == entries_.end() ? nullptr : &it->second;
}

ordered_json Fixture::to_json() const {
    ordered_json entries = ordered_json::array();
    for (const auto& [key, outcome] : entries_) {
        ordered_json e;
        e["database_ref"] = key.first;
        e["query_normalized"] = key.second;
        e["status"] = to_string(outcome.status);
        if (outcome.status == ExecStatus::kOk) {
            e["rows"] = outcome.rows;
        } else if (outcome.error_detail) {
            e["error_detail"] = *outcome.error_detail;
        }
        entries.push_back(std::move(e));
    }
    return {{"format", "cypherprune-fixture"}, {"version", 1}, {"entries", std::move(entries)}};
}

Fixture Fixture::from_json(const json& j) {
    Fixture f;
    try {
        for (const auto& e : j.at("entries")) {
            const auto status = parse_exec_status(e.at("status").get<std::string>());
            ExecutionOutcome outcome;
            switch (status) {
            case ExecStatus::kOk: {
                const auto& rows = e.at("rows");
                if (!rows.is_array()) throw ExecutionError(ExecutionErrc::kBadFixture, "rows must be an array");
                outcome = ExecutionOutcome::ok(std::vector<ResultRow>(rows.begin(), rows.end()));
                break;
            }
            case ExecStatus::kError:
                outcome = ExecutionOutcome::error(e.value("error_detail", std::string("error")));
                break;
            case ExecStatus::kTimeout:
                outcome = ExecutionOutcome::timeout(e.value("error_detail", std::string("timeout")));
                break;
            case ExecStatus::kSkipped: continue;
            }
            f.insert(e.at("database_ref").get<std::string>(), e.at("query_normalized").get<std::string>(),
                     std::move(outcome));
        }
    } catch (const json::exception& e) {
        throw ExecutionError(ExecutionErrc::kBadFixture, std::string("fixture: ") + e.what());
    }
    return f;
}

Fixture Fixture::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError(DatasetErrc::kMissingFile, "cannot open fixture " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ExecutionError(ExecutionErrc::kBadFixture, path.string() + ": " + e.what());
    }
    return from_json(j);
}

void Fixture::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError(DatasetErrc::kIoFailure, "cannot write fixture " + path.string());
    out << to_json().dump(2) << '\n';
    if (!out) throw DatasetError(DatasetErrc::kIoFailure, "write to " + path.string() + " failed");
}

ExecutionOutcome ReplayBackend::run(std::string_view query, const std::string& database_ref) {
    const auto* hit = fixture_.find(database_ref, query);
    return hit != nullptr ? *hit : ExecutionOutcome::skipped();
}

// ---------------------------------------------------------------------------
// live backend

ExecutionOutcome HttpGraphBackend::run(std::string_view query, const std::string& database_ref) {
    const auto target = binding_.resolve(database_ref);
    std::string uri = target.uri;
    while (uri.ends_with('/')) uri.pop_back();

    httplib::Client client(uri);
    if (!client.is_valid()) {
        throw ExecutionError(ExecutionErrc::kConnectionFailure, "invalid database URI \"" + uri + "\"");
    }
    const auto timeout = binding_.timeout;
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (!target.user.empty()) client.set_basic_auth(target.user, target.password);

    const json body = {{"statements", json::array({{{"statement", std::string(query)},
                                                    {"resultDataContents", json::array({"row"})}}})}};
    const std::string path = "/db/" + target.database + "/tx/commit";
    const httplib::Headers headers = {{"Accept", "application/json;charset=UTF-8"}};

    std::string last_failure;
    for (unsigned attempt = 0; attempt <= binding_.retries; ++attempt) {
        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            const auto elapsed = std::chrono::steady_clock::now() - started;
            if (res.error() == httplib::Error::Read && elapsed >= timeout * 9 / 10) {
                return ExecutionOutcome::timeout("no response within " + std::to_string(timeout.count()) + " ms");
            }
            last_failure = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw ExecutionError(ExecutionErrc::kConnectionFailure,
                                 "authentication rejected by " + uri + " (HTTP " +
                                     std::to_string(res->status) + ")");
        }
        if (res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200 && res->status != 201) {
            return ExecutionOutcome::error("HTTP " + std::to_string(res->status) + ": " + res->body);
        }

        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::parse_error& e) {
            return ExecutionOutcome::error(std::string("unparseable response: ") + e.what());
        }
        if (const auto& errors = reply.value("errors", json::array()); !errors.empty()) {
            const auto& first = errors.front();
            return ExecutionOutcome::error(first.value("code", std::string("error")) + ": " +
                                           first.value("message", std::string()));
        }
        std::vector<ResultRow> rows;
        const auto& results = reply.value("results", json::array());
        if (!results.empty()) {
            const auto& columns = results.front().value("columns", json::array());
            for (const auto& datum : results.front().value("data", json::array())) {
                const auto& values = datum.value("row", json::array());
                json row = json::object();
                for (std::size_t c = 0; c < columns.size() && c < values.size(); ++c) {
                    row[columns[c].get<std::string>()] = values[c];
                }
                rows.push_back(std::move(row));
            }
        }
        return ExecutionOutcome::ok(std::move(rows));
    }
    throw ExecutionError(ExecutionErrc::kConnectionFailure,
                         "cannot reach " + uri + " after " + std::to_string(binding_.retries + 1) +
                             " attempts: " + last_failure);
}

// ---------------------------------------------------------------------------
// executor

std::optional<std::string> find_write_clause(std::string_view query) {
    static const TermSet kWriteTerms({"CREATE", "MERGE", "DELETE", "DETACH DELETE", "SET", "REMOVE"});
    auto p = profile(query, kWriteTerms);
    if (p.term_counts.empty()) return std::nullopt;
    return p.term_counts.begin()->first;
}

namespace {

std::shared_ptr<QueryBackend> make_backend(const ExecutorBinding& binding) {
    binding.validate();
    if (binding.kind == BindingKind::kReplay) {
        return std::make_shared<ReplayBackend>(Fixture::load(binding.target));
    }
    return std::make_shared<HttpGraphBackend>(binding);
}

} // namespace

Executor::Executor(ExecutorBinding binding) : binding_(std::move(binding)), backend_(make_backend(binding_)) {}

Executor::Executor(ExecutorBinding binding, std::shared_ptr<QueryBackend> backend)
    : binding_(std::move(binding)), backend_(std::move(backend)) {
    binding_.validate();
}

ExecutionOutcome Executor::execute(std::string_view query, const std::string& database_ref) const {
    if (auto clause = find_write_clause(query)) {
        throw ExecutionError(ExecutionErrc::kWriteQueryRefused,
                             "refusing to run a query containing " + *clause);
    }
    return backend_->run(query, database_ref);
}

ExecutionOutcome execute(std::string_view query, const ExecutorBinding& binding,
                         const std::string& database_ref) {
    return Executor(binding).execute(query, database_ref);
}

// ---------------------------------------------------------------------------
// scoring

ordered_json ExecutionCoverage::to_json() const {
    return {{"total", total},
            {"evaluated", evaluated},
            {"skipped_no_database", skipped_no_database},
            {"reference_invalid", reference_invalid},
            {"fixture_miss", fixture_miss},
            {"generated_failed", generated_failed}};
}

ordered_json execution_conventions() {
    return {
        {"comparison", "canonical result strings: rows rendered with sorted keys, floats at 10 "
                       "significant digits, rendered rows sorted lexicographically"},
        {"generated_failure", "exact_match 0; empty hypothesis for Google-BLEU"},
        {"reference_failure", "pair excluded and counted as reference_invalid"},
        {"fixture_miss", "pair excluded and counted as fixture_miss"},
        {"no_database_ref", "pair skipped"},
        {"bleu_tokens", "one token per canonical row"},
        {"write_queries", "refused before execution; generated writes count as failures"},
    };
}

ordered_json ExecutionReport::to_json() const {
    return {{"conventions", execution_conventions()},
            {"scores", scores.to_json()},
            {"coverage", coverage.to_json()}};
}

namespace {

enum class PairFate { kEvaluated, kNoDatabase, kReferenceInvalid, kFixtureMiss };

struct PairResult {
    PairFate fate = PairFate::kNoDatabase;
    bool generated_failed = false;
    PairScore score;
};

std::vector<std::string> canonical_lines(const std::string& canonical) {
    std::vector<std::string> lines;
    if (canonical.empty()) return lines;
    std::size_t start = 0;
    while (true) {
        auto nl = canonical.find('\n', start);
        lines.push_back(canonical.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return lines;
}

ExecutionOutcome run_guarded(const Executor& executor, std::string_view query, const std::string& db) {
    if (trim(query).empty()) return ExecutionOutcome::error("empty query");
    try {
        return executor.execute(query, db);
    } catch (const ExecutionError& e) {
        if (e.code() != ExecutionErrc::kWriteQueryRefused) throw;
        return ExecutionOutcome::error(e.what());
    }
}

PairResult score_one(const EvalPair& pair, const Executor& executor, const DatasetFile& dataset) {
    PairResult out;
    out.score.record_id = pair.record_id;
    const auto* record = dataset.find(pair.record_id);
    if (record == nullptr) {
        throw MetricError(MetricErrc::kUnknownRecordId, "record '" + pair.record_id + "' not in dataset");
    }
    if (!record->database_ref) return out;
    const auto& db = *record->database_ref;

    const auto reference = run_guarded(executor, pair.reference, db);
    if (reference.status == ExecStatus::kSkipped) {
        out.fate = PairFate::kFixtureMiss;
        return out;
    }
    if (reference.status != ExecStatus::kOk) {
        out.fate = PairFate::kReferenceInvalid;
        return out;
    }
    const auto generated = run_guarded(executor, postprocess(pair.generated), db);
    if (generated.status == ExecStatus::kSkipped) {
        out.fate = PairFate::kFixtureMiss;
        return out;
    }

    out.fate = PairFate::kEvaluated;
    const auto ref_lines = canonical_lines(*reference.canonical);
    if (generated.status != ExecStatus::kOk) {
        out.generated_failed = true;
        out.score.counts = gleu_counts({}, ref_lines);
        out.score.exact = false;
    } else {
        out.score.counts = gleu_counts(canonical_lines(*generated.canonical), ref_lines);
        out.score.exact = *generated.canonical == *reference.canonical;
    }
    return out;
}

} // namespace

ExecutionReport execution_scores(std::span<const EvalPair> pairs, const Executor& executor,
                                 const DatasetFile& dataset) {
    if (pairs.empty()) throw MetricError(MetricErrc::kEmptyInput, "no evaluation pairs");

    std::vector<PairResult> results(pairs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1)) {
            try {
                results[i] = score_one(pairs[i], executor, dataset);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = pairs.size();
            }
        }
    };
    const auto workers = std::min(executor.binding().max_in_flight, pairs.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    ExecutionReport report;
    auto& cov = report.coverage;
    cov.total = pairs.size();
    for (auto& r : results) {
        switch (r.fate) {
        case PairFate::kNoDatabase: ++cov.skipped_no_database; break;
        case PairFate::kReferenceInvalid: ++cov.reference_invalid; break;
        case PairFate::kFixtureMiss: ++cov.fixture_miss; break;
        case PairFate::kEvaluated:
            ++cov.evaluated;
            if (r.generated_failed) ++cov.generated_failed;
            report.per_pair.push_back(std::move(r.score));
            break;
        }
    }
    if (cov.evaluated == 0) {
        throw ExecutionError(ExecutionErrc::kAllSkipped,
                             "no pair could be evaluated (" + std::to_string(cov.skipped_no_database) +
                                 " without database_ref, " + std::to_string(cov.reference_invalid) +
                                 " invalid references, " + std::to_string(cov.fixture_miss) +
                                 " fixture misses)");
    }
    report.scores = aggregate(report.per_pair);
    return report;
}

std::vector<FixtureQuery> fixture_queries(std::span<const EvalPair> pairs, const DatasetFile& dataset) {
    std::vector<FixtureQuery> out;
    for (const auto& p : pairs) {
        const auto* r = dataset.find(p.record_id);
        if (r == nullptr || !r->database_ref) continue;
        out.push_back({*r->database_ref, p.reference});
        auto generated = postprocess(p.generated);
        if (!generated.empty()) out.push_back({*r->database_ref, std::move(generated)});
    }
    return out;
}

RecordSummary record_fixture(std::span<const FixtureQuery> queries, const Executor& executor,
                             const std::filesystem::path& out) {
    RecordSummary summary;
    Fixture fixture;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& q : queries) {
        if (!seen.emplace(q.database_ref, Fixture::key_for(q.query)).second) {
            ++summary.duplicates;
            continue;
        }
        try {
            fixture.insert(q.database_ref, q.query, executor.execute(q.query, q.database_ref));
            ++summary.recorded;
        } catch (const ExecutionError& e) {
            if (e.code() != ExecutionErrc::kWriteQueryRefused) throw;
            ++summary.refused;
        }
    }
    fixture.save(out);
    return summary;
}

} // namespace cypherprune
