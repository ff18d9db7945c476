#include "cypherprune/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "cypherprune/dataset.hpp"
#include "cypherprune/errors.hpp"
#include "cypherprune/text.hpp"

namespace cypherprune {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

fs::path resolve_path(const std::string& p, const fs::path& base_dir) {
    fs::path path(p);
    if (path.is_relative() && !base_dir.empty()) return base_dir / path;
    return path;
}

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v != nullptr && *v != '\0' ? std::string(v) : std::move(fallback);
}

} // namespace

ExecutorBinding executor_from_json(const json& j, const fs::path& base_dir) {
    ExecutorBinding b;
    try {
        const auto kind = j.value("kind", std::string("replay"));
        if (kind == "replay") {
            b.kind = BindingKind::kReplay;
            b.target = resolve_path(j.at("fixture").get<std::string>(), base_dir).string();
        } else if (kind == "live") {
            b.kind = BindingKind::kLive;
            b.target = j.contains("uri") ? j["uri"].get<std::string>() : env_or("GRAPHDB_URI", "");
            b.user = j.contains("user") ? j["user"].get<std::string>() : env_or("GRAPHDB_USER", "");
            b.password = env_or("GRAPHDB_PASSWORD", j.value("password", std::string()));
        } else {
            throw ConfigError("executor kind must be \"live\" or \"replay\"");
        }
        if (j.contains("timeout_ms")) b.timeout = std::chrono::milliseconds(j["timeout_ms"].get<long long>());
        if (j.contains("max_in_flight")) b.max_in_flight = j["max_in_flight"].get<std::size_t>();
        if (j.contains("retries")) b.retries = j["retries"].get<unsigned>();
        if (j.contains("databases")) {
            for (const auto& [ref, t] : j["databases"].items()) {
                b.overrides[ref] = {t.value("uri", std::string()), t.value("user", std::string()),
                                    t.value("password", std::string()),
                                    t.value("database", std::string())};
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("executor config: ") + e.what());
    }
    return b;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    RunConfig c;
    try {
        c.run_name = j.value("run_name", c.run_name);
        if (!j.contains("train")) throw ConfigError("run config needs a \"train\" dataset path");
        c.train = resolve_path(j["train"].get<std::string>(), base_dir);
        if (j.contains("test")) c.test = resolve_path(j["test"].get<std::string>(), base_dir);
        if (j.contains("predictions")) {
            c.predictions = resolve_path(j["predictions"].get<std::string>(), base_dir);
        }
        if (j.contains("field_mapping")) {
            c.field_mapping = resolve_path(j["field_mapping"].get<std::string>(), base_dir);
        }
        c.strict = j.value("strict", c.strict);
        if (j.contains("selection")) c.selection = SelectionSpec::from_json(j["selection"]);
        if (j.contains("term_set")) c.term_set = j["term_set"].get<std::vector<std::string>>();
        c.threads = j.value("threads", c.threads);
        if (j.contains("executor")) c.executor = executor_from_json(j["executor"], base_dir);
        if (j.contains("evaluate")) {
            c.evaluate_translation = j["evaluate"].value("translation", false);
            c.evaluate_execution = j["evaluate"].value("execution", false);
        }
        if (j.contains("output_dir")) c.output_dir = resolve_path(j["output_dir"].get<std::string>(), base_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    // surface bad term sets early
    (void)TermSet(c.term_set);
    c.selection.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

ordered_json RunConfig::to_json() const {
    auto opt_path = [](const std::optional<fs::path>& p) {
        return p ? ordered_json(p->string()) : ordered_json(nullptr);
    };
    return {{"run_name", run_name},
            {"train", train.string()},
            {"test", opt_path(test)},
            {"predictions", opt_path(predictions)},
            {"field_mapping", opt_path(field_mapping)},
            {"strict", strict},
            {"selection", selection.to_json()},
            {"term_set", TermSet(term_set).terms()},
            {"threads", threads},
            {"executor", executor ? executor->to_json() : ordered_json(nullptr)},
            {"evaluate", {{"translation", evaluate_translation}, {"execution", evaluate_execution}}},
            {"output_dir", output_dir.string()}};
}

// ---------------------------------------------------------------------------

namespace {

ordered_json summary_or_null(const std::optional<CorpusSummary>& s) {
    return s ? s->to_json() : ordered_json(nullptr);
}

LexicalScores scores_from_json(const json& j) {
    return {j.at("google_bleu").get<double>(), j.at("exact_match").get<double>(),
            j.at("n").get<std::size_t>()};
}

GroupedScores grouped_from_json(const json& j) {
    GroupedScores g;
    g.all = scores_from_json(j.at("all"));
    for (const auto& [key, s] : j.at("groups").items()) g.groups[key] = scores_from_json(s);
    return g;
}

} // namespace

ordered_json ReportBundle::to_json() const {
    ordered_json j;
    j["run_name"] = run_name;
    j["manifest"] = manifest;
    j["corpus_profile"] = summary_or_null(corpus_summary);
    j["selected_profile"] = summary_or_null(selected_summary);
    if (translation) {
        j["translation"] = {{"by_data_source", translation->to_json()},
                            {"by_database_ref", translation_by_database
                                                    ? translation_by_database->to_json()
                                                    : ordered_json(nullptr)}};
    } else {
        j["translation"] = nullptr;
    }
    j["execution"] = execution ? execution->to_json() : ordered_json(nullptr);
    return j;
}

ReportBundle ReportBundle::from_json(const json& j) {
    ReportBundle r;
    try {
        r.run_name = j.value("run_name", std::string());
        if (j.contains("manifest")) r.manifest = j["manifest"];
        if (const auto& t = j.value("translation", json()); !t.is_null()) {
            r.translation = grouped_from_json(t.at("by_data_source"));
            if (const auto& db = t.value("by_database_ref", json()); !db.is_null()) {
                r.translation_by_database = grouped_from_json(db);
            }
        }
        if (const auto& e = j.value("execution", json()); !e.is_null()) {
            ExecutionReport er;
            er.scores = scores_from_json(e.at("scores"));
            const auto& c = e.at("coverage");
            er.coverage = {c.at("total").get<std::size_t>(),
                           c.at("evaluated").get<std::size_t>(),
                           c.at("skipped_no_database").get<std::size_t>(),
                           c.at("reference_invalid").get<std::size_t>(),
                           c.at("fixture_miss").get<std::size_t>(),
                           c.at("generated_failed").get<std::size_t>()};
            r.execution = std::move(er);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("report: ") + e.what());
    }
    return r;
}

ReportBundle ReportBundle::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError(DatasetErrc::kMissingFile, "cannot open report " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw DatasetError(DatasetErrc::kMalformedLine, "report " + path.string() + ": " + e.what());
    }
}

void write_text_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError(DatasetErrc::kIoFailure, "cannot write " + path.string());
    out << content;
    if (!out) throw DatasetError(DatasetErrc::kIoFailure, "write to " + path.string() + " failed");
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    } catch (const std::exception& e) {
        throw StageError(name, e.what(), ExitCode::kData);
    }
}

void write_scores(const fs::path& path, std::span<const PairScore> scores) {
    std::string body;
    for (const auto& s : scores) body += s.to_json().dump() + '\n';
    write_text_file(path, body);
}

std::vector<const CypherProfile*> profiles_for(const ProfileTable& table,
                                               std::span<const std::string> ids) {
    std::vector<const CypherProfile*> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        if (auto it = table.find(id); it != table.end()) out.push_back(&it->second);
    }
    return out;
}

} // namespace

ReportBundle run_pipeline(const RunConfig& config, const RunStamp& stamp) {
    ReportBundle bundle;
    bundle.run_name = config.run_name;
    const TermSet terms(config.term_set);
    RunStamp run_stamp = stamp;
    run_stamp.terms = &terms;

    stage("setup", [&] {
        std::error_code ec;
        fs::create_directories(config.output_dir, ec);
        if (ec) {
            throw DatasetError(DatasetErrc::kIoFailure,
                               "cannot create " + config.output_dir.string() + ": " + ec.message());
        }
    });

    LoadOptions options;
    options.strict = config.strict;
    auto train = stage("validate", [&] {
        if (config.field_mapping) options.fields = FieldMapping::load(*config.field_mapping);
        auto loaded = load_dataset(config.train, options);
        ordered_json v = {{"train", loaded.report.to_json()}, {"counts", loaded.file.counts().to_json()}};
        write_text_file(config.output_dir / "validation.json", v.dump(2) + "\n");
        return std::move(loaded.file);
    });

    auto profiles = stage("profile", [&] {
        auto table = profile_dataset(train, terms, config.threads);
        std::vector<const CypherProfile*> all;
        std::vector<std::string> train_ids;
        for (const auto& r : train.records()) {
            if (r.split == Split::kTrain) train_ids.push_back(r.record_id);
        }
        bundle.corpus_summary = summarize(profiles_for(table, train_ids));
        ordered_json out = {{"term_set", terms.terms()}, {"summary", bundle.corpus_summary->to_json()}};
        write_text_file(config.output_dir / "profile.json", out.dump(2) + "\n");
        return table;
    });

    stage("prune", [&] {
        auto result = run_selection(train, &profiles, config.selection, run_stamp);
        write_dataset(materialize(train, result), config.output_dir / "pruned.jsonl");
        bundle.manifest = result.manifest;
        // Worker count and output location never change the selection, and
        // leaving them out keeps manifests comparable across machines.
        auto echoed = config.to_json();
        echoed.erase("threads");
        echoed.erase("output_dir");
        bundle.manifest["config"] = std::move(echoed);
        write_text_file(config.output_dir / "manifest.json", bundle.manifest.dump(2) + "\n");
        bundle.selected_summary = summarize(profiles_for(profiles, result.selected));
    });

    if (config.evaluate_translation || config.evaluate_execution) {
        auto evaluation_inputs = stage("evaluate", [&] {
            if (!config.predictions) throw ConfigError("evaluation requested but no predictions file is configured");
            if (!fs::exists(*config.predictions)) {
                throw DatasetError(DatasetErrc::kMissingFile,
                                   "missing predictions file " + config.predictions->string());
            }
            if (!config.test) throw ConfigError("evaluation requested but no test dataset is configured");
            LoadOptions test_options = options;
            test_options.default_split = Split::kTest;
            auto file = load_dataset(*config.test, test_options).file;
            auto p = load_predictions(*config.predictions, file);
            return std::make_pair(std::move(file), std::move(p));
        });
        const auto& test = evaluation_inputs.first;
        const auto& pairs = evaluation_inputs.second;

        if (config.evaluate_translation) {
            stage("evaluate translation", [&] {
                auto scores = score_pairs(pairs);
                write_scores(config.output_dir / "scores_translation.jsonl", scores);
                bundle.translation = grouped_report(scores, group_by_data_source(test));
                bundle.translation_by_database = grouped_report(scores, group_by_database_ref(test));
            });
        }
        if (config.evaluate_execution) {
            stage("evaluate execution", [&] {
                if (!config.executor) throw ConfigError("execution evaluation requested but no executor is configured");
                Executor executor(*config.executor);
                auto report = execution_scores(pairs, executor, test);
                write_scores(config.output_dir / "scores_execution.jsonl", report.per_pair);
                bundle.execution = std::move(report);
            });
        }
    }

    stage("report", [&] {
        write_text_file(config.output_dir / "report.json", bundle.to_json().dump(2) + "\n");
    });
    return bundle;
}

LexicalScores rederive_scores(const fs::path& per_record_scores) {
    std::ifstream in(per_record_scores);
    if (!in) throw DatasetError(DatasetErrc::kMissingFile, "cannot open " + per_record_scores.string());
    std::vector<PairScore> scores;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        scores.push_back(PairScore::from_json(json::parse(line)));
    }
    return aggregate(scores);
}

ComparisonTable emit_comparison_table(std::span<const NamedReport> reports) {
    static const std::vector<std::string> kHeader = {"run", "gleu_translation", "em_translation",
                                                     "gleu_execution", "em_execution"};
    std::vector<std::vector<std::string>> rows;
    rows.push_back(kHeader);
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("n/a"); };
    for (const auto& [name, r] : reports) {
        std::optional<double> tg;
        std::optional<double> te;
        std::optional<double> eg;
        std::optional<double> ee;
        if (r.translation) {
            tg = r.translation->all.google_bleu;
            te = r.translation->all.exact_match;
        }
        if (r.execution) {
            eg = r.execution->scores.google_bleu;
            ee = r.execution->scores.exact_match;
        }
        rows.push_back({name, cell(tg), cell(te), cell(eg), cell(ee)});
    }

    ComparisonTable table;
    std::vector<std::size_t> widths(kHeader.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    }
    for (const auto& row : rows) {
        std::string csv_line;
        std::string text_line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c != 0) {
                csv_line += ',';
                text_line += "  ";
            }
            const bool quote = row[c].find_first_of(",\"\n") != std::string::npos;
            if (quote) {
                std::string escaped;
                for (char ch : row[c]) {
                    if (ch == '"') escaped += '"';
                    escaped += ch;
                }
                csv_line += '"' + escaped + '"';
            } else {
                csv_line += row[c];
            }
            // names left-aligned, numbers right-aligned
            const auto pad = std::string(widths[c] - row[c].size(), ' ');
            text_line += c == 0 ? row[c] + pad : pad + row[c];
        }
        table.csv += csv_line + '\n';
        while (!text_line.empty() && text_line.back() == ' ') text_line.pop_back();
        table.text += text_line + '\n';
    }
    return table;
}

} // namespace cypherprune
