#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cypherprune/cypher_profile.hpp"
#include "cypherprune/execution.hpp"
#include "cypherprune/metrics.hpp"
#include "cypherprune/selection.hpp"

namespace cypherprune {

/// Fully-resolved settings for one run. Loaded from a JSON document; CLI
/// flags are applied on top before the run starts.
struct RunConfig {
    std::string run_name = "run";
    std::filesystem::path train;
    std::optional<std::filesystem::path> test;
    std::optional<std::filesystem::path> predictions;
    std::optional<std::filesystem::path> field_mapping;
    bool strict = true;
    SelectionSpec selection;
    std::vector<std::string> term_set = TermSet::defaults().terms();
    unsigned threads = 1;
    std::optional<ExecutorBinding> executor;
    bool evaluate_translation = false;
    bool evaluate_execution = false;
    std::filesystem::path output_dir = "out";

    /// Relative paths in `j` are resolved against `base_dir`. Throws ConfigError.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);
    /// Every field with defaults materialised; passwords omitted.
    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// Parses the "executor" block of a run config. Credentials fall back to
/// GRAPHDB_URI / GRAPHDB_USER / GRAPHDB_PASSWORD.
ExecutorBinding executor_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct ReportBundle {
    std::string run_name;
    nlohmann::ordered_json manifest;
    std::optional<CorpusSummary> corpus_summary;
    std::optional<CorpusSummary> selected_summary;
    std::optional<GroupedScores> translation;
    std::optional<GroupedScores> translation_by_database;
    std::optional<ExecutionReport> execution;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    /// Reads back the score sections of a written report.
    static ReportBundle from_json(const nlohmann::json& j);
    static ReportBundle load(const std::filesystem::path& path);
};

/// validate -> profile -> prune -> (translation / execution evaluation).
/// Writes into config.output_dir:
///   validation.json, profile.json, pruned.jsonl, manifest.json,
///   scores_translation.jsonl, scores_execution.jsonl, report.json.
/// Errors are rethrown as StageError naming the failing stage.
ReportBundle run_pipeline(const RunConfig& config, const RunStamp& stamp);

/// Corpus scores recomputed from a per-record score file.
LexicalScores rederive_scores(const std::filesystem::path& per_record_scores);

struct NamedReport {
    std::string name;
    ReportBundle report;
};

struct ComparisonTable {
    std::string csv;
    std::string text;
};

/// One row per run with translation and execution Google-BLEU / Exact Match;
/// missing scores print as "n/a". Values are written in shortest round-trip
/// form so they match the source reports exactly.
ComparisonTable emit_comparison_table(std::span<const NamedReport> reports);

void write_text_file(const std::filesystem::path& path, std::string_view content);

} // namespace cypherprune
