// cypherprune: command-line front end for profiling, pruning and scoring
// Text2Cypher datasets.
//
//   cypherprune validate data.jsonl [--lenient]
//   cypherprune profile data.jsonl --out profile.json
//   cypherprune prune --dataset train.jsonl --strategy complexity --out pruned.jsonl
//   cypherprune evaluate translation --dataset test.jsonl --predictions preds.jsonl
//   cypherprune evaluate execution --dataset test.jsonl --predictions preds.jsonl --replay fx.json
//   cypherprune report compare base=out_a/report.json pruned=out_b/report.json
//   cypherprune run --config run.json
//   cypherprune fixture record --dataset test.jsonl --predictions preds.jsonl --out fx.json
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cypherprune/dataset.hpp"
#include "cypherprune/errors.hpp"
#include "cypherprune/execution.hpp"
#include "cypherprune/metrics.hpp"
#include "cypherprune/pipeline.hpp"
#include "cypherprune/selection.hpp"
#include "cypherprune/text.hpp"

namespace cp = cypherprune;
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = std::string(cp::trim(item));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

void emit(const ordered_json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        cp::write_text_file(path, j.dump(2) + "\n");
    }
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cp::ConfigError("cannot open config " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw cp::ConfigError("config " + path + ": " + e.what());
    }
}

struct LoadFlags {
    bool lenient = false;
    std::string mapping;
    std::string split = "train";

    cp::LoadOptions options() const {
        cp::LoadOptions o;
        o.strict = !lenient;
        if (!mapping.empty()) o.fields = cp::FieldMapping::load(mapping);
        auto s = cp::parse_split(split);
        if (!s) throw cp::ConfigError("--split must be train or test");
        o.default_split = *s;
        return o;
    }
};

void add_load_flags(CLI::App* cmd, LoadFlags& flags, const char* default_split) {
    flags.split = default_split;
    cmd->add_flag("--lenient", flags.lenient, "Skip and report malformed lines instead of failing");
    cmd->add_option("--mapping", flags.mapping, "JSON file mapping record fields to input keys");
    cmd->add_option("--split", flags.split, "Split assigned to lines without a split field")
        ->check(CLI::IsMember({"train", "test"}));
}

// --- validate -------------------------------------------------------------

struct ValidateArgs {
    std::string dataset;
    std::string out;
    LoadFlags load;
};

int run_validate(const ValidateArgs& a) {
    auto options = a.load.options();
    auto result = cp::load_dataset(a.dataset, options);
    ordered_json j = result.report.to_json();
    j["counts"] = result.file.counts().to_json();
    emit(j, a.out);
    return result.report.invalid == 0 ? 0 : static_cast<int>(cp::ExitCode::kData);
}

// --- profile --------------------------------------------------------------

struct ProfileArgs {
    std::string dataset;
    std::string config;
    std::string terms;
    std::string out;
    std::string per_record;
    unsigned threads = 0;
    LoadFlags load;
};

int run_profile(const ProfileArgs& a) {
    std::vector<std::string> terms = cp::TermSet::defaults().terms();
    if (!a.config.empty()) {
        auto j = read_json_file(a.config);
        if (j.contains("term_set")) terms = j["term_set"].get<std::vector<std::string>>();
    }
    if (!a.terms.empty()) terms = split_list(a.terms);
    const cp::TermSet term_set(terms);

    auto file = cp::load_dataset(a.dataset, a.load.options()).file;
    auto table = cp::profile_dataset(file, term_set, a.threads);

    std::vector<const cp::CypherProfile*> ordered;
    std::string lines;
    for (const auto& r : file.records()) {
        const auto& p = table.at(r.record_id);
        ordered.push_back(&p);
        if (!a.per_record.empty()) {
            auto row = p.to_json();
            row["record_id"] = r.record_id;
            lines += row.dump() + '\n';
        }
    }
    if (!a.per_record.empty()) cp::write_text_file(a.per_record, lines);
    emit({{"term_set", term_set.terms()}, {"summary", cp::summarize(ordered).to_json()}}, a.out);
    return 0;
}

// --- prune ----------------------------------------------------------------

struct PruneArgs {
    std::string dataset;
    std::string config;
    std::string out;
    std::string manifest;
    std::optional<std::string> strategy;
    std::optional<std::size_t> target_size;
    std::optional<std::size_t> group_cap;
    std::optional<std::size_t> stratum_size;
    std::optional<double> stratum_percentile;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> hard_databases;
    std::optional<std::string> hard_sources;
    std::optional<std::string> length_unit;
    std::optional<std::string> group_by;
    std::string terms;
    unsigned threads = 0;
    LoadFlags load;
};

int run_prune(const PruneArgs& a) {
    cp::SelectionSpec spec;
    std::vector<std::string> terms = cp::TermSet::defaults().terms();
    if (!a.config.empty()) {
        auto j = read_json_file(a.config);
        if (j.contains("selection")) spec = cp::SelectionSpec::from_json(j["selection"]);
        if (j.contains("term_set")) terms = j["term_set"].get<std::vector<std::string>>();
    }
    if (a.strategy) spec.strategy = cp::parse_strategy(*a.strategy);
    if (a.target_size) spec.target_size = *a.target_size;
    if (a.group_cap) spec.group_cap = *a.group_cap;
    if (a.stratum_percentile) {
        spec.stratum_percentile = *a.stratum_percentile;
        spec.stratum_size.reset();
    }
    if (a.stratum_size) spec.stratum_size = *a.stratum_size;
    if (a.seed) spec.seed = *a.seed;
    if (a.hard_databases) {
        auto v = split_list(*a.hard_databases);
        spec.hard_databases = {v.begin(), v.end()};
    }
    if (a.hard_sources) {
        auto v = split_list(*a.hard_sources);
        spec.hard_sources = {v.begin(), v.end()};
    }
    if (a.length_unit) spec.length_unit = cp::parse_length_unit(*a.length_unit);
    if (a.group_by) spec.group_by = cp::parse_group_key(*a.group_by);
    if (!a.terms.empty()) terms = split_list(a.terms);
    spec.validate();

    const cp::TermSet term_set(terms);
    auto file = cp::load_dataset(a.dataset, a.load.options()).file;
    std::optional<cp::ProfileTable> profiles;
    if (cp::needs_profiles(spec.strategy)) profiles = cp::profile_dataset(file, term_set, a.threads);

    auto result = cp::run_selection(file, profiles ? &*profiles : nullptr, spec,
                                    {cp::current_timestamp(), &term_set});
    cp::write_dataset(cp::materialize(file, result), a.out);
    const auto manifest_path = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
    cp::write_text_file(manifest_path, result.manifest.dump(2) + "\n");

    std::cerr << "selected " << result.selected.size() << " of " << result.achievable
              << " achievable records (" << cp::to_string(spec.strategy) << ")\n";
    if (result.shortfall) std::cerr << "shortfall: " << *result.shortfall << '\n';
    return 0;
}

// --- evaluate -------------------------------------------------------------

struct EvalArgs {
    std::string dataset;
    std::string predictions;
    std::string out;
    std::string csv;
    std::string per_record;
    LoadFlags load;
    // execution only
    bool live = false;
    std::string replay;
    std::string config;
    std::optional<long long> timeout_ms;
    std::optional<std::size_t> max_in_flight;
    std::optional<unsigned> retries;
};

std::string translation_csv(const cp::GroupedScores& by_source, const cp::GroupedScores& by_db) {
    std::string csv = "grouping,group,google_bleu,exact_match,n\n";
    auto row = [&](const std::string& grouping, const std::string& group, const cp::LexicalScores& s) {
        csv += grouping + "," + group + "," + cp::format_double(s.google_bleu) + "," +
               cp::format_double(s.exact_match) + "," + std::to_string(s.n) + "\n";
    };
    row("all", "all", by_source.all);
    for (const auto& [g, s] : by_source.groups) row("data_source", g, s);
    for (const auto& [g, s] : by_db.groups) row("database_ref", g.empty() ? "(none)" : g, s);
    return csv;
}

void write_per_record(const std::string& path, const std::vector<cp::PairScore>& scores) {
    if (path.empty()) return;
    std::string body;
    for (const auto& s : scores) body += s.to_json().dump() + '\n';
    cp::write_text_file(path, body);
}

int run_eval_translation(const EvalArgs& a) {
    auto file = cp::load_dataset(a.dataset, a.load.options()).file;
    auto pairs = cp::load_predictions(a.predictions, file);
    auto scores = cp::score_pairs(pairs);
    auto by_source = cp::grouped_report(scores, cp::group_by_data_source(file));
    auto by_db = cp::grouped_report(scores, cp::group_by_database_ref(file));
    write_per_record(a.per_record, scores);
    if (!a.csv.empty()) cp::write_text_file(a.csv, translation_csv(by_source, by_db));
    emit({{"mode", "translation"},
          {"by_data_source", by_source.to_json()},
          {"by_database_ref", by_db.to_json()}},
         a.out);
    return 0;
}

cp::ExecutorBinding binding_from(const EvalArgs& a) {
    if (a.live == !a.replay.empty()) throw cp::ConfigError("choose exactly one of --live or --replay <fixture>");
    cp::ExecutorBinding b;
    if (!a.config.empty()) {
        auto j = read_json_file(a.config);
        if (j.contains("executor")) b = cp::executor_from_json(j["executor"], fs::path(a.config).parent_path());
    }
    if (a.live) {
        auto env = cp::ExecutorBinding::live_from_env();
        b.kind = cp::BindingKind::kLive;
        if (b.target.empty() || !(b.target.starts_with("http"))) b.target = env.target;
        if (b.user.empty()) b.user = env.user;
        if (b.password.empty()) b.password = env.password;
    } else {
        b.kind = cp::BindingKind::kReplay;
        b.target = a.replay;
    }
    if (a.timeout_ms) b.timeout = std::chrono::milliseconds(*a.timeout_ms);
    if (a.max_in_flight) b.max_in_flight = *a.max_in_flight;
    if (a.retries) b.retries = *a.retries;
    return b;
}

int run_eval_execution(const EvalArgs& a) {
    auto file = cp::load_dataset(a.dataset, a.load.options()).file;
    auto pairs = cp::load_predictions(a.predictions, file);
    cp::Executor executor(binding_from(a));
    auto report = cp::execution_scores(pairs, executor, file);
    write_per_record(a.per_record, report.per_pair);
    if (!a.csv.empty()) {
        cp::write_text_file(a.csv, "google_bleu,exact_match,n,evaluated,skipped\n" +
                                       cp::format_double(report.scores.google_bleu) + "," +
                                       cp::format_double(report.scores.exact_match) + "," +
                                       std::to_string(report.scores.n) + "," +
                                       std::to_string(report.coverage.evaluated) + "," +
                                       std::to_string(report.coverage.total - report.coverage.evaluated) +
                                       "\n");
    }
    auto j = report.to_json();
    j["mode"] = "execution";
    j["binding"] = executor.binding().to_json();
    emit(j, a.out);
    return 0;
}

int run_fixture_record(const EvalArgs& a) {
    auto file = cp::load_dataset(a.dataset, a.load.options()).file;
    auto pairs = cp::load_predictions(a.predictions, file);
    EvalArgs live = a;
    live.live = true;
    live.replay.clear();
    cp::Executor executor(binding_from(live));
    auto summary = cp::record_fixture(cp::fixture_queries(pairs, file), executor, a.out);
    std::cerr << "recorded " << summary.recorded << " queries (" << summary.duplicates
              << " duplicates, " << summary.refused << " write queries refused)\n";
    return 0;
}

// --- report / run ---------------------------------------------------------

struct CompareArgs {
    std::vector<std::string> reports;
    std::string csv;
    std::string text;
};

int run_compare(const CompareArgs& a) {
    if (a.reports.size() < 2) throw cp::ConfigError("report compare needs at least two reports");
    std::vector<cp::NamedReport> named;
    for (const auto& spec : a.reports) {
        std::string name;
        std::string path = spec;
        if (auto eq = spec.find('='); eq != std::string::npos) {
            name = spec.substr(0, eq);
            path = spec.substr(eq + 1);
        }
        auto bundle = cp::ReportBundle::load(path);
        if (name.empty()) name = bundle.run_name.empty() ? fs::path(path).parent_path().filename().string() : bundle.run_name;
        named.push_back({name, std::move(bundle)});
    }
    auto table = cp::emit_comparison_table(named);
    if (!a.csv.empty()) cp::write_text_file(a.csv, table.csv);
    if (!a.text.empty()) cp::write_text_file(a.text, table.text);
    std::cout << table.text;
    return 0;
}

struct RunArgs {
    std::string config;
    std::optional<std::string> out_dir;
    std::optional<std::string> strategy;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> target_size;
    std::optional<std::string> name;
    std::optional<unsigned> threads;
};

int run_run(const RunArgs& a) {
    auto config = cp::RunConfig::load(a.config);
    if (a.out_dir) config.output_dir = *a.out_dir;
    if (a.strategy) config.selection.strategy = cp::parse_strategy(*a.strategy);
    if (a.seed) config.selection.seed = *a.seed;
    if (a.target_size) config.selection.target_size = *a.target_size;
    if (a.name) config.run_name = *a.name;
    if (a.threads) config.threads = *a.threads;
    config.selection.validate();

    auto bundle = cp::run_pipeline(config, {cp::current_timestamp(), nullptr});
    std::cerr << "run " << config.run_name << ": wrote " << config.output_dir.string() << "\n";
    if (bundle.translation) {
        std::cerr << "  translation google_bleu=" << bundle.translation->all.google_bleu
                  << " exact_match=" << bundle.translation->all.exact_match << '\n';
    }
    if (bundle.execution) {
        std::cerr << "  execution google_bleu=" << bundle.execution->scores.google_bleu
                  << " exact_match=" << bundle.execution->scores.exact_match << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hard-example selection and evaluation for Text2Cypher datasets"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cp::tool_version()));

    int status = 0;

    ValidateArgs validate;
    auto* v = app.add_subcommand("validate", "Check a dataset file and print a validation report");
    v->add_option("dataset", validate.dataset, "JSON-lines dataset")->required();
    v->add_option("--out", validate.out, "Write the report here instead of stdout");
    add_load_flags(v, validate.load, "train");
    v->callback([&] { status = run_validate(validate); });

    ProfileArgs prof;
    auto* p = app.add_subcommand("profile", "Profile ground-truth queries and print corpus histograms");
    p->add_option("dataset", prof.dataset, "JSON-lines dataset")->required();
    p->add_option("--config", prof.config, "Run config supplying term_set");
    p->add_option("--terms", prof.terms, "Comma-separated term list (overrides config)");
    p->add_option("--out", prof.out, "Summary output file (default stdout)");
    p->add_option("--per-record", prof.per_record, "Write one profile per record (JSON lines)");
    p->add_option("--threads", prof.threads, "Worker threads, 0 = hardware concurrency");
    add_load_flags(p, prof.load, "train");
    p->callback([&] { status = run_profile(prof); });

    PruneArgs prune;
    auto* pr = app.add_subcommand("prune", "Select a hard-example subset of the train split");
    pr->add_option("--dataset", prune.dataset, "Training dataset")->required();
    pr->add_option("--out", prune.out, "Pruned dataset output")->required();
    pr->add_option("--manifest", prune.manifest, "Manifest output (default <out>.manifest.json)");
    pr->add_option("--config", prune.config, "Run config supplying selection and term_set");
    pr->add_option("--strategy", prune.strategy, "original|random_stratified|complexity|length|"
                                                 "cypher_terms|complexity_then_length|complexity_then_terms");
    pr->add_option("--target-size", prune.target_size, "Maximum number of train records to keep");
    pr->add_option("--group-cap", prune.group_cap, "Per-group limit for the complexity filter");
    auto* stratum = pr->add_option("--stratum-size", prune.stratum_size, "Records sampled per data source (random_stratified)");
    pr->add_option("--stratum-percentile", prune.stratum_percentile, "Derive the stratum size from group sizes")->excludes(stratum);
    pr->add_option("--seed", prune.seed, "Sampling seed");
    pr->add_option("--hard-databases", prune.hard_databases, "Comma-separated database_ref values");
    pr->add_option("--hard-sources", prune.hard_sources, "Comma-separated data_source values");
    pr->add_option("--length-unit", prune.length_unit, "Length measure for the length strategies")->check(CLI::IsMember({"chars", "tokens"}));
    pr->add_option("--group-by", prune.group_by, "Grouping used by the per-group cap")->check(CLI::IsMember({"data_source", "database_ref"}));
    pr->add_option("--terms", prune.terms, "Comma-separated term list");
    pr->add_option("--threads", prune.threads, "Profiling threads, 0 = hardware concurrency");
    add_load_flags(pr, prune.load, "train");
    pr->callback([&] { status = run_prune(prune); });

    auto* ev = app.add_subcommand("evaluate", "Score model predictions");
    ev->require_subcommand(1);

    EvalArgs trans;
    auto* et = ev->add_subcommand("translation", "Google-BLEU and Exact Match on query text");
    et->add_option("--dataset", trans.dataset, "Test dataset")->required();
    et->add_option("--predictions", trans.predictions, "JSON lines {record_id, generated}")->required();
    et->add_option("--out", trans.out, "Report output (default stdout)");
    et->add_option("--csv", trans.csv, "Per-group score table");
    et->add_option("--per-record", trans.per_record, "Per-record score file");
    add_load_flags(et, trans.load, "test");
    et->callback([&] { status = run_eval_translation(trans); });

    EvalArgs exec;
    auto* ex = ev->add_subcommand("execution", "Compare query results on the target database");
    ex->add_option("--dataset", exec.dataset, "Test dataset")->required();
    ex->add_option("--predictions", exec.predictions, "JSON lines {record_id, generated}")->required();
    ex->add_flag("--live", exec.live, "Execute against GRAPHDB_URI");
    ex->add_option("--replay", exec.replay, "Replay outcomes from a fixture file");
    ex->add_option("--config", exec.config, "Run config supplying the executor block");
    ex->add_option("--timeout-ms", exec.timeout_ms, "Per-query timeout");
    ex->add_option("--max-in-flight", exec.max_in_flight, "Concurrent queries against the backend");
    ex->add_option("--retries", exec.retries, "Retries on transient connection errors");
    ex->add_option("--out", exec.out, "Report output (default stdout)");
    ex->add_option("--csv", exec.csv, "Score table");
    ex->add_option("--per-record", exec.per_record, "Per-record score file");
    add_load_flags(ex, exec.load, "test");
    ex->callback([&] { status = run_eval_execution(exec); });

    CompareArgs compare;
    auto* rep = app.add_subcommand("report", "Report utilities");
    rep->require_subcommand(1);
    auto* rc = rep->add_subcommand("compare", "Side-by-side table of several runs");
    rc->add_option("reports", compare.reports, "report.json files, optionally name=path")->required();
    rc->add_option("--csv", compare.csv, "Write the table as CSV");
    rc->add_option("--text", compare.text, "Write the aligned text table");
    rc->callback([&] { status = run_compare(compare); });

    RunArgs run;
    auto* rn = app.add_subcommand("run", "validate -> profile -> prune -> evaluate from a config file");
    rn->add_option("--config", run.config, "Run config (JSON)")->required();
    rn->add_option("--out-dir", run.out_dir, "Override output_dir");
    rn->add_option("--strategy", run.strategy, "Override selection.strategy");
    rn->add_option("--seed", run.seed, "Override selection.seed");
    rn->add_option("--target-size", run.target_size, "Override selection.target_size");
    rn->add_option("--name", run.name, "Override run_name");
    rn->add_option("--threads", run.threads, "Override threads");
    rn->callback([&] { status = run_run(run); });

    EvalArgs record;
    auto* fx = app.add_subcommand("fixture", "Replay fixture utilities");
    fx->require_subcommand(1);
    auto* fr = fx->add_subcommand("record", "Execute queries live and save a replay fixture");
    fr->add_option("--dataset", record.dataset, "Test dataset")->required();
    fr->add_option("--predictions", record.predictions, "JSON lines {record_id, generated}")->required();
    fr->add_option("--out", record.out, "Fixture output")->required();
    fr->add_option("--config", record.config, "Run config supplying the executor block");
    fr->add_option("--timeout-ms", record.timeout_ms, "Per-query timeout");
    add_load_flags(fr, record.load, "test");
    fr->callback([&] { status = run_fixture_record(record); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(cp::ExitCode::kUsage);
    } catch (const cp::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(cp::ExitCode::kData);
    }
    return status;
}
