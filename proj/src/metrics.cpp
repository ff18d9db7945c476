#include "cypherprune/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "cypherprune/dataset.hpp"
#include "cypherprune/errors.hpp"
#include "cypherprune/text.hpp"

namespace cypherprune {

using nlohmann::ordered_json;

ordered_json LexicalScores::to_json() const {
    return {{"google_bleu", google_bleu}, {"exact_match", exact_match}, {"n", n}};
}

namespace {

constexpr std::string_view kFence = "```";
constexpr std::string_view kPrefix = "cypher:";

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && iequals_ascii(s.substr(0, prefix.size()), prefix);
}

/// Drops an opening fence and, when it sits alone on its line, the language tag.
std::string_view drop_opening_fence(std::string_view s) {
    s.remove_prefix(kFence.size());
    auto nl = s.find('\n');
    if (nl != std::string_view::npos) {
        auto tag = trim(s.substr(0, nl));
        bool single_word = std::none_of(tag.begin(), tag.end(), [](char c) { return is_space(c); });
        if (single_word && tag.find(kFence) == std::string_view::npos) s.remove_prefix(nl + 1);
    }
    return s;
}

bool is_bleu_punct(unsigned char c) {
    return c < 0x80 && std::ispunct(c) != 0 && c != '_';
}

} // namespace

std::string postprocess(std::string_view generated) {
    std::string_view s = trim(generated);
    while (true) {
        const auto before = s.size();
        if (s.starts_with(kFence)) s = trim(drop_opening_fence(s));
        if (s.ends_with(kFence)) s = trim(s.substr(0, s.size() - kFence.size()));
        if (starts_with_ci(s, kPrefix)) s = trim(s.substr(kPrefix.size()));
        if (s.size() == before) break;
    }
    return normalize_whitespace(s);
}

std::vector<std::string> tokenize_for_bleu(std::string_view text) {
    std::vector<std::string> tokens;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) tokens.push_back(std::move(word));
        word.clear();
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c == '\'' || c == '"' || c == '`') {
            flush();
            std::size_t j = i + 1;
            while (j < text.size() && text[j] != static_cast<char>(c)) {
                if (text[j] == '\\' && c != '`') ++j;
                ++j;
            }
            j = std::min(j + 1, text.size());
            tokens.emplace_back(text.substr(i, j - i));
            i = j;
        } else if (is_space(static_cast<char>(c))) {
            flush();
            ++i;
        } else if (is_bleu_punct(c)) {
            flush();
            tokens.emplace_back(1, static_cast<char>(c));
            ++i;
        } else {
            word.push_back(static_cast<char>(c));
            ++i;
        }
    }
    flush();
    return tokens;
}

double GleuCounts::score() const noexcept {
    const auto denom = std::max(hypothesis_ngrams, reference_ngrams);
    return denom == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(denom);
}

GleuCounts gleu_counts(std::span<const std::string> hypothesis, std::span<const std::string> reference,
                       std::size_t max_n) {
    if (max_n < 1) throw MetricError(MetricErrc::kInvalidArgument, "max_n must be >= 1");

    // intern tokens so n-grams can be keyed by small integer vectors
    std::unordered_map<std::string_view, std::uint32_t> vocab;
    auto encode = [&](std::span<const std::string> toks) {
        std::vector<std::uint32_t> ids;
        ids.reserve(toks.size());
        for (const auto& t : toks) {
            auto [it, _] = vocab.emplace(t, static_cast<std::uint32_t>(vocab.size()));
            ids.push_back(it->second);
        }
        return ids;
    };
    const auto hyp = encode(hypothesis);
    const auto ref = encode(reference);

    GleuCounts c;
    std::map<std::vector<std::uint32_t>, std::uint64_t> ref_counts;
    std::map<std::vector<std::uint32_t>, std::uint64_t> hyp_counts;
    for (std::size_t n = 1; n <= max_n; ++n) {
        ref_counts.clear();
        hyp_counts.clear();
        for (std::size_t i = 0; i + n <= ref.size(); ++i) {
            ++ref_counts[std::vector<std::uint32_t>(ref.begin() + i, ref.begin() + i + n)];
            ++c.reference_ngrams;
        }
        for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
            ++hyp_counts[std::vector<std::uint32_t>(hyp.begin() + i, hyp.begin() + i + n)];
            ++c.hypothesis_ngrams;
        }
        for (const auto& [gram, count] : hyp_counts) {
            if (auto it = ref_counts.find(gram); it != ref_counts.end()) {
                c.matches += std::min(count, it->second);
            }
        }
    }
    return c;
}

ordered_json PairScore::to_json() const {
    return {{"record_id", record_id},
            {"matches", counts.matches},
            {"hypothesis_ngrams", counts.hypothesis_ngrams},
            {"reference_ngrams", counts.reference_ngrams},
            {"exact", exact}};
}

PairScore PairScore::from_json(const nlohmann::json& j) {
    PairScore p;
    p.record_id = j.at("record_id").get<std::string>();
    p.counts.matches = j.at("matches").get<std::uint64_t>();
    p.counts.hypothesis_ngrams = j.at("hypothesis_ngrams").get<std::uint64_t>();
    p.counts.reference_ngrams = j.at("reference_ngrams").get<std::uint64_t>();
    p.exact = j.at("exact").get<bool>();
    return p;
}

std::vector<PairScore> score_pairs(std::span<const EvalPair> pairs, std::size_t max_n) {
    if (pairs.empty()) throw MetricError(MetricErrc::kEmptyInput, "no evaluation pairs");
    std::vector<PairScore> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        auto hyp = postprocess(p.generated);
        auto ref = normalize_whitespace(p.reference);
        PairScore s;
        s.record_id = p.record_id;
        s.counts = gleu_counts(tokenize_for_bleu(hyp), tokenize_for_bleu(ref), max_n);
        s.exact = hyp == ref;
        out.push_back(std::move(s));
    }
    return out;
}

LexicalScores aggregate(std::span<const PairScore> scores) {
    if (scores.empty()) throw MetricError(MetricErrc::kEmptyInput, "no scored pairs");
    GleuCounts total;
    std::size_t exact = 0;
    for (const auto& s : scores) {
        total += s.counts;
        if (s.exact) ++exact;
    }
    return {total.score(), static_cast<double>(exact) / static_cast<double>(scores.size()),
            scores.size()};
}

double google_bleu(std::span<const EvalPair> pairs, std::size_t max_n) {
    return aggregate(score_pairs(pairs, max_n)).google_bleu;
}

double exact_match(std::span<const EvalPair> pairs) {
    return aggregate(score_pairs(pairs)).exact_match;
}

ordered_json GroupedScores::to_json() const {
    ordered_json g = ordered_json::object();
    for (const auto& [key, s] : groups) g[key] = s.to_json();
    return {{"all", all.to_json()}, {"groups", std::move(g)}};
}

GroupedScores grouped_report(std::span<const PairScore> scores, const Grouping& grouping) {
    std::map<std::string, std::vector<PairScore>> buckets;
    for (const auto& s : scores) {
        auto it = grouping.find(s.record_id);
        if (it == grouping.end()) {
            throw MetricError(MetricErrc::kUnknownRecordId,
                              "record '" + s.record_id + "' has no group key");
        }
        buckets[it->second].push_back(s);
    }
    GroupedScores out;
    out.all = aggregate(scores);
    for (const auto& [key, members] : buckets) out.groups[key] = aggregate(members);
    return out;
}

GroupedScores grouped_report(std::span<const EvalPair> pairs, const Grouping& grouping,
                             std::size_t max_n) {
    return grouped_report(score_pairs(pairs, max_n), grouping);
}

Grouping group_by_data_source(const DatasetFile& file) {
    Grouping g;
    for (const auto& r : file.records()) g.emplace(r.record_id, r.data_source);
    return g;
}

Grouping group_by_database_ref(const DatasetFile& file) {
    Grouping g;
    for (const auto& r : file.records()) g.emplace(r.record_id, r.database_ref.value_or(""));
    return g;
}

std::vector<EvalPair> load_predictions(const std::filesystem::path& path, const DatasetFile& dataset) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError(DatasetErrc::kMissingFile, "cannot open predictions " + path.string());

    auto pick = [](const nlohmann::json& j, std::initializer_list<const char*> keys) -> const nlohmann::json* {
        for (const char* k : keys) {
            if (auto it = j.find(k); it != j.end()) return &*it;
        }
        return nullptr;
    };

    std::vector<EvalPair> pairs;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fail = [&](const std::string& cause) {
            throw DatasetError(DatasetErrc::kMalformedLine,
                               path.string() + " line " + std::to_string(line_no) + ": " + cause,
                               line_no);
        };
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(std::string("invalid JSON: ") + e.what());
        }
        const auto* id = pick(j, {"record_id", "instance_id"});
        const auto* gen = pick(j, {"generated", "prediction"});
        if (id == nullptr || !id->is_string()) fail("missing string \"record_id\"");
        if (gen == nullptr || !(gen->is_string() || gen->is_null())) fail("missing \"generated\"");
        auto record_id = id->get<std::string>();
        const auto* record = dataset.find(record_id);
        if (record == nullptr) fail("unknown record id '" + record_id + "'");
        if (!seen.insert(record_id).second) fail("duplicate prediction for '" + record_id + "'");
        pairs.push_back({record_id, gen->is_null() ? "" : gen->get<std::string>(), record->cypher});
    }
    if (pairs.empty()) throw DatasetError(DatasetErrc::kEmptyDataset, "no predictions in " + path.string());
    return pairs;
}

} // namespace cypherprune
