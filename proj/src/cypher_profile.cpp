#include "cypherprune/cypher_profile.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cypherprune/dataset.hpp"
#include "cypherprune/errors.hpp"
#include "cypherprune/text.hpp"

namespace cypherprune {

TermSet::TermSet(const std::vector<std::string>& terms) : keywords_(KeywordSet::cypher_defaults()) {
    if (terms.empty()) throw ConfigError("term set must not be empty");
    for (const auto& raw : terms) {
        auto canonical = to_upper_ascii(normalize_whitespace(raw));
        if (canonical.empty()) throw ConfigError("term set contains a blank term");
        if (std::find(terms_.begin(), terms_.end(), canonical) != terms_.end()) continue;

        Entry entry{canonical, {}};
        std::size_t start = 0;
        while (start <= canonical.size()) {
            auto end = canonical.find(' ', start);
            if (end == std::string::npos) end = canonical.size();
            entry.words.push_back(canonical.substr(start, end - start));
            keywords_.insert(entry.words.back());
            start = end + 1;
        }
        by_first_word_[entry.words.front()].push_back(std::move(entry));
        terms_.push_back(std::move(canonical));
    }
    for (auto& [word, entries] : by_first_word_) {
        std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            return a.words.size() > b.words.size();
        });
    }
}

const TermSet& TermSet::defaults() {
    static const TermSet kDefaults({"MATCH", "OPTIONAL MATCH", "WHERE", "RETURN", "WITH", "UNWIND",
                                    "ORDER BY", "SKIP", "LIMIT", "CREATE", "MERGE", "DELETE",
                                    "DETACH DELETE", "SET", "REMOVE", "FOREACH", "CALL", "YIELD",
                                    "UNION", "CASE", "EXISTS", "COUNT", "DISTINCT"});
    return kDefaults;
}

const std::vector<TermSet::Entry>* TermSet::starting_with(const std::string& upper_word) const {
    auto it = by_first_word_.find(upper_word);
    return it == by_first_word_.end() ? nullptr : &it->second;
}

std::string_view to_string(LengthUnit unit) noexcept {
    return unit == LengthUnit::kChars ? "chars" : "tokens";
}

LengthUnit parse_length_unit(std::string_view text) {
    if (text == "chars") return LengthUnit::kChars;
    if (text == "tokens") return LengthUnit::kTokens;
    throw ConfigError("length unit must be \"chars\" or \"tokens\", got \"" + std::string(text) + "\"");
}

std::size_t CypherProfile::count(const std::string& term) const {
    auto it = term_counts.find(term);
    return it == term_counts.end() ? 0 : it->second;
}

nlohmann::ordered_json CypherProfile::to_json() const {
    return {{"char_length", char_length},
            {"token_length", token_length},
            {"term_total", term_total},
            {"term_counts", term_counts},
            {"recovered", recovered}};
}

CypherProfile profile(std::string_view query, const TermSet& terms) {
    CypherProfile p;
    p.char_length = utf8_length(normalize_whitespace(query));

    auto lexed = lex(query, terms.keywords());
    p.recovered = !lexed.issues.empty();

    std::vector<const CypherToken*> significant;
    significant.reserve(lexed.tokens.size());
    for (const auto& t : lexed.tokens) {
        if (t.significant()) significant.push_back(&t);
    }
    p.token_length = significant.size();

    // longest match first, matched words are consumed
    std::size_t i = 0;
    while (i < significant.size()) {
        const auto* tok = significant[i];
        const std::vector<TermSet::Entry>* candidates = nullptr;
        if (tok->kind == TokenKind::kKeyword) candidates = terms.starting_with(to_upper_ascii(tok->text));

        std::size_t consumed = 1;
        if (candidates != nullptr) {
            for (const auto& entry : *candidates) {
                const auto n = entry.words.size();
                if (i + n > significant.size()) continue;
                bool ok = true;
                for (std::size_t k = 1; k < n && ok; ++k) {
                    const auto* next = significant[i + k];
                    ok = next->kind == TokenKind::kKeyword && iequals_ascii(next->text, entry.words[k]);
                }
                if (ok) {
                    ++p.term_counts[entry.term];
                    ++p.term_total;
                    consumed = n;
                    break;
                }
            }
        }
        i += consumed;
    }
    return p;
}

ProfileTable profile_dataset(const DatasetFile& file, const TermSet& terms, unsigned threads) {
    const auto& records = file.records();
    std::vector<CypherProfile> profiles(records.size());

    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(records.size(), 1)));

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) profiles[i] = profile(records[i].cypher, terms);
    };
    if (threads <= 1) {
        work(0, records.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (records.size() + threads - 1) / threads;
        for (std::size_t begin = 0; begin < records.size(); begin += chunk) {
            pool.emplace_back(work, begin, std::min(begin + chunk, records.size()));
        }
    }

    ProfileTable table;
    table.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        table.emplace(records[i].record_id, std::move(profiles[i]));
    }
    return table;
}

std::size_t nearest_rank(std::vector<std::size_t> values, double fraction) {
    if (values.empty()) throw std::invalid_argument("nearest_rank: empty sample");
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("nearest_rank: fraction must be in (0, 1]");
    }
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    // the epsilon keeps e.g. 0.7 * 10 from rounding up to rank 8
    auto rank = static_cast<std::size_t>(std::ceil(fraction * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

nlohmann::ordered_json CorpusSummary::to_json() const {
    nlohmann::ordered_json hist = nlohmann::ordered_json::object();
    for (const auto& [total, n] : term_total_histogram) hist[std::to_string(total)] = n;
    return {{"count", count},
            {"mean_char_length", mean_char_length},
            {"mean_token_length", mean_token_length},
            {"mean_term_total", mean_term_total},
            {"recovered", recovered},
            {"char_length_deciles", char_length_deciles},
            {"token_length_deciles", token_length_deciles},
            {"term_total_histogram", std::move(hist)},
            {"term_frequencies", term_frequencies}};
}

CorpusSummary summarize(const std::vector<const CypherProfile*>& profiles) {
    CorpusSummary s;
    s.count = profiles.size();
    if (profiles.empty()) return s;

    std::vector<std::size_t> chars;
    std::vector<std::size_t> tokens;
    chars.reserve(profiles.size());
    tokens.reserve(profiles.size());
    std::size_t char_sum = 0;
    std::size_t token_sum = 0;
    std::size_t term_sum = 0;
    for (const auto* p : profiles) {
        chars.push_back(p->char_length);
        tokens.push_back(p->token_length);
        char_sum += p->char_length;
        token_sum += p->token_length;
        term_sum += p->term_total;
        if (p->recovered) ++s.recovered;
        ++s.term_total_histogram[p->term_total];
        for (const auto& [term, n] : p->term_counts) s.term_frequencies[term] += n;
    }
    const auto n = static_cast<double>(profiles.size());
    s.mean_char_length = static_cast<double>(char_sum) / n;
    s.mean_token_length = static_cast<double>(token_sum) / n;
    s.mean_term_total = static_cast<double>(term_sum) / n;
    for (int d = 1; d <= 10; ++d) {
        s.char_length_deciles.push_back(nearest_rank(chars, d / 10.0));
        s.token_length_deciles.push_back(nearest_rank(tokens, d / 10.0));
    }
    return s;
}

} // namespace cypherprune
