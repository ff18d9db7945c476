#include <doctest.h>

#include <random>

#include "cypherprune/dataset.hpp"
#include "cypherprune/errors.hpp"
#include "cypherprune/metrics.hpp"
#include "generators.hpp"
#include "gleu_oracle.hpp"
#include "support.hpp"

using namespace cypherprune;
using Tokens = std::vector<std::string>;

namespace {

std::string join(const Tokens& t) {
    std::string s;
    for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
    return s;
}

Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, std::size_t alphabet) {
    Tokens t(testing::uniform(rng, 0, max_len));
    for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng() % alphabet));
    return t;
}

} // namespace

TEST_CASE("postprocess") {
    CHECK(postprocess("cypher: MATCH (n) RETURN n") == "MATCH (n) RETURN n");
    CHECK(postprocess("CYPHER:MATCH (n) RETURN n") == "MATCH (n) RETURN n");
    CHECK(postprocess("MATCH (n) RETURN n") == "MATCH (n) RETURN n");
    CHECK(postprocess("```cypher\nMATCH (n)\nRETURN n\n```") == "MATCH (n) RETURN n");
    CHECK(postprocess("```\nMATCH (n) RETURN n```") == "MATCH (n) RETURN n");
    CHECK(postprocess("  cypher: ```cypher\nRETURN 1\n```  ") == "RETURN 1");
    CHECK(postprocess("```MATCH (n) RETURN n```") == "MATCH (n) RETURN n");
    CHECK(postprocess("").empty());
    CHECK(postprocess("```").empty());
}

TEST_CASE("property: postprocess is idempotent") {
    std::mt19937_64 rng(41);
    const std::vector<std::string> wrappers = {"", "cypher:", "Cypher: ", "```", "```cypher\n", "\n", "  "};
    for (int i = 0; i < 2000; ++i) {
        std::string s = testing::pick(rng, wrappers) + testing::pick(rng, wrappers);
        s += rng() % 2 ? testing::generate_query(rng).text : testing::generate_noise(rng, 10);
        s += testing::pick(rng, wrappers) + testing::pick(rng, wrappers);
        const auto once = postprocess(s);
        INFO(s);
        REQUIRE(postprocess(once) == once);
    }
}

TEST_CASE("tokenize_for_bleu") {
    CHECK(tokenize_for_bleu("MATCH (n) RETURN n") == Tokens{"MATCH", "(", "n", ")", "RETURN", "n"});
    CHECK(tokenize_for_bleu("").empty());
    CHECK(tokenize_for_bleu("RETURN 'a b'") == Tokens{"RETURN", "'a b'"});
    CHECK(tokenize_for_bleu("n.first_name<>\"x \\\" y\"") ==
          Tokens{"n", ".", "first_name", "<", ">", "\"x \\\" y\""});
    CHECK(tokenize_for_bleu("RETURN 'open") == Tokens{"RETURN", "'open"});
}

TEST_CASE("google_bleu worked values") {
    CHECK(google_bleu(std::vector<EvalPair>{{"1", "MATCH (n) RETURN n", "MATCH (n) RETURN n"}}) == 1.0);
    CHECK(google_bleu(std::vector<EvalPair>{{"1", "a b c", "a b d"}}) == 0.5);
    CHECK(google_bleu(std::vector<EvalPair>{{"1", "", "MATCH (n) RETURN n"}}) == 0.0);
    CHECK_THROWS_AS(google_bleu(std::vector<EvalPair>{}), MetricError);

    auto c = gleu_counts(Tokens{"a", "b", "c"}, Tokens{"a", "b", "d"});
    CHECK(c == GleuCounts{3, 6, 6});
    CHECK(gleu_counts(Tokens{}, Tokens{"a"}) == GleuCounts{0, 0, 1});
    CHECK(gleu_counts(Tokens{}, Tokens{}).score() == 0.0);
    CHECK_THROWS_AS(gleu_counts(Tokens{}, Tokens{}, 0), MetricError);
}

TEST_CASE("google_bleu is micro-averaged over the corpus") {
    // 1.0 on a long pair and 0.0 on a short one: the corpus number is weighted
    // by n-gram mass rather than the mean of the two sentence scores.
    std::vector<EvalPair> pairs = {{"1", "a b c d e", "a b c d e"}, {"2", "x", "y"}};
    // matches 5+4+3+2 = 14; hypothesis n-grams 14 + 1 = 15 on both sides
    CHECK(google_bleu(pairs) == doctest::Approx(14.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("property: GLEU agrees with the brute-force oracle") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<EvalPair> pairs;
        std::vector<std::pair<Tokens, Tokens>> raw;
        const auto n = testing::uniform(rng, 1, 4);
        for (std::size_t i = 0; i < n; ++i) {
            auto h = random_tokens(rng, 30, 8);
            auto r = random_tokens(rng, 30, 8);
            if (r.empty()) r.push_back("a");
            pairs.push_back({std::to_string(i), join(h), join(r)});
            raw.emplace_back(h, r);
        }
        REQUIRE(std::abs(google_bleu(pairs) - testing::oracle_corpus_gleu(raw)) <= 1e-9);
    }
}

TEST_CASE("property: match counts are symmetric") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 500; ++trial) {
        auto h = random_tokens(rng, 20, 4);
        auto r = random_tokens(rng, 20, 4);
        auto forward = gleu_counts(h, r);
        auto backward = gleu_counts(r, h);
        REQUIRE(forward.matches == backward.matches);
        REQUIRE(forward.hypothesis_ngrams == backward.reference_ngrams);
        REQUIRE(forward.score() == backward.score());
    }
}

TEST_CASE("property: scores stay in range; identity gives 1") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<EvalPair> pairs, identical;
        for (int i = 0; i < 5; ++i) {
            auto q = testing::generate_query(rng).text;
            pairs.push_back({std::to_string(i), testing::generate_query(rng).text, q});
            identical.push_back({std::to_string(i), "cypher: " + q, q});
        }
        auto s = aggregate(score_pairs(pairs));
        REQUIRE(s.google_bleu >= 0.0);
        REQUIRE(s.google_bleu <= 1.0);
        REQUIRE(s.exact_match >= 0.0);
        REQUIRE(s.exact_match <= 1.0);
        auto id = aggregate(score_pairs(identical));
        REQUIRE(id.google_bleu == 1.0);
        REQUIRE(id.exact_match == 1.0);
    }
}

TEST_CASE("exact_match") {
    CHECK(exact_match(std::vector<EvalPair>{{"1", "MATCH (n) RETURN n", "MATCH (n) RETURN n"}}) == 1.0);
    CHECK(exact_match(std::vector<EvalPair>{{"1", "match (n) return n", "MATCH (n) RETURN n"}}) == 0.0);
    CHECK(exact_match(std::vector<EvalPair>{{"1", "RETURN 1", "RETURN 1"},
                                            {"2", "RETURN 2", "RETURN 1"},
                                            {"3", "", "RETURN 1"},
                                            {"4", "RETURN  1", "RETURN 2"}}) == 0.25);
    // Reference whitespace is normalised too.
    CHECK(exact_match(std::vector<EvalPair>{{"1", "RETURN 1", "RETURN\n  1"}}) == 1.0);
}

TEST_CASE("property: exact_match monotonicity") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<EvalPair> pairs;
        const auto n = testing::uniform(rng, 1, 10);
        for (std::size_t i = 0; i < n; ++i) {
            pairs.push_back({std::to_string(i), rng() % 2 ? "RETURN 1" : "RETURN 2", "RETURN 1"});
        }
        const double before = exact_match(pairs);
        auto worse = pairs;
        worse.push_back({"x", "RETURN 3", "RETURN 1"});
        REQUIRE(exact_match(worse) <= before);
        auto better = pairs;
        better.push_back({"x", "RETURN 1", "RETURN 1"});
        REQUIRE(exact_match(better) >= before);
        REQUIRE(exact_match(better) >= before * static_cast<double>(n) / static_cast<double>(n + 1));
    }
}

TEST_CASE("grouped_report") {
    std::vector<EvalPair> pairs = {{"a", "x y z", "x y z"}, {"b", "p q r", "s t u"}};
    Grouping one{{"a", "g"}, {"b", "g"}};
    auto single = grouped_report(pairs, one);
    CHECK(single.groups.at("g").google_bleu == single.all.google_bleu);
    CHECK(single.all.google_bleu == google_bleu(pairs));

    Grouping two{{"a", "good"}, {"b", "bad"}};
    auto split = grouped_report(pairs, two);
    CHECK(split.groups.at("good").google_bleu == 1.0);
    CHECK(split.groups.at("bad").google_bleu == 0.0);
    // 6 matches of 12 n-grams on each side, equal to the macro mean only by construction
    CHECK(split.all.google_bleu == 0.5);
    CHECK(split.all.exact_match == 0.5);

    std::vector<EvalPair> skewed = {{"a", "x y z w", "x y z w"}, {"b", "p", "s"}};
    auto sk = grouped_report(skewed, two);
    CHECK(sk.all.google_bleu == doctest::Approx(10.0 / 11.0));
    CHECK(sk.all.google_bleu != doctest::Approx(0.5));

    Grouping missing{{"a", "g"}};
    try {
        grouped_report(pairs, missing);
        FAIL("expected UnknownRecordId");
    } catch (const MetricError& e) {
        CHECK(e.code() == MetricErrc::kUnknownRecordId);
    }
}

TEST_CASE("pair scores round-trip through json") {
    auto scores = score_pairs(std::vector<EvalPair>{{"r1", "a b c", "a b d"}});
    auto back = PairScore::from_json(nlohmann::json::parse(scores[0].to_json().dump()));
    CHECK(back.record_id == "r1");
    CHECK(back.counts == scores[0].counts);
    CHECK(back.exact == scores[0].exact);
}

TEST_CASE("load_predictions") {
    testing::TempDir dir;
    DatasetFile file({testing::make_record("a", "RETURN 1", "s"), testing::make_record("b", "RETURN 2", "s")});
    testing::write_file(dir / "p.jsonl", R"({"record_id":"a","generated":"cypher: RETURN 1"})" "\n"
                                         R"({"instance_id":"b","prediction":null})" "\n");
    auto pairs = load_predictions(dir / "p.jsonl", file);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].reference == "RETURN 1");
    CHECK(pairs[1].generated.empty());

    testing::write_file(dir / "unknown.jsonl", R"({"record_id":"zz","generated":"x"})" "\n");
    CHECK_THROWS_AS(load_predictions(dir / "unknown.jsonl", file), DatasetError);
    testing::write_file(dir / "dup.jsonl", R"({"record_id":"a","generated":"x"})" "\n"
                                           R"({"record_id":"a","generated":"y"})" "\n");
    CHECK_THROWS_AS(load_predictions(dir / "dup.jsonl", file), DatasetError);
    CHECK_THROWS_AS(load_predictions(dir / "none.jsonl", file), DatasetError);
}
