#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sys/stat.h>

#include "cypherprune/dataset.hpp"
#include "cypherprune/errors.hpp"
#include "support.hpp"

using namespace cypherprune;
using testing::make_record;
using testing::TempDir;
using testing::write_file;

namespace {

std::string line(const std::string& id, const std::string& cypher, const std::string& source,
                 const std::string& extra = "") {
    return R"({"instance_id":")" + id + R"(","question":"q )" + id + R"(","schema":"","cypher":")" + cypher +
           R"(","data_source":")" + source + "\"" + extra + "}\n";
}

DatasetErrc load_error(const std::filesystem::path& path, const LoadOptions& opts = {}) {
    try {
        load_dataset(path, opts);
    } catch (const DatasetError& e) {
        return e.code();
    }
    FAIL("expected DatasetError");
    return DatasetErrc::kIoFailure;
}

// Printable ASCII plus newline, tab, quotes, backslash and a few multi-byte
// characters, so escaping is exercised without producing invalid UTF-8.
std::string random_text(std::mt19937& rng, std::size_t max_len) {
    static const std::vector<std::string> pieces = {
        "a", "Z", " ", "\n", "\t", "\"", "\\", "'", "`", "{", "}", "\r", "\x01", "\xc3\xa9", "\xe2\x82\xac", "7"};
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    std::string s = "x";
    for (std::size_t i = len(rng); i > 0; --i) s += pieces[pick(rng)];
    return s;
}

} // namespace

TEST_CASE("three valid lines load with consistent counts") {
    TempDir dir;
    write_file(dir / "d.jsonl", line("1", "MATCH (n) RETURN n", "s1") + line("2", "RETURN 1", "s1") +
                                    line("3", "RETURN 2", "s2", R"(,"database_ref":"movies")"));
    auto result = load_dataset(dir / "d.jsonl");
    REQUIRE(result.file.size() == 3);
    CHECK(result.report.valid == 3);
    CHECK(result.report.invalid == 0);
    CHECK(result.file.counts() == count_records(result.file.records()));
    CHECK(result.file.counts().by_data_source.at("s1") == 2);
    CHECK(result.file.counts().by_database_ref.at("") == 2);
    CHECK(result.file.counts().by_database_ref.at("movies") == 1);
    CHECK(result.file.records()[2].database_ref == std::optional<std::string>("movies"));
}

TEST_CASE("empty cypher in strict mode names the line") {
    TempDir dir;
    write_file(dir / "d.jsonl", line("1", "RETURN 1", "s") + "\n" + line("2", "   ", "s"));
    try {
        load_dataset(dir / "d.jsonl");
        FAIL("expected MalformedLine");
    } catch (const DatasetError& e) {
        CHECK(e.code() == DatasetErrc::kMalformedLine);
        CHECK(e.line_no() == 3);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        CHECK(std::string(e.what()).find("cypher") != std::string::npos);
    }
}

TEST_CASE("lenient mode keeps valid lines and reports the rest") {
    TempDir dir;
    write_file(dir / "d.jsonl", line("1", "RETURN 1", "s") + "{not json\n" + line("2", "", "s") +
                                    line("1", "RETURN 3", "s") + line("4", "RETURN 4", "s"));
    LoadOptions opts;
    opts.strict = false;
    auto result = load_dataset(dir / "d.jsonl", opts);
    CHECK(result.file.size() == 2);
    CHECK(result.report.total == 5);
    CHECK(result.report.invalid == 3);
    REQUIRE(result.report.errors.size() == 3);
    CHECK(result.report.errors[0].line == 2);
    CHECK(result.report.errors[2].cause.find("duplicate") != std::string::npos);
}

TEST_CASE("40 lines over 4 data sources count 10 each") {
    TempDir dir;
    std::string body;
    const std::vector<std::string> sources = {"alpha", "beta", "gamma", "delta"};
    for (int i = 0; i < 40; ++i) {
        body += line("r" + std::to_string(i), "RETURN " + std::to_string(i), sources[i % 4]);
    }
    write_file(dir / "d.jsonl", body);
    auto counts = load_dataset(dir / "d.jsonl").file.counts();
    CHECK(counts.total == 40);
    REQUIRE(counts.by_data_source.size() == 4);
    for (const auto& s : sources) CHECK(counts.by_data_source.at(s) == 10);
}

TEST_CASE("load errors") {
    TempDir dir;
    CHECK(load_error(dir / "missing.jsonl") == DatasetErrc::kMissingFile);

    write_file(dir / "blank.jsonl", "\n  \n");
    CHECK(load_error(dir / "blank.jsonl") == DatasetErrc::kEmptyDataset);

    write_file(dir / "dup.jsonl", line("1", "RETURN 1", "s") + line("1", "RETURN 2", "s"));
    CHECK(load_error(dir / "dup.jsonl") == DatasetErrc::kDuplicateRecordId);

    write_file(dir / "split.jsonl", line("1", "RETURN 1", "s", R"(,"split":"dev")"));
    CHECK(load_error(dir / "split.jsonl") == DatasetErrc::kMalformedLine);

    write_file(dir / "nosource.jsonl", R"({"question":"q","cypher":"RETURN 1"})" "\n");
    CHECK(load_error(dir / "nosource.jsonl") == DatasetErrc::kMalformedLine);

    write_file(dir / "array.jsonl", "[1,2]\n");
    CHECK(load_error(dir / "array.jsonl") == DatasetErrc::kMalformedLine);
}

TEST_CASE("instance ids, derived ids and CRLF input") {
    TempDir dir;
    write_file(dir / "d.jsonl",
               R"({"instance_id":17,"question":"q","cypher":"RETURN 1","data_source":"s"})" "\r\n"
               R"({"question":"q","cypher":"RETURN 1","data_source":""})" "\r\n");
    auto file = load_dataset(dir / "d.jsonl").file;
    CHECK(file.records()[0].record_id == "17");
    CHECK(file.records()[1].record_id == derive_record_id("q", "RETURN 1", "", Split::kTrain));
    CHECK(file.records()[1].cypher == "RETURN 1");
}

TEST_CASE("field mapping reads alternate key names and strips prefixes") {
    TempDir dir;
    write_file(dir / "map.json",
               R"({"cypher":"query","database_ref":"database_reference_alias",)"
               R"("database_ref_strip_prefix":"neo4jlabs_demo_db_"})");
    write_file(dir / "d.jsonl",
               R"({"question":"q","query":"MATCH (n) RETURN n","data_source":"s",)"
               R"("database_reference_alias":"neo4jlabs_demo_db_movies","extra_field":3})" "\n");
    LoadOptions opts;
    opts.fields = FieldMapping::load(dir / "map.json");
    auto r = load_dataset(dir / "d.jsonl", opts).file.records().at(0);
    CHECK(r.cypher == "MATCH (n) RETURN n");
    CHECK(r.database_ref == std::optional<std::string>("movies"));
    CHECK(r.extra.at("extra_field") == 3);
}

TEST_CASE("write then read five records preserves order and fields") {
    TempDir dir;
    std::vector<DatasetRecord> records;
    for (int i = 5; i > 0; --i) {
        auto r = make_record("id" + std::to_string(i), "RETURN " + std::to_string(i), "src",
                             i % 2 ? std::optional<std::string>("movies") : std::nullopt,
                             i == 3 ? Split::kTest : Split::kTrain);
        r.extra["note"] = i;
        records.push_back(r);
    }
    write_dataset(records, dir / "out.jsonl");
    auto back = load_dataset(dir / "out.jsonl").file.records();
    CHECK(back == records);
}

TEST_CASE("embedded newlines are escaped and restored") {
    TempDir dir;
    auto r = make_record("nl", "MATCH (n)\nRETURN n", "src");
    r.question = "first line\nsecond line\twith tab";
    write_dataset(std::vector{r}, dir / "out.jsonl");
    const auto text = testing::read_file(dir / "out.jsonl");
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    CHECK(load_dataset(dir / "out.jsonl").file.records().at(0) == r);
}

TEST_CASE("write errors") {
    TempDir dir;
    std::vector<DatasetRecord> none;
    CHECK_THROWS_AS(write_dataset(none, dir / "x.jsonl"), DatasetError);

    // A regular file used as a directory cannot be opened for writing, even as root.
    write_file(dir / "blocker", "");
    std::vector records{make_record("a", "RETURN 1", "s")};
    try {
        write_dataset(records, dir / "blocker" / "x.jsonl");
        FAIL("expected IoFailure");
    } catch (const DatasetError& e) {
        CHECK(e.code() == DatasetErrc::kIoFailure);
    }
}

TEST_CASE("derive_record_id") {
    const auto a = derive_record_id("q", "MATCH (n) RETURN n", "src", Split::kTrain);
    CHECK(a == derive_record_id("q", "MATCH (n) RETURN n", "src", Split::kTrain));
    CHECK(a.size() == 16);
    CHECK(a != derive_record_id("q", "MATCH (m) RETURN n", "src", Split::kTrain));
    CHECK(a != derive_record_id("q", "MATCH (n) RETURN n", "src", Split::kTest));
    CHECK(derive_record_id("q", "RETURN 1", "", Split::kTrain).size() == 16);
    // Field boundaries matter.
    CHECK(derive_record_id("ab", "c", "", Split::kTrain) != derive_record_id("a", "bc", "", Split::kTrain));
}

TEST_CASE("derive_record_id has no collisions on a toy corpus") {
    std::set<std::string> ids;
    for (int i = 0; i < 2000; ++i) {
        ids.insert(derive_record_id("q", "RETURN " + std::to_string(i), "src", Split::kTrain));
    }
    CHECK(ids.size() == 2000);
}

TEST_CASE("DatasetFile rejects duplicates and empty input") {
    CHECK_THROWS_AS(DatasetFile(std::vector<DatasetRecord>{}), DatasetError);
    CHECK_THROWS_AS(DatasetFile({make_record("a", "RETURN 1", "s"), make_record("a", "RETURN 2", "s")}),
                    DatasetError);
    DatasetFile file({make_record("a", "RETURN 1", "s"), make_record("b", "RETURN 2", "s")});
    CHECK(file.index_of("b") == std::optional<std::size_t>(1));
    CHECK(file.find("zz") == nullptr);
    CHECK(file.content_hash().size() == 64);
}

TEST_CASE("property: round-trip and counting over random files") {
    std::mt19937 rng(7);
    TempDir dir;
    for (int trial = 0; trial < 60; ++trial) {
        std::uniform_int_distribution<int> n_dist(1, 25);
        std::vector<DatasetRecord> records;
        const int n = n_dist(rng);
        for (int i = 0; i < n; ++i) {
            auto r = make_record("t" + std::to_string(trial) + "_" + std::to_string(i), random_text(rng, 40),
                                 rng() % 4 ? "src" + std::to_string(rng() % 3) : "");
            r.question = random_text(rng, 30);
            r.schema_text = rng() % 2 ? random_text(rng, 20) : "";
            if (rng() % 2) r.database_ref = "db" + std::to_string(rng() % 3);
            r.split = rng() % 3 ? Split::kTrain : Split::kTest;
            if (rng() % 3 == 0) r.extra["meta"] = random_text(rng, 10);
            records.push_back(std::move(r));
        }
        const auto path = dir / ("rt" + std::to_string(trial) + ".jsonl");
        write_dataset(records, path);
        auto loaded = load_dataset(path).file;
        REQUIRE(loaded.records() == records);
        CHECK(loaded.counts() == count_records(loaded.records()));
        CHECK(loaded.content_hash() == DatasetFile(records).content_hash());
    }
}
