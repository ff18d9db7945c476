#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "cypherprune/dataset.hpp"
#include "cypherprune/errors.hpp"
#include "cypherprune/execution.hpp"
#include "support.hpp"

using namespace cypherprune;
using nlohmann::json;

namespace {

// Minimal stand-in for the graph database's transactional HTTP endpoint.
class FakeGraphServer {
  public:
    FakeGraphServer() {
        server_.Post(R"(/db/([^/]+)/tx/commit)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeGraphServer() {
        server_.stop();
        thread_.join();
    }

    std::string uri() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::atomic<int> requests{0};
    std::atomic<int> fail_next{0};  // respond 503 this many times
    std::mutex mutex;
    std::vector<std::string> statements;
    std::vector<std::string> databases;

  private:
    void handle(const httplib::Request& req, httplib::Response& res) {
        ++requests;
        if (req.get_header_value("Authorization") != "Basic cmVhZGVyOnNlY3JldA==") {  // reader:secret
            res.status = 401;
            return;
        }
        if (fail_next > 0) {
            --fail_next;
            res.status = 503;
            return;
        }
        const auto body = json::parse(req.body);
        const auto statement = body["statements"][0]["statement"].get<std::string>();
        {
            std::lock_guard lock(mutex);
            statements.push_back(statement);
            databases.push_back(req.matches[1]);
        }
        json reply;
        if (statement.find("sleep") != std::string::npos) {
            std::this_thread::sleep_for(std::chrono::milliseconds(600));
        }
        if (statement == "RETURN broken") {
            reply = {{"results", json::array()},
                     {"errors", {{{"code", "Neo.ClientError.Statement.SyntaxError"}, {"message", "bad"}}}}};
        } else if (statement.starts_with("MATCH (p:Person)")) {
            reply = {{"results", {{{"columns", {"name", "born"}},
                                   {"data", {{{"row", {"Keanu", 1964}}}, {{"row", {"Carrie", 1967.0}}}}}}}},
                     {"errors", json::array()}};
        } else {
            reply = {{"results", {{{"columns", {"x"}}, {"data", {{{"row", {1}}}}}}}}, {"errors", json::array()}};
        }
        res.set_content(reply.dump(), "application/json");
    }

    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

ExecutorBinding live(const std::string& uri) {
    ExecutorBinding b;
    b.kind = BindingKind::kLive;
    b.target = uri;
    b.user = "reader";
    b.password = "secret";
    b.timeout = std::chrono::milliseconds(2000);
    b.retries = 2;
    return b;
}

} // namespace

TEST_CASE("live backend returns rows keyed by column") {
    FakeGraphServer server;
    Executor ex(live(server.uri()));
    auto out = ex.execute("MATCH (p:Person) RETURN p.name AS name, p.born AS born", "movies");
    REQUIRE(out.status == ExecStatus::kOk);
    REQUIRE(out.rows.size() == 2);
    CHECK(out.rows[0] == json{{"name", "Keanu"}, {"born", 1964}});
    CHECK(*out.canonical == "{\"born\":1964,\"name\":\"Keanu\"}\n{\"born\":1967,\"name\":\"Carrie\"}");
    CHECK(server.databases.at(0) == "movies");
}

TEST_CASE("database errors become error outcomes") {
    FakeGraphServer server;
    auto out = Executor(live(server.uri())).execute("RETURN broken", "movies");
    CHECK(out.status == ExecStatus::kError);
    CHECK(out.error_detail->find("SyntaxError") != std::string::npos);
}

TEST_CASE("per-database overrides pick the database name") {
    FakeGraphServer server;
    auto b = live(server.uri());
    b.overrides["recs"] = {"", "", "", "recommendations"};
    Executor(b).execute("RETURN 1 AS x", "recs");
    CHECK(server.databases.at(0) == "recommendations");
}

TEST_CASE("transient server errors are retried") {
    FakeGraphServer server;
    server.fail_next = 2;
    auto out = Executor(live(server.uri())).execute("RETURN 1 AS x", "db");
    CHECK(out.status == ExecStatus::kOk);
    CHECK(server.requests == 3);

    server.fail_next = 10;
    server.requests = 0;
    try {
        Executor(live(server.uri())).execute("RETURN 1 AS x", "db");
        FAIL("expected ConnectionFailure");
    } catch (const ExecutionError& e) {
        CHECK(e.code() == ExecutionErrc::kConnectionFailure);
    }
    CHECK(server.requests == 3);
}

TEST_CASE("rejected credentials and unreachable hosts are connection failures") {
    FakeGraphServer server;
    auto b = live(server.uri());
    b.password = "wrong";
    try {
        Executor(b).execute("RETURN 1 AS x", "db");
        FAIL("expected ConnectionFailure");
    } catch (const ExecutionError& e) {
        CHECK(e.code() == ExecutionErrc::kConnectionFailure);
        CHECK(e.exit_code() == ExitCode::kExecutor);
    }

    // Port 1 on loopback refuses connections.
    auto dead = live("http://127.0.0.1:1");
    dead.retries = 1;
    CHECK_THROWS_AS(Executor(dead).execute("RETURN 1 AS x", "db"), ExecutionError);
}

TEST_CASE("slow queries time out") {
    FakeGraphServer server;
    auto b = live(server.uri());
    b.timeout = std::chrono::milliseconds(200);
    auto out = Executor(b).execute("RETURN sleep AS x", "db");
    CHECK(out.status == ExecStatus::kTimeout);
}

TEST_CASE("write queries never reach the server") {
    FakeGraphServer server;
    Executor ex(live(server.uri()));
    for (const char* q : {"CREATE (n) RETURN n", "MATCH (n) SET n.x = 1", "MERGE (n:A)",
                          "MATCH (n) DETACH DELETE n", "MATCH (n) REMOVE n.x", "match (n) delete n"}) {
        CHECK_THROWS_AS(ex.execute(q, "db"), ExecutionError);
    }
    CHECK(server.requests == 0);
    CHECK(ex.execute("MATCH (n) WHERE n.note = 'CREATE' RETURN n", "db").status == ExecStatus::kOk);
    CHECK(server.requests == 1);
}

TEST_CASE("record then replay reproduces outcomes") {
    FakeGraphServer server;
    testing::TempDir dir;
    std::vector<FixtureQuery> queries = {{"movies", "MATCH (p:Person) RETURN p.name AS name, p.born AS born"},
                                         {"movies", "RETURN 1 AS x"},
                                         {"movies", "RETURN broken"},
                                         {"movies", "RETURN   1   AS x"}};
    auto summary = record_fixture(queries, Executor(live(server.uri())), dir / "fx.json");
    CHECK(summary.recorded == 3);
    CHECK(summary.duplicates == 1);
    CHECK(server.requests == 3);

    Executor live_ex(live(server.uri()));
    Executor replay(ExecutorBinding::replay(dir / "fx.json"));
    for (const auto& q : queries) {
        auto a = live_ex.execute(q.query, q.database_ref);
        auto b = replay.execute(q.query, q.database_ref);
        CHECK(a.status == b.status);
        CHECK(a.canonical == b.canonical);
    }
}

TEST_CASE("execution scores against the live backend with bounded concurrency") {
    FakeGraphServer server;
    std::vector<DatasetRecord> records;
    std::vector<EvalPair> pairs;
    for (int i = 0; i < 12; ++i) {
        auto r = testing::make_record("r" + std::to_string(i), "RETURN 1 AS x", "s", std::string("db"), Split::kTest);
        records.push_back(r);
        pairs.push_back({r.record_id, i % 3 == 0 ? "RETURN broken" : "RETURN 1 AS x", r.cypher});
    }
    DatasetFile file(records);
    auto b = live(server.uri());
    b.max_in_flight = 3;
    auto report = execution_scores(pairs, Executor(b), file);
    CHECK(report.coverage.evaluated == 12);
    CHECK(report.coverage.generated_failed == 4);
    CHECK(report.scores.exact_match == doctest::Approx(8.0 / 12.0));
}
