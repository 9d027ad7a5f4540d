#include <doctest.h>
#include <httplib.h>

#include "dpcc/api.hpp"
#include "dpcc/error.hpp"
#include "support.hpp"

#include <chrono>
#include <thread>

using namespace dpcc;
using nlohmann::json;

namespace {

struct Fixture {
    Orchestrator orch;
    ApiServer server;
    int port;
    httplib::Client client;

    explicit Fixture(OrchestratorOptions opts = test::deterministic_options(), ApiOptions api = {})
        : orch(std::move(opts)), server(orch, std::move(api)), port(server.start("127.0.0.1", 0)),
          client("127.0.0.1", port) {
        client.set_read_timeout(10, 0);
    }

    std::pair<int, json> call(const std::string& method, const std::string& path, const json& body = nullptr,
                              httplib::Headers headers = {}) {
        httplib::Result r;
        const std::string text = body.is_null() ? "" : body.dump();
        if (method == "GET") r = client.Get(path, headers);
        else if (method == "POST") r = client.Post(path, headers, text, "application/json");
        else if (method == "PUT") r = client.Put(path, headers, text, "application/json");
        REQUIRE(r);
        return {r->status, r->body.empty() ? json() : json::parse(r->body)};
    }

    void connect(const json& extra = json::object()) {
        json body = {{"location", test::retail_db()}};
        body.update(extra);
        auto [status, j] = call("POST", "/api/v1/datasource", body);
        REQUIRE(status == 201);
    }
};

json contract_json() {
    return {{"entries",
             {{{"metric_id", "table_coverage"}, {"target", 0.9}, {"comparator", ">="}},
              {{"metric_id", "column_coverage"}, {"target", 0.5}, {"comparator", ">="}},
              {{"metric_id", "avg_exec_speed"}, {"target", 5000}, {"comparator", "<="}}}}};
}

std::string error_code(const json& j) { return j.at("error").at("code").get<std::string>(); }

bool wait_until(auto pred, int timeout_ms = 10000) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return false;
}

}  // namespace

TEST_CASE("status mapping") {
    CHECK(http_status(ErrorCode::validation) == 400);
    CHECK(http_status(ErrorCode::not_found) == 404);
    CHECK(http_status(ErrorCode::invalid_transition) == 409);
    CHECK(http_status(ErrorCode::connection_error) == 502);
    RunConfig defaults;
    defaults.max_iterations = 9;
    const auto rc = run_config_from_json(json::parse(R"({"approval_mode": "gated"})"), defaults);
    CHECK(rc.max_iterations == 9);
    CHECK(rc.approval_mode == ApprovalMode::gated);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"bogus": 1})"), defaults), Error);
}

TEST_CASE("datasource, metrics, contract") {
    Fixture f;
    auto [s0, state0] = f.call("GET", "/api/v1/state");
    CHECK(s0 == 200);
    CHECK(state0["run"]["connected"] == false);

    auto [s1, e1] = f.call("POST", "/api/v1/run/start", json::object());
    CHECK(s1 == 409);
    CHECK(error_code(e1) == "not_connected");

    auto [s2, e2] = f.call("POST", "/api/v1/datasource", json::object());
    CHECK(s2 == 400);
    CHECK(error_code(e2) == "validation");

    json questions = json::array();
    for (const char* t : {"orders", "customers", "products", "regions"})
        questions.push_back({{"text", std::string("How many rows in ") + t + "?"},
                             {"sql", std::string("SELECT COUNT(*) FROM ") + t}});
    auto [s3, ds] = f.call("POST", "/api/v1/datasource", {{"location", test::retail_db()}, {"questions", questions}});
    REQUIRE(s3 == 201);
    CHECK(ds["question_count"] == 4);
    CHECK(ds["table_count"] == 6);

    auto [s4, qs] = f.call("GET", "/api/v1/questions");
    CHECK(s4 == 200);
    CHECK(qs["questions"].size() == 4);

    auto [s5, m] = f.call("GET", "/api/v1/metrics");
    CHECK(s5 == 200);
    bool saw_coverage = false;
    for (const auto& v : m["values"])
        if (v["metric_id"] == "table_coverage") {
            saw_coverage = true;
            CHECK(v["value"].get<double>() == doctest::Approx(4.0 / 6.0));
        }
    CHECK(saw_coverage);
    CHECK(m["gap"].is_null());

    auto bad = contract_json();
    bad["entries"][0]["target"] = 1.3;
    auto [s6, e6] = f.call("PUT", "/api/v1/contract", bad);
    CHECK(s6 == 400);
    CHECK(error_code(e6) == "validation");

    auto [s7, c] = f.call("PUT", "/api/v1/contract", contract_json(), {{"X-Actor", "alice"}});
    CHECK(s7 == 200);
    auto [s8, m2] = f.call("GET", "/api/v1/metrics");
    CHECK(m2["gap"]["total"].get<double>() > 0.0);
    CHECK(m2["contract"]["entries"].size() == 3);

    auto [s9, h] = f.call("GET", "/api/v1/metrics/table_coverage/history");
    CHECK(s9 == 200);
    CHECK(h["history"].size() >= 1);
    auto [s10, e10] = f.call("GET", "/api/v1/metrics/no_such_metric/history");
    CHECK(s10 == 404);
    CHECK(error_code(e10) == "not_found");

    auto [s11, e11] = f.call("GET", "/api/v1/nowhere");
    CHECK(s11 == 404);
    CHECK(error_code(e11) == "not_found");

    auto [s12, e12] = f.call("POST", "/api/v1/datasource", {{"location", "/nonexistent/dir/x.db"}});
    CHECK(s12 == 502);
    CHECK(error_code(e12) == "connection_error");
}

TEST_CASE("run lifecycle with approvals") {
    Fixture f;
    f.connect();
    auto [s0, e0] = f.call("POST", "/api/v1/approvals/1", {{"decision", "approve"}});
    CHECK(s0 == 404);
    CHECK(error_code(e0) == "unknown_iteration");

    auto [s1, st] = f.call("POST", "/api/v1/run/start",
                           {{"approval_mode", "gated"}, {"max_iterations", 15}, {"contract", contract_json()}});
    CHECK(s1 == 202);
    auto [s2, e2] = f.call("POST", "/api/v1/run/start", json::object());
    CHECK(s2 == 409);
    CHECK(error_code(e2) == "invalid_transition");
    auto [s3, e3] = f.call("POST", "/api/v1/datasource", {{"location", test::retail_db()}});
    CHECK(s3 == 409);
    CHECK(error_code(e3) == "conflict");
    auto [s3b, e3b] = f.call("POST", "/api/v1/run/step", json::object());
    CHECK(s3b == 409);
    CHECK(error_code(e3b) == "busy");

    int approved = 0;
    for (int round = 0; round < 10; ++round) {
        json pending;
        const bool got = wait_until([&] {
            auto [s, j] = f.call("GET", "/api/v1/approvals");
            pending = j["pending"];
            auto [rs, run] = f.call("GET", "/api/v1/run");
            return !pending.empty() || run["phase"] == "terminated";
        });
        REQUIRE(got);
        if (pending.empty()) break;
        const int iteration = pending[0]["iteration"];
        CHECK(pending[0]["proposal"]["tool_name"].is_string());
        auto [bs, be] = f.call("POST", "/api/v1/approvals/" + std::to_string(iteration), {{"decision", "maybe"}});
        CHECK(bs == 400);
        auto [as, aj] = f.call("POST", "/api/v1/approvals/" + std::to_string(iteration),
                               {{"decision", "approve"}, {"actor", "carol"}});
        CHECK(as == 200);
        ++approved;
        auto [ds, dj] = f.call("POST", "/api/v1/approvals/" + std::to_string(iteration), {{"decision", "approve"}});
        CHECK(ds == 409);
        CHECK(error_code(dj) == "no_pending_approval");
    }
    CHECK(approved >= 1);
    REQUIRE(wait_until([&] { return f.call("GET", "/api/v1/run").second["phase"] == "terminated"; }));
    auto [rs, run] = f.call("GET", "/api/v1/run");
    CHECK(run["last_run"]["verdict"] == "Converged");

    auto [js, journal] = f.call("GET", "/api/v1/run/journal");
    CHECK(js == 200);
    REQUIRE(journal["records"].size() == static_cast<std::size_t>(approved));
    for (const auto& r : journal["records"]) {
        CHECK(r["approval"] == "approved_by_human");
        CHECK(r["actor"] == "carol");
    }

    auto [ps, pe] = f.call("POST", "/api/v1/run/pause", json::object());
    CHECK(ps == 409);
    CHECK(error_code(pe) == "invalid_transition");
    auto [ss, step] = f.call("POST", "/api/v1/run/step", json::object());
    CHECK(ss == 200);
    CHECK(step["verdict"] == "Converged");
    CHECK(step["record"].is_null());
}

TEST_CASE("tools, topics, commits") {
    const auto dir = test::temp_dir("api-store");
    Fixture f(test::deterministic_options(dir));
    f.connect();
    auto [ts, tools] = f.call("GET", "/api/v1/tools");
    CHECK(ts == 200);
    REQUIRE(tools["tools"].size() == 5);
    for (const auto& t : tools["tools"]) {
        if (t["name"] == "question_generation") CHECK(t["applicable"] == true);
        if (t["name"] == "text_to_sql") {
            CHECK(t["applicable"] == false);
            CHECK_FALSE(t["failing_preconditions"].empty());
        }
    }
    auto [ss, step] = f.call("POST", "/api/v1/run/step", {{"contract", contract_json()}});
    CHECK(ss == 200);
    CHECK(step["record"]["status"] == "applied");
    CHECK(step["record"]["proposal"]["tool_name"] == "question_generation");

    auto [tps, topics] = f.call("GET", "/api/v1/topics");
    CHECK(tps == 200);
    CHECK(topics["topics"].empty());
    CHECK(topics["unclustered"].is_array());

    auto [cs, commits] = f.call("GET", "/api/v1/commits");
    CHECK(cs == 200);
    CHECK(commits["verified"] == true);
    CHECK(commits["commits"].size() >= 2);
}

TEST_CASE("event stream") {
    ApiOptions api;
    api.heartbeat = std::chrono::milliseconds(100);
    Fixture f(test::deterministic_options(), api);
    f.connect();
    // Produce events before subscribing, then replay them from sequence 0.
    f.call("POST", "/api/v1/run/step", {{"contract", contract_json()}});

    httplib::Client sse("127.0.0.1", f.port);
    sse.set_read_timeout(5, 0);
    std::string received;
    bool saw_heartbeat = false;
    auto r = sse.Get("/api/v1/events?since=0", [&](const char* data, std::size_t len) {
        received.append(data, len);
        if (received.find(": heartbeat") != std::string::npos) saw_heartbeat = true;
        return !saw_heartbeat;
    });
    CHECK(received.find("event: MetricUpdated") != std::string::npos);
    CHECK(received.find("event: IterationCompleted") != std::string::npos);
    CHECK(received.find("id: 1\n") != std::string::npos);
    CHECK(saw_heartbeat);

    // Resume from the last id: nothing old is replayed.
    const auto last = f.orch.events().last_sequence();
    std::string tail;
    sse.Get("/api/v1/events", {{"Last-Event-ID", std::to_string(last)}}, [&](const char* data, std::size_t len) {
        tail.append(data, len);
        return tail.find(": heartbeat") == std::string::npos;
    });
    CHECK(tail.find("id: ") == std::string::npos);
    CHECK(tail.find(": heartbeat") != std::string::npos);
}
