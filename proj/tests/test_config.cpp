#include <doctest.h>

#include "dpcc/config.hpp"
#include "dpcc/error.hpp"
#include "support.hpp"

#include <fstream>
#include <map>

using namespace dpcc;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
    return [vars = std::move(vars)](const char* name) -> std::optional<std::string> {
        auto it = vars.find(name);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::chain_corrupt;
}

}  // namespace

TEST_CASE("defaults without file or environment") {
    const auto cfg = load_config(std::nullopt, env_of({}));
    CHECK(cfg.host == "127.0.0.1");
    CHECK(cfg.port == 8080);
    CHECK(cfg.max_iterations == 25);
    CHECK(cfg.approval_mode == ApprovalMode::automatic);
    CHECK_FALSE(cfg.fixture);
    CHECK_FALSE(cfg.contract);
}

TEST_CASE("file then environment") {
    const auto path = test::temp_dir("config") / "dpcc.json";
    std::ofstream(path) << R"({
        "listen": "0.0.0.0:9000",
        "fixture": "/data/retail.db",
        "max_iterations": 10,
        "approval_mode": "gated",
        "seed": 7,
        "contract": {"entries": [{"metric_id": "table_coverage", "target": 0.9, "comparator": ">="}]}
    })";
    auto cfg = load_config(path, env_of({}));
    CHECK(cfg.host == "0.0.0.0");
    CHECK(cfg.port == 9000);
    CHECK(*cfg.fixture == "/data/retail.db");
    CHECK(cfg.max_iterations == 10);
    CHECK(cfg.approval_mode == ApprovalMode::gated);
    CHECK(cfg.seed == 7);
    REQUIRE(cfg.contract);
    CHECK(cfg.contract->entries.size() == 1);

    cfg = load_config(path, env_of({{"DPCC_LISTEN", ":7070"},
                                    {"DPCC_MAX_ITERATIONS", "4"},
                                    {"DPCC_APPROVAL_MODE", "auto"},
                                    {"DPCC_STORE_DIR", "/tmp/store"}}));
    CHECK(cfg.host == "127.0.0.1");
    CHECK(cfg.port == 7070);
    CHECK(cfg.max_iterations == 4);
    CHECK(cfg.approval_mode == ApprovalMode::automatic);
    CHECK(*cfg.store_dir == "/tmp/store");
    CHECK(*cfg.fixture == "/data/retail.db");
}

TEST_CASE("bad values are rejected") {
    ServiceConfig cfg;
    CHECK(code_of([&] { apply_config_json(cfg, nlohmann::json::parse(R"({"colour": "red"})")); }) == ErrorCode::validation);
    CHECK(code_of([&] { apply_config_json(cfg, nlohmann::json::parse(R"({"max_iterations": 0})")); }) == ErrorCode::validation);
    CHECK(code_of([&] { apply_config_json(cfg, nlohmann::json::parse(R"({"max_iterations": "ten"})")); }) == ErrorCode::validation);
    CHECK(code_of([&] { apply_config_json(cfg, nlohmann::json::parse("[]")); }) == ErrorCode::validation);
    CHECK(code_of([&] { apply_env_overrides(cfg, env_of({{"DPCC_SEED", "-1x"}})); }) == ErrorCode::validation);
    CHECK(code_of([&] { apply_env_overrides(cfg, env_of({{"DPCC_LISTEN", "nohost"}})); }) == ErrorCode::validation);
    CHECK(code_of([&] { apply_env_overrides(cfg, env_of({{"DPCC_LISTEN", "h:70000"}})); }) == ErrorCode::validation);
    CHECK(code_of([&] { load_config(std::filesystem::path("/nonexistent/dpcc.json"), env_of({})); }) == ErrorCode::io_error);
    const auto path = test::temp_dir("config-bad") / "broken.json";
    std::ofstream(path) << "{ not json";
    CHECK(code_of([&] { load_config(path, env_of({})); }) == ErrorCode::validation);
}
