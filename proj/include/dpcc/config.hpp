#pragma once

#include "dpcc/orchestrator.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace dpcc {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::string> fixture;    // database connected at startup
    std::optional<std::string> questions;  // predefined questions for the fixture
    int max_iterations = 25;
    ApprovalMode approval_mode = ApprovalMode::automatic;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> store_dir;
    std::optional<Contract> contract;  // applied after the startup connect
    int statement_timeout_ms = 5000;
};

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

/// Process environment.
std::optional<std::string> process_env(const char* name);

/// Applies a JSON config document onto `cfg`. Unknown keys are rejected.
void apply_config_json(ServiceConfig& cfg, const nlohmann::json& doc);

/// DPCC_LISTEN (host:port), DPCC_FIXTURE, DPCC_MAX_ITERATIONS,
/// DPCC_APPROVAL_MODE, DPCC_SEED, DPCC_STORE_DIR.
void apply_env_overrides(ServiceConfig& cfg, const EnvLookup& env);

/// Defaults <- file (when given) <- environment.
ServiceConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env);

/// "host:port" or ":port".
std::pair<std::string, int> parse_listen(std::string_view listen);

}  // namespace dpcc
