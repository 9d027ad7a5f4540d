#pragma once

#include "dpcc/error.hpp"
#include "dpcc/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace dpcc {

struct ApiOptions {
    RunConfig run_defaults;  // for run/start and run/step bodies that omit fields
    int statement_timeout_ms = 5000;
    std::chrono::milliseconds heartbeat{15000};
};

int http_status(ErrorCode code);
nlohmann::json error_body(std::string_view code, std::string_view message);

/// Reads {max_iterations?, approval_mode?, seed?, contract?} over `defaults`.
RunConfig run_config_from_json(const nlohmann::json& body, const RunConfig& defaults);

/// HTTP/JSON control surface over one orchestrator, under /api/v1.
class ApiServer {
public:
    explicit ApiServer(Orchestrator& orchestrator, ApiOptions options = {});
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds (port 0 picks a free port) and serves on a background thread.
    /// Returns the bound port.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    void serve(const std::string& host, int port);
    void stop();

private:
    void install_routes();

    Orchestrator& orch_;
    ApiOptions options_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<bool> stopping_{false};
    std::thread thread_;
};

}  // namespace dpcc
