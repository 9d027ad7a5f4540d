#include "dpcc/config.hpp"

#include "dpcc/error.hpp"
#include "dpcc/json.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

namespace dpcc {

namespace {

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw Error(ErrorCode::validation, std::string(what) + ": not a number: \"" + std::string(text) + "\"");
    return value;
}

void check_max_iterations(int n) {
    if (n < 1) throw Error(ErrorCode::validation, "max_iterations must be at least 1");
}

}  // namespace

std::optional<std::string> process_env(const char* name) {
    const char* v = std::getenv(name);
    if (!v) return std::nullopt;
    return std::string(v);
}

std::pair<std::string, int> parse_listen(std::string_view listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::validation, "listen address must be host:port");
    std::string host(listen.substr(0, colon));
    if (host.empty()) host = "127.0.0.1";
    const int port = parse_number<int>(listen.substr(colon + 1), "listen port");
    if (port < 0 || port > 65535) throw Error(ErrorCode::validation, "listen port out of range");
    return {host, port};
}

void apply_config_json(ServiceConfig& cfg, const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::validation, "config must be a JSON object");
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "listen") {
                std::tie(cfg.host, cfg.port) = parse_listen(value.get<std::string>());
            } else if (key == "fixture") {
                cfg.fixture = value.get<std::string>();
            } else if (key == "questions") {
                cfg.questions = value.get<std::string>();
            } else if (key == "max_iterations") {
                cfg.max_iterations = value.get<int>();
                check_max_iterations(cfg.max_iterations);
            } else if (key == "approval_mode") {
                cfg.approval_mode = approval_mode_from_string(value.get<std::string>());
            } else if (key == "seed") {
                cfg.seed = value.get<std::uint64_t>();
            } else if (key == "store_dir") {
                cfg.store_dir = value.get<std::string>();
            } else if (key == "contract") {
                cfg.contract = value.get<Contract>();
            } else if (key == "statement_timeout_ms") {
                cfg.statement_timeout_ms = value.get<int>();
            } else {
                throw Error(ErrorCode::validation, "unknown config key \"" + key + "\"");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::validation, std::string("bad config value: ") + e.what());
    }
}

void apply_env_overrides(ServiceConfig& cfg, const EnvLookup& env) {
    if (auto v = env("DPCC_LISTEN")) std::tie(cfg.host, cfg.port) = parse_listen(*v);
    if (auto v = env("DPCC_FIXTURE")) cfg.fixture = *v;
    if (auto v = env("DPCC_MAX_ITERATIONS")) {
        cfg.max_iterations = parse_number<int>(*v, "DPCC_MAX_ITERATIONS");
        check_max_iterations(cfg.max_iterations);
    }
    if (auto v = env("DPCC_APPROVAL_MODE")) cfg.approval_mode = approval_mode_from_string(*v);
    if (auto v = env("DPCC_SEED")) cfg.seed = parse_number<std::uint64_t>(*v, "DPCC_SEED");
    if (auto v = env("DPCC_STORE_DIR")) cfg.store_dir = *v;
}

ServiceConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
    ServiceConfig cfg;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw Error(ErrorCode::io_error, "cannot read config " + file->string());
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::validation, std::string("malformed config: ") + e.what());
        }
        apply_config_json(cfg, doc);
    }
    apply_env_overrides(cfg, env);
    return cfg;
}

}  // namespace dpcc
