#include "dpcc/api.hpp"
#include "dpcc/config.hpp"
#include "dpcc/db_connector.hpp"
#include "dpcc/error.hpp"
#include "dpcc/orchestrator.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <random>

namespace fs = std::filesystem;

namespace {

dpcc::ApiServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int serve(const std::optional<std::string>& config_file, const std::optional<std::string>& listen) {
    auto cfg = dpcc::load_config(config_file ? std::optional<fs::path>(*config_file) : std::nullopt);
    if (listen) std::tie(cfg.host, cfg.port) = dpcc::parse_listen(*listen);

    dpcc::OrchestratorOptions opts;
    opts.store_dir = cfg.store_dir;
    dpcc::Orchestrator orch(opts);
    if (cfg.fixture) {
        std::vector<dpcc::PredefinedQuestion> questions;
        if (cfg.questions) questions = dpcc::load_predefined_questions(*cfg.questions);
        const auto summary = orch.connect({"sqlite", *cfg.fixture, true, cfg.statement_timeout_ms}, questions);
        std::cerr << "connected " << *cfg.fixture << ": " << summary.tables.size() << " tables, "
                  << summary.questions << " predefined questions\n";
        if (cfg.contract) orch.set_contract(*cfg.contract, "config");
    }

    dpcc::ApiOptions api_opts;
    api_opts.run_defaults.max_iterations = cfg.max_iterations;
    api_opts.run_defaults.approval_mode = cfg.approval_mode;
    api_opts.run_defaults.seed = cfg.seed;
    api_opts.statement_timeout_ms = cfg.statement_timeout_ms;
    dpcc::ApiServer server(orch, api_opts);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on " << cfg.host << ":" << cfg.port << "\n";
    server.serve(cfg.host, cfg.port);
    g_server = nullptr;
    return 0;
}

struct RunArgs {
    std::string db;
    std::optional<std::string> questions;
    int max_iterations = 15;
    double table_coverage = 0.9;
    double column_coverage = 0.5;
    double speed_ms = 5000;
    std::optional<std::string> store;
    std::optional<std::string> export_dir;
    std::uint64_t seed = 0;
};

int run(const RunArgs& a) {
    std::optional<fs::path> store = a.store ? std::optional<fs::path>(*a.store) : std::nullopt;
    if (!store && a.export_dir) {
        std::random_device rd;
        store = fs::temp_directory_path() / ("dpcc-store-" + std::to_string(rd()));
    }
    dpcc::OrchestratorOptions opts;
    opts.store_dir = store;
    dpcc::Orchestrator orch(opts);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<dpcc::PredefinedQuestion> questions;
    if (a.questions) questions = dpcc::load_predefined_questions(*a.questions);
    orch.connect({"sqlite", a.db}, questions);

    dpcc::RunConfig rc;
    rc.max_iterations = a.max_iterations;
    rc.seed = a.seed;
    rc.contract = dpcc::Contract{{{"table_coverage", a.table_coverage, dpcc::Comparator::at_least},
                                  {"column_coverage", a.column_coverage, dpcc::Comparator::at_least},
                                  {"avg_exec_speed", a.speed_ms, dpcc::Comparator::at_most}}};
    const auto report = orch.run_loop(rc);
    const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    if (a.export_dir) orch.store()->export_worktree(*a.export_dir);

    nlohmann::json out = report;
    out["elapsed_ms"] = elapsed;
    if (orch.store()) {
        out["store"] = store->string();
        out["chain_verified"] = orch.store()->verify_chain();
        out["commit_count"] = orch.store()->size();
    }
    std::cout << out.dump(2) << "\n";
    switch (report.verdict) {
        case dpcc::RunVerdict::converged: return 0;
        case dpcc::RunVerdict::error: return 1;
        default: return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-product control loop: grows questions, SQL, views and topics over a database"};
    app.require_subcommand(1);

    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP control API");
    std::optional<std::string> config_file, listen;
    serve_cmd->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    serve_cmd->add_option("--listen", listen, "host:port (overrides config and DPCC_LISTEN)");

    auto* run_cmd = app.add_subcommand("run", "Run the loop to convergence and print a JSON report");
    RunArgs ra;
    run_cmd->add_option("--db", ra.db, "SQLite database")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--questions", ra.questions, "predefined questions (JSON)")->check(CLI::ExistingFile);
    run_cmd->add_option("--max-iterations", ra.max_iterations, "iteration budget")->check(CLI::PositiveNumber);
    run_cmd->add_option("--table-coverage", ra.table_coverage, "table_coverage target (>=)")->check(CLI::Range(0.0, 1.0));
    run_cmd->add_option("--column-coverage", ra.column_coverage, "column_coverage target (>=)")->check(CLI::Range(0.0, 1.0));
    run_cmd->add_option("--speed-ms", ra.speed_ms, "avg_exec_speed target in ms (<=)")->check(CLI::PositiveNumber);
    run_cmd->add_option("--store", ra.store, "version store directory");
    run_cmd->add_option("--export", ra.export_dir, "write the artifact tree here");
    run_cmd->add_option("--seed", ra.seed, "tool seed");

    auto* fixture_cmd = app.add_subcommand("fixture", "Fixture helpers");
    fixture_cmd->require_subcommand(1);
    auto* load_cmd = fixture_cmd->add_subcommand("load", "Build a SQLite database from a SQL script");
    std::string script, out_db;
    load_cmd->add_option("script", script, "SQL script")->required()->check(CLI::ExistingFile);
    load_cmd->add_option("--out", out_db, "database to create")->required();

    auto* verify_cmd = app.add_subcommand("verify", "Check a version store's commit chain");
    std::string verify_store;
    verify_cmd->add_option("--store", verify_store, "version store directory")->required()->check(CLI::ExistingDirectory);

    auto* export_cmd = app.add_subcommand("export", "Write a version store's artifact tree");
    std::string export_store, export_out;
    export_cmd->add_option("--store", export_store, "version store directory")->required()->check(CLI::ExistingDirectory);
    export_cmd->add_option("--out", export_out, "target directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) return serve(config_file, listen);
        if (*run_cmd) return run(ra);
        if (*load_cmd) {
            dpcc::load_fixture_script(script, out_db);
            std::cout << "wrote " << out_db << "\n";
            return 0;
        }
        if (*verify_cmd) {
            dpcc::VersionStore store(verify_store);
            const bool ok = store.verify_chain();
            std::cout << (ok ? "chain ok" : "chain BROKEN") << " (" << store.size() << " commits)\n";
            return ok ? 0 : 2;
        }
        if (*export_cmd) {
            dpcc::VersionStore(export_store).export_worktree(export_out);
            return 0;
        }
    } catch (const dpcc::Error& e) {
        std::cerr << "error [" << dpcc::to_string(e.code()) << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
