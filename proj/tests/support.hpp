#pragma once

#include "dpcc/baseline_tools.hpp"
#include "dpcc/db_connector.hpp"
#include "dpcc/metrics.hpp"
#include "dpcc/orchestrator.hpp"
#include "dpcc/state.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace dpcc::test {

/// Directory holding retail.sql and the question files.
std::filesystem::path fixture_dir();

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

/// Builds retail.sql into a database once per process and returns its path.
std::string retail_db();

/// Tables of the retail fixture in dependency order.
std::vector<TableMeta> retail_tables();

/// A generated query and the base columns/tables it was built from.
struct GeneratedQuery {
    std::string sql;
    std::set<TableId> tables;
    std::set<ColumnRef> columns;
};

/// Random query over `tables`: a base table, optionally joined along one or
/// two foreign keys, with random projections, filters and grouping.
GeneratedQuery random_query(std::mt19937_64& rng, const std::vector<TableMeta>& tables);

/// `count` valid events after the table events: questions, query versions
/// (some rewritten onto views), answers, views, topics and contract changes.
std::vector<StateEvent> random_event_sequence(std::uint64_t seed, std::size_t count,
                                              const std::vector<TableMeta>& tables);

/// Straightforward reference implementations of the built-in metrics.
std::optional<double> oracle_metric(const std::string& metric_id, const DataProductState& state,
                                    const ContextScope& scope);

/// Tool double built from a function.
class StubTool : public Tool {
public:
    using Fn = std::function<ToolResult(const ToolInvocation&, const DataProductState&, Connector&)>;
    StubTool(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string_view name() const override { return name_; }
    ToolResult run(const ToolInvocation& inv, const DataProductState& s, Connector& db) override { return fn_(inv, s, db); }

private:
    std::string name_;
    Fn fn_;
};

/// Options with counter clocks: every query "takes" 1.5 ms and wall time
/// advances 1 ms per reading.
OrchestratorOptions deterministic_options(std::optional<std::filesystem::path> store_dir = std::nullopt);

/// table_coverage >= 0.9, column_coverage >= 0.5, avg_exec_speed <= 5000.
Contract default_contract();

/// Polls until a proposal awaits approval; false on timeout.
bool wait_for_pending(const Orchestrator& orch, int timeout_ms = 10000);

}  // namespace dpcc::test
