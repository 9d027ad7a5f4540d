#pragma once

#include "dpcc/metrics.hpp"
#include "dpcc/state.hpp"
#include "dpcc/tool_registry.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dpcc {

struct ActionProposal {
    std::string tool_name;
    ContextScope target_scope;
    ToolParams parameters = ToolParams::object();
    double expected_improvement = 0.0;
    std::string rationale;
    int iteration = 0;

    friend bool operator==(const ActionProposal&, const ActionProposal&) = default;
};

void to_json(nlohmann::json& j, const ActionProposal& p);
void from_json(const nlohmann::json& j, ActionProposal& p);

enum class VerdictKind { propose, converged, manual_review };

std::string_view to_string(VerdictKind kind);

struct PlannerVerdict {
    VerdictKind kind = VerdictKind::converged;
    std::optional<ActionProposal> proposal;  // set iff kind == propose
    std::string reason;                      // evidence for manual_review
};

struct PlannerConfig {
    int stagnation_window = 3;         // K consecutive sub-threshold improvements
    double stagnation_epsilon = 0.01;  // ε
};

/// (tool name, scope key) pairs excluded from selection, e.g. after a rejection.
using Suppressions = std::set<std::pair<std::string, std::string>>;

/// Σ weight · gap over the tool's impacts on contract metrics. "increase"
/// impacts count toward >= entries, "decrease" toward <= entries and
/// "optimize" toward both.
double expected_improvement(const ToolDescriptor& tool, const GapVector& gap);

/// True iff the last `window` consecutive improvements (history[i-1] -
/// history[i]) are all below epsilon; needs window + 1 entries.
bool detect_stagnation(std::span<const double> history, const PlannerConfig& config = {});

/// Question count for a number of under-covered tables: 20 up to 10 tables,
/// 80 above 50, linear in between.
int calibrate_question_count(std::size_t uncovered_tables);

/// Tables not referenced by any latest query.
std::vector<TableId> uncovered_tables(const DataProductState& state);

ToolParams calibrate(const ToolDescriptor& tool, const DataProductState& state, const GapVector& gap);

/// `history` holds total gaps oldest → newest, the last entry being the
/// current one.
PlannerVerdict plan(const DataProductState& state, const GapVector& gap, std::span<const double> history,
                    const ToolRegistry& registry, int iteration, const Suppressions& suppressed = {},
                    const PlannerConfig& config = {});

}  // namespace dpcc
