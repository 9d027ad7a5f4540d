#pragma once

#include "dpcc/db_connector.hpp"
#include "dpcc/state.hpp"
#include "dpcc/tool_registry.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dpcc {

struct ToolInvocation {
    std::string tool_name;
    ContextScope target_scope;
    ToolParams parameters = ToolParams::object();
    std::uint64_t seed = 0;
    int iteration = 0;
};

/// Events are applied all-or-nothing by the caller. An empty event list is
/// only returned together with a log saying why.
struct ToolResult {
    std::vector<StateEvent> events;
    std::string log;
};

/// Uniform execution seam. Baseline implementations are deterministic
/// templates; other backends (e.g. model-driven generators) implement the
/// same contract.
class Tool {
public:
    virtual ~Tool() = default;
    virtual std::string_view name() const = 0;

    /// Pure in (snapshot, invocation). The connection may be read but not retained.
    virtual ToolResult run(const ToolInvocation& inv, const DataProductState& snapshot, Connector& db) = 0;
};

using ToolSet = std::map<std::string, std::unique_ptr<Tool>, std::less<>>;

/// The five baseline tools keyed by name.
ToolSet make_baseline_tools();

// Direct entry points (same behaviour as the Tool objects).
ToolResult run_question_generation(const ToolInvocation& inv, const DataProductState& snapshot, Connector& db);
ToolResult run_text_to_sql(const ToolInvocation& inv, const DataProductState& snapshot, Connector& db);
ToolResult run_followup_generation(const ToolInvocation& inv, const DataProductState& snapshot, Connector& db);
ToolResult run_view_creation(const ToolInvocation& inv, const DataProductState& snapshot, Connector& db);
ToolResult run_topic_mapping(const ToolInvocation& inv, const DataProductState& snapshot, Connector& db);

/// SQL for a question, synthesized from its text and schema targets, or
/// nullopt when the targets cannot be connected through foreign keys.
std::optional<std::string> synthesize_sql(const Question& question, const DataProductState& snapshot);

/// "<dominant table> · <kind>", kind one of lookup, aggregate, join, trend.
std::string topic_label(const QueryAnalysis& analysis, const DataProductState& snapshot);

/// Next free id of the form q0001, q0002, ...
QuestionId next_question_id(const DataProductState& snapshot, std::size_t offset = 0);

/// True for primary/foreign key style columns, which never serve as measures.
bool is_key_column(const TableMeta& table, const ColumnMeta& column);

}  // namespace dpcc
