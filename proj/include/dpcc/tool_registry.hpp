#pragma once

#include "dpcc/metrics.hpp"
#include "dpcc/state.hpp"
#include "dpcc/types.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dpcc {

enum class ImpactSign { increase, decrease, optimize };

std::string_view to_string(ImpactSign sign);
ImpactSign impact_sign_from_string(std::string_view s);

struct MetricImpact {
    std::string metric_id;
    ImpactSign sign = ImpactSign::increase;
    double default_weight = 1.0;
};

/// Observable quantities preconditions can test.
enum class Quantity {
    table_count,
    question_count,
    questions_without_sql,
    questions_with_sql,
    shared_join_patterns,
    unclustered_questions,
};

std::string_view to_string(Quantity q);

/// Evaluates a quantity on a snapshot.
double observe(Quantity q, const DataProductState& state);

/// Viewable join patterns used by at least two latest queries (with at least
/// one join), mapped to those questions in id order.
std::map<std::string, std::vector<QuestionId>> shared_join_patterns(const DataProductState& state);

/// Questions that have SQL but no topic.
std::vector<QuestionId> unclustered_questions(const DataProductState& state);

enum class RelOp { gt, ge, lt, le, eq };

std::string_view to_string(RelOp op);

struct PreconditionRule {
    Quantity quantity;
    RelOp op = RelOp::gt;
    double threshold = 0.0;

    bool holds(const DataProductState& state) const;
    std::string describe() const;  // e.g. "questions_without_sql > 0"
};

enum class ParamType { integer, table_list };

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::integer;
    bool required = true;
    std::optional<double> min;
    std::optional<double> max;
};

using ToolParams = nlohmann::json;  // object: name -> value

struct ToolDescriptor {
    std::string name;
    std::string description;
    std::vector<ParamSpec> input_params;
    std::vector<std::string> output_schema;  // artifact kinds produced
    ScopeLevel execution_context = ScopeLevel::database;
    std::vector<PreconditionRule> preconditions;
    std::vector<MetricImpact> impacts;

    /// Throws parameter_bounds for out-of-range values, validation for
    /// missing, unknown or mistyped parameters.
    void validate_params(const ToolParams& params) const;
};

void to_json(nlohmann::json& j, const ToolDescriptor& d);

namespace tool_names {
inline constexpr std::string_view question_generation = "question_generation";
inline constexpr std::string_view text_to_sql = "text_to_sql";
inline constexpr std::string_view followup_generation = "followup_generation";
inline constexpr std::string_view view_creation = "view_creation";
inline constexpr std::string_view topic_mapping = "topic_mapping";
}  // namespace tool_names

/// Descriptors of the five baseline tools with the default impact table.
std::vector<ToolDescriptor> baseline_tool_descriptors();

class ToolRegistry {
public:
    explicit ToolRegistry(const MetricsEngine& metrics) : metrics_(&metrics) {}

    /// Throws duplicate_tool or unknown_metric.
    void register_tool(ToolDescriptor desc);

    /// Overrides a default weight; throws not_found when the tool does not
    /// declare an impact on the metric, invalid_value for weights <= 0.
    void set_weight(std::string_view tool, std::string_view metric_id, double weight);

    const ToolDescriptor* find(std::string_view name) const;
    const std::vector<ToolDescriptor>& tools() const { return tools_; }
    std::size_t size() const { return tools_.size(); }

    /// Tools whose every precondition holds, in registration order.
    std::vector<const ToolDescriptor*> applicable_tools(const DataProductState& state) const;

    /// Descriptions of the preconditions a tool currently fails.
    std::vector<std::string> failing_preconditions(std::string_view tool, const DataProductState& state) const;

private:
    const MetricsEngine* metrics_;
    std::vector<ToolDescriptor> tools_;
};

}  // namespace dpcc
