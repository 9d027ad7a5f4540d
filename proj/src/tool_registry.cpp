#include "dpcc/tool_registry.hpp"

#include "dpcc/error.hpp"
#include "dpcc/json.hpp"
#include "dpcc/sql_analyzer.hpp"

#include <cmath>
#include <sstream>

namespace dpcc {

std::string_view to_string(ImpactSign sign) {
    switch (sign) {
        case ImpactSign::increase: return "increase";
        case ImpactSign::decrease: return "decrease";
        case ImpactSign::optimize: return "optimize";
    }
    return "?";
}

ImpactSign impact_sign_from_string(std::string_view s) {
    if (s == "increase") return ImpactSign::increase;
    if (s == "decrease") return ImpactSign::decrease;
    if (s == "optimize") return ImpactSign::optimize;
    throw Error(ErrorCode::validation, "unknown impact sign: " + std::string(s));
}

std::string_view to_string(Quantity q) {
    switch (q) {
        case Quantity::table_count: return "table_count";
        case Quantity::question_count: return "question_count";
        case Quantity::questions_without_sql: return "questions_without_sql";
        case Quantity::questions_with_sql: return "questions_with_sql";
        case Quantity::shared_join_patterns: return "shared_join_patterns";
        case Quantity::unclustered_questions: return "unclustered_questions";
    }
    return "?";
}

std::string_view to_string(RelOp op) {
    switch (op) {
        case RelOp::gt: return ">";
        case RelOp::ge: return ">=";
        case RelOp::lt: return "<";
        case RelOp::le: return "<=";
        case RelOp::eq: return "==";
    }
    return "?";
}

std::map<std::string, std::vector<QuestionId>> shared_join_patterns(const DataProductState& state) {
    std::map<std::string, std::vector<QuestionId>> by_key;
    for (const auto& [id, rec] : state.questions()) {
        const auto* q = rec->latest_query();
        if (!q || q->analysis.join_count < 1) continue;
        const auto& key = q->analysis.join_pattern_key;
        if (!pattern_is_viewable(key)) continue;
        by_key[key].push_back(id);
    }
    std::erase_if(by_key, [](const auto& kv) { return kv.second.size() < 2; });
    return by_key;
}

std::vector<QuestionId> unclustered_questions(const DataProductState& state) {
    std::vector<QuestionId> out;
    for (const auto& [id, rec] : state.questions())
        if (rec->latest_query() && !rec->topic) out.push_back(id);
    return out;
}

double observe(Quantity q, const DataProductState& state) {
    auto with_sql = [&] {
        std::size_t n = 0;
        for (const auto& [id, rec] : state.questions())
            if (rec->latest_query()) ++n;
        return n;
    };
    switch (q) {
        case Quantity::table_count: return static_cast<double>(state.tables().size());
        case Quantity::question_count: return static_cast<double>(state.questions().size());
        case Quantity::questions_with_sql: return static_cast<double>(with_sql());
        case Quantity::questions_without_sql: return static_cast<double>(state.questions().size() - with_sql());
        case Quantity::shared_join_patterns: return static_cast<double>(shared_join_patterns(state).size());
        case Quantity::unclustered_questions: return static_cast<double>(unclustered_questions(state).size());
    }
    return 0.0;
}

bool PreconditionRule::holds(const DataProductState& state) const {
    const double v = observe(quantity, state);
    switch (op) {
        case RelOp::gt: return v > threshold;
        case RelOp::ge: return v >= threshold;
        case RelOp::lt: return v < threshold;
        case RelOp::le: return v <= threshold;
        case RelOp::eq: return v == threshold;
    }
    return false;
}

std::string PreconditionRule::describe() const {
    std::ostringstream os;
    os << to_string(quantity) << ' ' << to_string(op) << ' ' << threshold;
    return os.str();
}

void ToolDescriptor::validate_params(const ToolParams& params) const {
    if (!params.is_object()) throw Error(ErrorCode::validation, name + ": parameters must be an object");
    for (const auto& [key, value] : params.items()) {
        bool known = false;
        for (const auto& p : input_params) known = known || p.name == key;
        if (!known) throw Error(ErrorCode::validation, name + ": unknown parameter '" + key + "'");
    }
    for (const auto& p : input_params) {
        auto it = params.find(p.name);
        if (it == params.end()) {
            if (p.required) throw Error(ErrorCode::validation, name + ": missing parameter '" + p.name + "'");
            continue;
        }
        if (p.type == ParamType::integer) {
            if (!it->is_number_integer())
                throw Error(ErrorCode::validation, name + ": parameter '" + p.name + "' must be an integer");
            const auto v = it->get<double>();
            if ((p.min && v < *p.min) || (p.max && v > *p.max))
                throw Error(ErrorCode::parameter_bounds, name + ": parameter '" + p.name + "' out of bounds");
        } else {
            if (!it->is_array())
                throw Error(ErrorCode::validation, name + ": parameter '" + p.name + "' must be a list of tables");
            for (const auto& t : *it)
                if (!t.is_string())
                    throw Error(ErrorCode::validation, name + ": parameter '" + p.name + "' must hold table names");
        }
    }
}

void to_json(nlohmann::json& j, const ToolDescriptor& d) {
    json params = json::array();
    for (const auto& p : d.input_params) {
        json pj{{"name", p.name},
                {"type", p.type == ParamType::integer ? "integer" : "table_list"},
                {"required", p.required}};
        if (p.min) pj["min"] = *p.min;
        if (p.max) pj["max"] = *p.max;
        params.push_back(std::move(pj));
    }
    json pre = json::array();
    for (const auto& r : d.preconditions) {
        pre.push_back({{"quantity", to_string(r.quantity)},
                       {"op", to_string(r.op)},
                       {"threshold", r.threshold},
                       {"text", r.describe()}});
    }
    json impacts = json::array();
    for (const auto& i : d.impacts) {
        impacts.push_back({{"metric_id", i.metric_id}, {"sign", to_string(i.sign)}, {"default_weight", i.default_weight}});
    }
    j = json{{"name", d.name},
             {"description", d.description},
             {"input_params", std::move(params)},
             {"output_schema", d.output_schema},
             {"execution_context", to_string(d.execution_context)},
             {"preconditions", std::move(pre)},
             {"impacts", std::move(impacts)}};
}

std::vector<ToolDescriptor> baseline_tool_descriptors() {
    using namespace metric_ids;
    const auto s = [](std::string_view v) { return std::string(v); };
    std::vector<ToolDescriptor> out;

    out.push_back({s(tool_names::question_generation),
                   "Generates template questions over (table, measure, dimension) combinations, "
                   "favouring priority tables.",
                   {{"n", ParamType::integer, true, 1.0, std::nullopt},
                    {"priority_tables", ParamType::table_list, false, std::nullopt, std::nullopt}},
                   {"question"},
                   ScopeLevel::database,
                   {{Quantity::table_count, RelOp::gt, 0}},
                   {{s(question_count), ImpactSign::increase, 1.0},
                    {s(table_coverage), ImpactSign::increase, 0.5},
                    {s(column_coverage), ImpactSign::increase, 0.5}}});

    out.push_back({s(tool_names::text_to_sql),
                   "Synthesizes and executes SQL for questions that have none.",
                   {{"m", ParamType::integer, true, 1.0, std::nullopt}},
                   {"query_version", "answer"},
                   ScopeLevel::question,
                   {{Quantity::questions_without_sql, RelOp::gt, 0}},
                   {{s(table_coverage), ImpactSign::increase, 1.0},
                    {s(column_coverage), ImpactSign::increase, 1.0},
                    {s(avg_query_length), ImpactSign::optimize, 0.5},
                    {s(avg_query_complexity), ImpactSign::optimize, 0.5},
                    {s(avg_exec_speed), ImpactSign::optimize, 0.5}}});

    out.push_back({s(tool_names::followup_generation),
                   "Chains follow-up questions whose SQL extends the parent's with a filter, ordering or limit.",
                   {{"k", ParamType::integer, true, 1.0, std::nullopt}},
                   {"question", "query_version", "answer"},
                   ScopeLevel::question,
                   {{Quantity::questions_with_sql, RelOp::ge, 1}},
                   {{s(question_count), ImpactSign::increase, 1.0},
                    {s(avg_query_length), ImpactSign::increase, 1.0}}});

    out.push_back({s(tool_names::view_creation),
                   "Materializes shared join patterns as views and rewrites the queries that use them.",
                   {{"v", ParamType::integer, true, 1.0, std::nullopt}},
                   {"view", "query_version", "answer"},
                   ScopeLevel::database,
                   {{Quantity::shared_join_patterns, RelOp::ge, 1}},
                   {{s(avg_query_length), ImpactSign::decrease, 1.0},
                    {s(avg_query_complexity), ImpactSign::decrease, 1.0},
                    {s(table_coverage), ImpactSign::increase, 0.5},
                    {s(column_coverage), ImpactSign::increase, 0.5}}});

    out.push_back({s(tool_names::topic_mapping),
                   "Labels every unclustered question with \"<dominant table> · <query kind>\".",
                   {},
                   {"topic_assignment"},
                   ScopeLevel::database,
                   {{Quantity::questions_with_sql, RelOp::ge, 10}, {Quantity::unclustered_questions, RelOp::ge, 1}},
                   {}});
    return out;
}

void ToolRegistry::register_tool(ToolDescriptor desc) {
    if (desc.name.empty()) throw Error(ErrorCode::validation, "tool name must not be empty");
    if (find(desc.name)) throw Error(ErrorCode::duplicate_tool, "tool already registered: " + desc.name);
    for (const auto& i : desc.impacts) {
        if (!metrics_->has_metric(i.metric_id))
            throw Error(ErrorCode::unknown_metric, "tool " + desc.name + " impacts unknown metric: " + i.metric_id);
        if (!(i.default_weight > 0.0) || !std::isfinite(i.default_weight))
            throw Error(ErrorCode::invalid_value, "tool " + desc.name + ": impact weights must be positive");
    }
    tools_.push_back(std::move(desc));
}

void ToolRegistry::set_weight(std::string_view tool, std::string_view metric_id, double weight) {
    if (!(weight > 0.0) || !std::isfinite(weight)) throw Error(ErrorCode::invalid_value, "impact weights must be positive");
    for (auto& t : tools_) {
        if (t.name != tool) continue;
        for (auto& i : t.impacts) {
            if (i.metric_id == metric_id) {
                i.default_weight = weight;
                return;
            }
        }
    }
    throw Error(ErrorCode::not_found, "no impact of " + std::string(tool) + " on " + std::string(metric_id));
}

const ToolDescriptor* ToolRegistry::find(std::string_view name) const {
    for (const auto& t : tools_)
        if (t.name == name) return &t;
    return nullptr;
}

std::vector<const ToolDescriptor*> ToolRegistry::applicable_tools(const DataProductState& state) const {
    std::vector<const ToolDescriptor*> out;
    for (const auto& t : tools_) {
        bool ok = true;
        for (const auto& rule : t.preconditions) {
            if (!rule.holds(state)) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(&t);
    }
    return out;
}

std::vector<std::string> ToolRegistry::failing_preconditions(std::string_view tool, const DataProductState& state) const {
    const auto* t = find(tool);
    if (!t) throw Error(ErrorCode::not_found, "unknown tool: " + std::string(tool));
    std::vector<std::string> out;
    for (const auto& rule : t->preconditions)
        if (!rule.holds(state)) out.push_back(rule.describe());
    return out;
}

}  // namespace dpcc
