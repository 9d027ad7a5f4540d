#include "dpcc/planner.hpp"

#include "dpcc/error.hpp"
#include "dpcc/json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dpcc {

void to_json(nlohmann::json& j, const ActionProposal& p) {
    j = json{{"tool_name", p.tool_name},
             {"target_scope", p.target_scope},
             {"parameters", p.parameters},
             {"expected_improvement", p.expected_improvement},
             {"rationale", p.rationale},
             {"iteration", p.iteration}};
}

void from_json(const nlohmann::json& j, ActionProposal& p) {
    j.at("tool_name").get_to(p.tool_name);
    j.at("target_scope").get_to(p.target_scope);
    p.parameters = j.at("parameters");
    j.at("expected_improvement").get_to(p.expected_improvement);
    j.at("rationale").get_to(p.rationale);
    j.at("iteration").get_to(p.iteration);
}

std::string_view to_string(VerdictKind kind) {
    switch (kind) {
        case VerdictKind::propose: return "Propose";
        case VerdictKind::converged: return "Converged";
        case VerdictKind::manual_review: return "ManualReviewRecommended";
    }
    return "?";
}

namespace {

bool counts(ImpactSign sign, Comparator cmp) {
    switch (sign) {
        case ImpactSign::increase: return cmp == Comparator::at_least;
        case ImpactSign::decrease: return cmp == Comparator::at_most;
        case ImpactSign::optimize: return true;
    }
    return false;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace

double expected_improvement(const ToolDescriptor& tool, const GapVector& gap) {
    double score = 0.0;
    for (const auto& impact : tool.impacts) {
        const auto* c = gap.find(impact.metric_id);
        if (c && counts(impact.sign, c->comparator)) score += impact.default_weight * c->normalized_gap;
    }
    return score;
}

bool detect_stagnation(std::span<const double> history, const PlannerConfig& config) {
    const auto k = static_cast<std::size_t>(std::max(1, config.stagnation_window));
    if (history.size() < k + 1) return false;
    for (std::size_t i = history.size() - k; i < history.size(); ++i) {
        if (history[i - 1] - history[i] >= config.stagnation_epsilon) return false;
    }
    return true;
}

int calibrate_question_count(std::size_t uncovered) {
    if (uncovered > 50) return 80;
    if (uncovered <= 10) return 20;
    return static_cast<int>(std::lround(20.0 + 1.5 * (static_cast<double>(uncovered) - 10.0)));
}

std::vector<TableId> uncovered_tables(const DataProductState& state) {
    const auto covered = covered_tables(state);
    std::vector<const TableMeta*> out;
    for (const auto& [id, t] : state.tables())
        if (!covered.count(id)) out.push_back(t.get());
    std::stable_sort(out.begin(), out.end(), [](const TableMeta* a, const TableMeta* b) {
        return a->row_count_estimate > b->row_count_estimate;
    });
    std::vector<TableId> ids;
    for (const auto* t : out) ids.push_back(t->table_id);
    return ids;
}

ToolParams calibrate(const ToolDescriptor& tool, const DataProductState& state, const GapVector&) {
    ToolParams p = ToolParams::object();
    if (tool.name == tool_names::question_generation) {
        auto uncovered = uncovered_tables(state);
        p["n"] = calibrate_question_count(uncovered.size());
        if (uncovered.empty()) {
            // Every table is touched: aim at the least column-covered ones.
            const auto cols = covered_columns(state);
            std::vector<std::pair<double, const TableMeta*>> ranked;
            for (const auto& [id, t] : state.tables()) {
                std::size_t hit = 0;
                for (const auto& c : cols) hit += c.table == id ? 1 : 0;
                const double cov = t->columns.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(t->columns.size());
                if (cov < 1.0) ranked.emplace_back(cov, t.get());
            }
            std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first < b.first;
                return a.second->row_count_estimate > b.second->row_count_estimate;
            });
            for (const auto& [cov, t] : ranked) uncovered.push_back(t->table_id);
        }
        p["priority_tables"] = uncovered;
    } else if (tool.name == tool_names::text_to_sql) {
        p["m"] = static_cast<int>(observe(Quantity::questions_without_sql, state));
    } else if (tool.name == tool_names::view_creation) {
        p["v"] = std::min(5, static_cast<int>(observe(Quantity::shared_join_patterns, state)));
    } else if (tool.name == tool_names::followup_generation) {
        p["k"] = std::min(10, static_cast<int>(observe(Quantity::questions_with_sql, state)));
    } else {
        // Tools outside the baseline set get their required integer parameters at the lower bound.
        for (const auto& spec : tool.input_params)
            if (spec.required && spec.type == ParamType::integer) p[spec.name] = static_cast<int>(spec.min.value_or(1.0));
    }
    return p;
}

PlannerVerdict plan(const DataProductState& state, const GapVector& gap, std::span<const double> history,
                    const ToolRegistry& registry, int iteration, const Suppressions& suppressed,
                    const PlannerConfig& config) {
    PlannerVerdict v;
    const double total = gap.total();
    if (total == 0.0) {
        v.kind = VerdictKind::converged;
        v.reason = "all contract targets met";
        return v;
    }
    if (detect_stagnation(history, config)) {
        std::ostringstream os;
        os << "diminishing returns: last " << config.stagnation_window << " improvements below "
           << config.stagnation_epsilon << " (total gap";
        const auto from = history.size() - static_cast<std::size_t>(config.stagnation_window) - 1;
        for (std::size_t i = from; i < history.size(); ++i) os << (i == from ? " " : " -> ") << fmt(history[i]);
        os << ")";
        v.kind = VerdictKind::manual_review;
        v.reason = os.str();
        return v;
    }

    const auto scope = ContextScope::database();
    const ToolDescriptor* best = nullptr;
    double best_score = 0.0;
    std::size_t candidates = 0;
    for (const auto* tool : registry.applicable_tools(state)) {
        if (suppressed.count({tool->name, scope.key()})) continue;
        ++candidates;
        const double score = expected_improvement(*tool, gap);
        if (!best || score > best_score) {
            best = tool;
            best_score = score;
        }
    }
    if (!best || best_score <= 0.0) {
        v.kind = VerdictKind::manual_review;
        v.reason = candidates == 0 ? "no applicable tool" : "no applicable tool can reduce the remaining gap";
        return v;
    }

    ActionProposal p;
    p.tool_name = best->name;
    p.target_scope = scope;
    p.parameters = calibrate(*best, state, gap);
    p.expected_improvement = best_score;
    p.iteration = iteration;
    std::ostringstream os;
    os << best->name << " has the highest expected improvement (" << fmt(best_score) << ") against total gap "
       << fmt(total) << ":";
    bool first = true;
    for (const auto& impact : best->impacts) {
        const auto* c = gap.find(impact.metric_id);
        if (!c || !counts(impact.sign, c->comparator) || c->normalized_gap == 0.0) continue;
        os << (first ? " " : ", ") << impact.metric_id << " gap " << fmt(c->normalized_gap) << " x weight "
           << fmt(impact.default_weight);
        first = false;
    }
    p.rationale = os.str();
    v.kind = VerdictKind::propose;
    v.proposal = std::move(p);
    return v;
}

}  // namespace dpcc
