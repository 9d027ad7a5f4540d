#include "dpcc/metrics.hpp"

#include "dpcc/error.hpp"
#include "dpcc/json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

namespace dpcc {

std::string_view to_string(Facet facet) {
    switch (facet) {
        case Facet::tables: return "tables";
        case Facet::questions: return "questions";
        case Facet::query_versions: return "query_versions";
        case Facet::answers: return "answers";
        case Facet::views: return "views";
        case Facet::topics: return "topics";
    }
    return "?";
}

std::string_view to_string(Direction direction) {
    return direction == Direction::maximize ? "maximize" : "minimize";
}

void to_json(json& j, const MetricValue& v) {
    j = json{{"metric_id", v.metric_id},
             {"scope", v.scope},
             {"value", v.value ? json(*v.value) : json(nullptr)},
             {"computed_at_version", v.computed_at_version},
             {"iteration", v.iteration},
             {"timestamp_ms", v.timestamp_ms}};
}

double GapVector::total() const {
    double sum = 0.0;
    for (const auto& c : components) sum += c.normalized_gap;
    return sum;
}

const GapComponent* GapVector::find(std::string_view metric_id) const {
    for (const auto& c : components)
        if (c.metric_id == metric_id) return &c;
    return nullptr;
}

double normalized_gap(std::optional<double> value, const ContractEntry& entry) {
    if (!value) return 1.0;
    const double v = *value;
    const double t = entry.target;
    double raw = 0.0;
    if (entry.comparator == Comparator::at_least) {
        if (v >= t) return 0.0;
        raw = t > 0.0 ? (t - v) / t : 1.0;
    } else {
        if (v <= t) return 0.0;
        raw = t > 0.0 ? (v - t) / t : 1.0;
    }
    return std::clamp(raw, 0.0, 1.0);
}

std::set<TableId> covered_tables(const DataProductState& state) {
    std::set<TableId> out;
    for (const auto& [id, rec] : state.questions()) {
        if (const auto* q = rec->latest_query())
            for (const auto& t : q->analysis.referenced_tables)
                if (state.find_table(t)) out.insert(t);
    }
    return out;
}

std::set<ColumnRef> covered_columns(const DataProductState& state) {
    std::set<ColumnRef> out;
    for (const auto& [id, rec] : state.questions()) {
        if (const auto* q = rec->latest_query())
            for (const auto& c : q->analysis.referenced_columns)
                if (const auto* t = state.find_table(c.table); t && t->find_column(c.column)) out.insert(c);
    }
    return out;
}

namespace {

std::size_t referenced_in_table(const std::set<ColumnRef>& covered, const TableId& table) {
    auto it = covered.lower_bound(ColumnRef{table, ""});
    std::size_t n = 0;
    for (; it != covered.end() && it->table == table; ++it) ++n;
    return n;
}

std::optional<double> table_coverage(const DataProductState& s, const ContextScope&) {
    if (s.tables().empty()) return std::nullopt;
    return static_cast<double>(covered_tables(s).size()) / static_cast<double>(s.tables().size());
}

std::optional<double> column_coverage(const DataProductState& s, const ContextScope& scope) {
    const auto covered = covered_columns(s);
    if (scope.level == ScopeLevel::table) {
        const auto* t = s.find_table(scope.ids.at(0));
        if (!t || t->columns.empty()) return std::nullopt;
        return static_cast<double>(referenced_in_table(covered, t->table_id)) /
               static_cast<double>(t->columns.size());
    }
    std::size_t total = 0;
    for (const auto& [id, t] : s.tables()) total += t->columns.size();
    if (total == 0) return std::nullopt;
    return static_cast<double>(covered.size()) / static_cast<double>(total);
}

std::optional<double> question_count(const DataProductState& s, const ContextScope&) {
    return static_cast<double>(s.questions().size());
}

template <typename F>
std::optional<double> mean_over_latest(const DataProductState& s, F value_of) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [id, rec] : s.questions()) {
        const auto* q = rec->latest_query();
        if (!q) continue;
        if (auto v = value_of(*q)) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace

std::vector<MetricDefinition> builtin_metrics(const ComplexityWeights& weights) {
    std::vector<MetricDefinition> out;
    const std::pair<double, double> ratio{0.0, 1.0};
    const std::pair<double, double> non_negative{0.0, std::numeric_limits<double>::infinity()};

    out.push_back({std::string(metric_ids::table_coverage), ScopeLevel::database, Direction::maximize, "ratio",
                   {Facet::tables, Facet::query_versions}, table_coverage, false, ratio});
    out.push_back({std::string(metric_ids::column_coverage), ScopeLevel::table, Direction::maximize, "ratio",
                   {Facet::tables, Facet::query_versions}, column_coverage, true, ratio});
    out.push_back({std::string(metric_ids::question_count), ScopeLevel::database, Direction::maximize, "count",
                   {Facet::questions}, question_count, false, non_negative});
    out.push_back({std::string(metric_ids::avg_query_length), ScopeLevel::database, Direction::minimize, "tokens",
                   {Facet::query_versions},
                   [](const DataProductState& s, const ContextScope&) {
                       return mean_over_latest(s, [](const QueryVersion& q) -> std::optional<double> {
                           return q.analysis.token_count;
                       });
                   },
                   false, non_negative});
    out.push_back({std::string(metric_ids::avg_query_complexity), ScopeLevel::database, Direction::minimize, "score",
                   {Facet::query_versions},
                   [weights](const DataProductState& s, const ContextScope&) {
                       return mean_over_latest(s, [&](const QueryVersion& q) -> std::optional<double> {
                           return complexity_score(q.analysis, weights);
                       });
                   },
                   false, non_negative});
    // Timed-out queries carry the timeout ceiling as exec_ms.
    out.push_back({std::string(metric_ids::avg_exec_speed), ScopeLevel::database, Direction::minimize, "ms",
                   {Facet::query_versions},
                   [](const DataProductState& s, const ContextScope&) {
                       return mean_over_latest(s, [](const QueryVersion& q) { return q.exec_ms; });
                   },
                   false, non_negative});
    return out;
}

MetricsEngine::MetricsEngine(Clock wall_clock) : clock_(std::move(wall_clock)) {
    if (!clock_) {
        clock_ = [] {
            return std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                .count();
        };
    }
}

void MetricsEngine::register_metric(MetricDefinition def) {
    if (def.metric_id.empty()) throw Error(ErrorCode::validation, "metric id must not be empty");
    if (!def.compute) throw Error(ErrorCode::validation, "metric " + def.metric_id + " has no compute function");
    if (defs_.count(def.metric_id)) throw Error(ErrorCode::duplicate_metric, "metric already registered: " + def.metric_id);
    order_.push_back(def.metric_id);
    std::string id = def.metric_id;
    defs_.emplace(std::move(id), std::move(def));
}

bool MetricsEngine::has_metric(std::string_view metric_id) const { return defs_.find(metric_id) != defs_.end(); }

const MetricDefinition& MetricsEngine::definition(std::string_view metric_id) const {
    auto it = defs_.find(metric_id);
    if (it == defs_.end()) throw Error(ErrorCode::unknown_metric, "unknown metric: " + std::string(metric_id));
    return it->second;
}

std::vector<std::string> MetricsEngine::metric_ids() const { return order_; }

namespace {

std::optional<Facet> facet_of(EventKind kind) {
    switch (kind) {
        case EventKind::TableAdded: return Facet::tables;
        case EventKind::QuestionAdded: return Facet::questions;
        case EventKind::QueryVersionAdded: return Facet::query_versions;
        case EventKind::AnswerRecorded: return Facet::answers;
        case EventKind::ViewAdded: return Facet::views;
        case EventKind::TopicAssigned: return Facet::topics;
        case EventKind::ContractChanged: return std::nullopt;
    }
    return std::nullopt;
}

std::set<TableId> latest_tables(const DataProductState& s, const QuestionId& qid) {
    if (const auto* rec = s.find_question(qid))
        if (const auto* q = rec->latest_query()) return q->analysis.referenced_tables;
    return {};
}

std::set<TableId> all_table_ids(const DataProductState& s) {
    std::set<TableId> out;
    for (const auto& [id, t] : s.tables()) out.insert(id);
    return out;
}

// Tables whose table-scoped values the event can change.
std::set<TableId> touched_tables(const DataProductState& before, const StateEvent& event) {
    return std::visit(
        [&](const auto& p) -> std::set<TableId> {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TableMeta>) {
                return {p.table_id};
            } else if constexpr (std::is_same_v<T, Question>) {
                std::set<TableId> out;
                for (const auto& t : p.schema_targets) out.insert(t.table);
                return out;
            } else if constexpr (std::is_same_v<T, QueryVersion>) {
                auto out = latest_tables(before, p.question_id);
                out.insert(p.analysis.referenced_tables.begin(), p.analysis.referenced_tables.end());
                return out;
            } else if constexpr (std::is_same_v<T, AnswerVersion> || std::is_same_v<T, TopicAssignment>) {
                return latest_tables(before, p.question_id);
            } else if constexpr (std::is_same_v<T, ViewDef>) {
                try {
                    auto catalog = SchemaCatalog::from_state(before);
                    catalog.add_view(p);
                    return catalog.find_view(p.name)->base_tables;
                } catch (const Error&) {
                    return all_table_ids(before);
                }
            } else {
                return all_table_ids(before);
            }
        },
        event.payload);
}

std::set<QuestionId> touched_questions(const DataProductState& before, const StateEvent& event) {
    return std::visit(
        [&](const auto& p) -> std::set<QuestionId> {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Question>) {
                return {p.question_id};
            } else if constexpr (std::is_same_v<T, QueryVersion> || std::is_same_v<T, AnswerVersion> ||
                                 std::is_same_v<T, TopicAssignment>) {
                return {p.question_id};
            } else {
                std::set<QuestionId> out;
                for (const auto& [id, rec] : before.questions()) out.insert(id);
                return out;
            }
        },
        event.payload);
}

}  // namespace

std::vector<MetricTarget> MetricsEngine::resolve_contexts(const DataProductState& before,
                                                          const StateEvent& event) const {
    std::set<MetricTarget> out;
    const auto facet = facet_of(event.kind);
    if (!facet) return {};
    std::optional<std::set<TableId>> tables;
    std::optional<std::set<QuestionId>> questions;
    for (const auto& id : order_) {
        const auto& def = defs_.find(id)->second;
        if (!def.depends_on.count(*facet)) continue;
        switch (def.scope_level) {
            case ScopeLevel::database: out.insert({id, ContextScope::database()}); break;
            case ScopeLevel::table:
                if (!tables) tables = touched_tables(before, event);
                for (const auto& t : *tables) out.insert({id, ContextScope::table(t)});
                break;
            case ScopeLevel::question:
                if (!questions) questions = touched_questions(before, event);
                for (const auto& q : *questions) out.insert({id, ContextScope::question(q)});
                break;
        }
    }
    return {out.begin(), out.end()};
}

std::vector<MetricValue> MetricsEngine::recalculate(const DataProductState& snapshot,
                                                    const std::vector<MetricTarget>& targets, int iteration) {
    std::set<MetricTarget> todo(targets.begin(), targets.end());
    for (const auto& t : targets) {
        const auto& def = definition(t.metric_id);
        if (def.rollup_to_database && t.scope.level != ScopeLevel::database)
            todo.insert({t.metric_id, ContextScope::database()});
    }
    {
        // Database-level values exist from the first recalculation on, even
        // when the triggering event did not touch their facets.
        std::shared_lock lock(mu_);
        for (const auto& id : order_) {
            const auto& def = defs_.find(id)->second;
            if (def.scope_level != ScopeLevel::database && !def.rollup_to_database) continue;
            if (!latest_.count({id, ContextScope::database().key()})) todo.insert({id, ContextScope::database()});
        }
    }

    const auto now = clock_();
    std::vector<MetricValue> computed;
    computed.reserve(todo.size());
    for (const auto& t : todo) {
        const auto& def = definition(t.metric_id);
        // A table or question that no longer exists has no value to compute.
        if (t.scope.level == ScopeLevel::table && !snapshot.find_table(t.scope.ids.at(0))) continue;
        if (t.scope.level == ScopeLevel::question && !snapshot.find_question(t.scope.ids.at(0))) continue;
        computed.push_back({t.metric_id, t.scope, def.compute(snapshot, t.scope), snapshot.version(), iteration, now});
    }

    std::unique_lock lock(mu_);
    for (const auto& v : computed) {
        latest_[{v.metric_id, v.scope.key()}] = v;
        history_.push_back(v);
    }
    return computed;
}

std::vector<MetricTarget> MetricsEngine::all_targets(const DataProductState& snapshot) const {
    std::vector<MetricTarget> out;
    for (const auto& id : order_) {
        const auto& def = defs_.find(id)->second;
        switch (def.scope_level) {
            case ScopeLevel::database: out.push_back({id, ContextScope::database()}); break;
            case ScopeLevel::table:
                for (const auto& [tid, t] : snapshot.tables()) out.push_back({id, ContextScope::table(tid)});
                if (def.rollup_to_database) out.push_back({id, ContextScope::database()});
                break;
            case ScopeLevel::question:
                for (const auto& [qid, q] : snapshot.questions()) out.push_back({id, ContextScope::question(qid)});
                if (def.rollup_to_database) out.push_back({id, ContextScope::database()});
                break;
        }
    }
    return out;
}

std::vector<MetricValue> MetricsEngine::recalculate_all(const DataProductState& snapshot, int iteration) {
    return recalculate(snapshot, all_targets(snapshot), iteration);
}

std::vector<MetricValue> MetricsEngine::on_event(const DataProductState& before, const StateEvent& event,
                                                 const DataProductState& after, int iteration) {
    return recalculate(after, resolve_contexts(before, event), iteration);
}

std::optional<MetricValue> MetricsEngine::latest(std::string_view metric_id, const ContextScope& scope) const {
    std::shared_lock lock(mu_);
    auto it = latest_.find({std::string(metric_id), scope.key()});
    if (it == latest_.end()) return std::nullopt;
    return it->second;
}

std::vector<MetricValue> MetricsEngine::latest_values() const {
    std::shared_lock lock(mu_);
    std::vector<MetricValue> out;
    out.reserve(latest_.size());
    for (const auto& [k, v] : latest_) out.push_back(v);
    return out;
}

std::vector<MetricValue> MetricsEngine::history(std::string_view metric_id) const {
    std::shared_lock lock(mu_);
    std::vector<MetricValue> out;
    for (const auto& v : history_)
        if (v.metric_id == metric_id) out.push_back(v);
    return out;
}

std::vector<MetricValue> MetricsEngine::full_history() const {
    std::shared_lock lock(mu_);
    return history_;
}

void MetricsEngine::validate_contract(const Contract& contract) const {
    if (contract.entries.empty()) throw Error(ErrorCode::validation, "contract has no entries");
    std::set<std::string> seen;
    for (const auto& e : contract.entries) {
        if (!has_metric(e.metric_id)) throw Error(ErrorCode::validation, "unknown metric in contract: " + e.metric_id);
        if (!seen.insert(e.metric_id).second)
            throw Error(ErrorCode::validation, "metric appears twice in contract: " + e.metric_id);
        if (!std::isfinite(e.target)) throw Error(ErrorCode::validation, "target must be finite: " + e.metric_id);
        const auto& def = definition(e.metric_id);
        if (def.target_bounds && (e.target < def.target_bounds->first || e.target > def.target_bounds->second))
            throw Error(ErrorCode::validation, "target out of range for " + e.metric_id);
        if (e.comparator == Comparator::at_most && e.target <= 0.0)
            throw Error(ErrorCode::validation, "upper-bound target must be positive: " + e.metric_id);
    }
}

GapVector MetricsEngine::gap(const Contract& contract) const {
    GapVector out;
    for (const auto& e : contract.entries) {
        auto v = latest(e.metric_id, ContextScope::database());
        if (!v) throw Error(ErrorCode::missing_value, "metric has not been computed: " + e.metric_id);
        out.components.push_back({e.metric_id, e.target, e.comparator, v->value, normalized_gap(v->value, e)});
    }
    return out;
}

std::string MetricsEngine::export_history_jsonl() const {
    std::ostringstream os;
    for (const auto& v : full_history()) {
        nlohmann::json j = v;
        os << j.dump() << '\n';
    }
    return os.str();
}

void MetricsEngine::clear_values() {
    std::unique_lock lock(mu_);
    latest_.clear();
    history_.clear();
}

}  // namespace dpcc
