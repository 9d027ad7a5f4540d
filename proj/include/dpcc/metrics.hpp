#pragma once

#include "dpcc/sql_analyzer.hpp"
#include "dpcc/state.hpp"
#include "dpcc/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace dpcc {

/// Parts of the state a metric can depend on.
enum class Facet { tables, questions, query_versions, answers, views, topics };

enum class Direction { maximize, minimize };

std::string_view to_string(Facet facet);
std::string_view to_string(Direction direction);

/// nullopt means "unknown" (e.g. no query has been timed yet).
using MetricFn = std::function<std::optional<double>(const DataProductState&, const ContextScope&)>;

struct MetricDefinition {
    std::string metric_id;
    ScopeLevel scope_level = ScopeLevel::database;
    Direction direction = Direction::maximize;
    std::string unit;
    std::set<Facet> depends_on;
    MetricFn compute;
    // Finer-grained metrics that also have a database-wide value, recomputed
    // whenever any of their finer scopes is.
    bool rollup_to_database = false;
    // Contract targets must fall inside these bounds, when set.
    std::optional<std::pair<double, double>> target_bounds;
};

struct MetricValue {
    std::string metric_id;
    ContextScope scope;
    std::optional<double> value;
    std::int64_t computed_at_version = 0;
    int iteration = 0;
    std::int64_t timestamp_ms = 0;

    friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

void to_json(nlohmann::json& j, const MetricValue& v);

struct MetricTarget {
    std::string metric_id;
    ContextScope scope;

    friend auto operator<=>(const MetricTarget&, const MetricTarget&) = default;
};

struct GapComponent {
    std::string metric_id;
    double target = 0.0;
    Comparator comparator = Comparator::at_least;
    std::optional<double> value;
    double normalized_gap = 0.0;
};

struct GapVector {
    std::vector<GapComponent> components;

    double total() const;
    const GapComponent* find(std::string_view metric_id) const;
};

/// Shortfall of `value` from a contract entry, normalized by the target and
/// clamped to [0,1]. Unknown values count as fully unmet.
double normalized_gap(std::optional<double> value, const ContractEntry& entry);

namespace metric_ids {
inline constexpr std::string_view table_coverage = "table_coverage";
inline constexpr std::string_view column_coverage = "column_coverage";
inline constexpr std::string_view question_count = "question_count";
inline constexpr std::string_view avg_query_length = "avg_query_length";
inline constexpr std::string_view avg_query_complexity = "avg_query_complexity";
inline constexpr std::string_view avg_exec_speed = "avg_exec_speed";
}  // namespace metric_ids

/// The six built-in metric definitions.
std::vector<MetricDefinition> builtin_metrics(const ComplexityWeights& weights = {});

/// Tables referenced by the latest query version of any question.
std::set<TableId> covered_tables(const DataProductState& state);
/// Columns referenced by the latest query version of any question.
std::set<ColumnRef> covered_columns(const DataProductState& state);

/// Registry of metric definitions plus the latest-value store and history.
/// Computation is pure over snapshots; the store is single-writer and
/// internally synchronized for readers.
class MetricsEngine {
public:
    using Clock = std::function<std::int64_t()>;

    explicit MetricsEngine(Clock wall_clock = {});

    void register_metric(MetricDefinition def);
    bool has_metric(std::string_view metric_id) const;
    const MetricDefinition& definition(std::string_view metric_id) const;
    std::vector<std::string> metric_ids() const;
    std::size_t size() const { return defs_.size(); }

    /// Which (metric, scope) pairs an event can change. `before` is the state
    /// the event is applied to.
    std::vector<MetricTarget> resolve_contexts(const DataProductState& before, const StateEvent& event) const;

    /// Recomputes the targets (plus database roll-ups of finer targets) on
    /// `snapshot`, stores them as latest values and appends them to history.
    std::vector<MetricValue> recalculate(const DataProductState& snapshot, const std::vector<MetricTarget>& targets,
                                         int iteration);

    /// Every registered metric at every scope it is defined for.
    std::vector<MetricTarget> all_targets(const DataProductState& snapshot) const;
    std::vector<MetricValue> recalculate_all(const DataProductState& snapshot, int iteration);

    /// resolve_contexts + recalculate for an event that turned `before` into `after`.
    std::vector<MetricValue> on_event(const DataProductState& before, const StateEvent& event,
                                      const DataProductState& after, int iteration);

    std::optional<MetricValue> latest(std::string_view metric_id, const ContextScope& scope) const;
    std::vector<MetricValue> latest_values() const;
    std::vector<MetricValue> history(std::string_view metric_id) const;
    std::vector<MetricValue> full_history() const;

    /// Throws validation errors for unknown metrics, duplicate entries or
    /// out-of-bounds targets.
    void validate_contract(const Contract& contract) const;

    /// Throws missing_value when a contract metric has never been computed.
    GapVector gap(const Contract& contract) const;

    /// One JSON record per line: iteration, metric_id, scope, value, timestamp.
    std::string export_history_jsonl() const;

    void clear_values();

private:
    std::map<std::string, MetricDefinition, std::less<>> defs_;
    std::vector<std::string> order_;
    Clock clock_;

    mutable std::shared_mutex mu_;
    std::map<std::pair<std::string, std::string>, MetricValue> latest_;
    std::vector<MetricValue> history_;
};

}  // namespace dpcc
