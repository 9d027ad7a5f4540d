#pragma once

#include "dpcc/baseline_tools.hpp"
#include "dpcc/db_connector.hpp"
#include "dpcc/event_bus.hpp"
#include "dpcc/metrics.hpp"
#include "dpcc/planner.hpp"
#include "dpcc/state.hpp"
#include "dpcc/tool_registry.hpp"
#include "dpcc/version_store.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <span>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

namespace dpcc {

enum class ApprovalMode { automatic, gated };
enum class Approval { automatic, approved_by_human, rejected_by_human };
enum class RunPhase { idle, running, paused, waiting_approval, terminated };
enum class RunVerdict { converged, manual_review, budget_exhausted, stopped, error };

std::string_view to_string(ApprovalMode m);  // "auto" / "gated"
std::string_view to_string(Approval a);      // "auto" / "approved_by_human" / "rejected_by_human"
std::string_view to_string(RunPhase p);
std::string_view to_string(RunVerdict v);    // "Converged", "ManualReviewRecommended", "BudgetExhausted", ...
ApprovalMode approval_mode_from_string(std::string_view s);

struct RunConfig {
    std::optional<Contract> contract;  // replaces the current contract when set
    int max_iterations = 25;
    ApprovalMode approval_mode = ApprovalMode::automatic;
    std::uint64_t seed = 0;
};

struct IterationRecord {
    int iteration = 0;
    std::string run_id;
    ActionProposal proposal;
    Approval approval = Approval::automatic;
    std::string actor;
    std::string status;  // "applied", "failed" or "rejected"
    std::string result_summary;
    std::vector<MetricValue> metrics_after;  // database-scope values
    double total_gap_after = 0.0;
    std::vector<std::string> commit_ids;
    std::int64_t first_event_id = 0;  // 0 when no event was applied
    std::int64_t last_event_id = 0;
};

void to_json(nlohmann::json& j, const IterationRecord& r);

struct RunReport {
    std::string run_id;
    RunVerdict verdict = RunVerdict::stopped;
    std::string reason;
    std::vector<IterationRecord> iterations;
    int failures = 0;
    GapVector final_gap;
    std::vector<MetricValue> final_metrics;
};

void to_json(nlohmann::json& j, const RunReport& r);

struct StepResult {
    std::optional<RunVerdict> verdict;  // set when the planner ended the loop
    std::string reason;
    std::optional<IterationRecord> record;
};

/// A question supplied with the data source: text, schema targets, optional SQL.
struct PredefinedQuestion {
    std::string text;
    std::set<SchemaTarget> targets;
    std::optional<std::string> sql;
};

/// Reads a JSON array of {"text", "targets": [{"table", "column"?}], "sql"?}.
std::vector<PredefinedQuestion> load_predefined_questions(const std::filesystem::path& path);
std::vector<PredefinedQuestion> parse_predefined_questions(const nlohmann::json& doc);

/// Tables ordered so that foreign-key targets come first (ties by name).
/// Throws validation on cyclic foreign keys.
std::vector<TableMeta> dependency_order(std::vector<TableMeta> tables);

struct ConnectSummary {
    std::vector<TableId> tables;
    std::size_t columns = 0;
    std::size_t questions = 0;
};

struct OrchestratorOptions {
    PlannerConfig planner;
    int suppression_window = 3;                      // R iterations after a rejection
    MillisClock exec_clock;                          // query timing; steady clock when empty
    std::function<std::int64_t()> wall_clock;        // metric and commit timestamps
    std::optional<std::filesystem::path> store_dir;  // version store + journal
    ComplexityWeights complexity;
};

/// Drives plan → parameterize → execute → update → measure for one data
/// product. One loop at a time; other threads interact through the control
/// methods and read through snapshots.
class Orchestrator {
public:
    explicit Orchestrator(OrchestratorOptions options = {});
    ~Orchestrator();

    Orchestrator(const Orchestrator&) = delete;
    Orchestrator& operator=(const Orchestrator&) = delete;

    /// Replaces the tool implementation (and optionally descriptor) for a name.
    /// Intended for alternative backends and test doubles.
    void install_tool(std::unique_ptr<Tool> tool);
    void register_tool(ToolDescriptor descriptor, std::unique_ptr<Tool> tool);

    /// Adds a metric definition (e.g. a question-level quality score) and
    /// computes it on the current state. Throws conflict while a run is active.
    void register_metric(MetricDefinition def);

    /// Throws conflict while a run is active.
    ConnectSummary connect(const ConnectionProfile& profile, const std::vector<PredefinedQuestion>& questions = {});
    bool connected() const;

    /// Validates and applies a contract (ContractChanged event).
    void set_contract(const Contract& contract, const std::string& actor = "operator");

    /// Synchronous run on the calling thread. In gated mode another thread
    /// must resolve approvals.
    RunReport run_loop(const RunConfig& config);

    // Background run control.
    void start(const RunConfig& config);
    void pause();
    void resume();
    void stop();
    /// Blocks until the background run (if any) finished; returns its report.
    std::optional<RunReport> wait();

    /// One iteration outside a background run. Throws busy while one is active.
    StepResult step(const RunConfig& config);

    void resolve_approval(int iteration, bool approve, const std::string& actor);
    std::optional<ActionProposal> pending_approval() const;

    // Reads.
    DataProductState snapshot() const;
    RunPhase phase() const;
    std::vector<IterationRecord> journal() const;
    std::vector<nlohmann::json> persisted_journal() const;
    std::optional<RunReport> last_report() const;

    struct MetricsView {
        DataProductState state;
        std::vector<MetricValue> values;
        std::optional<GapVector> gap;
    };
    /// Latest metric values and gaps consistent with a single snapshot.
    MetricsView metrics_view() const;

    const MetricsEngine& metrics() const { return metrics_; }
    const ToolRegistry& registry() const { return registry_; }
    EventBus& events() { return bus_; }
    VersionStore* store() { return store_.get(); }

private:
    struct RunContext {
        std::string run_id;
        RunConfig config;
        std::vector<double> history;
        int iterations = 0;
        int failures = 0;
    };

    void claim_loop();
    RunReport run_claimed(const RunConfig& config);
    void begin_run(const RunConfig& config, RunContext& ctx);
    StepResult iterate(RunContext& ctx, bool interactive_step);
    RunReport finish_run(RunContext& ctx, RunVerdict verdict, std::string reason);
    void record(RunContext& ctx, IterationRecord rec);
    void commit_artifacts(std::span<const StateEvent> events, const DataProductState& after, const std::string& author,
                          const std::string& message, std::vector<std::string>& commit_ids);
    void publish_metrics(const std::vector<MetricValue>& values);
    Suppressions current_suppressions(int iteration) const;
    bool await_approval(int iteration, const ActionProposal& proposal, Approval& approval, std::string& actor);
    std::vector<MetricValue> database_values() const;
    void ensure_views(const DataProductState& state);

    OrchestratorOptions options_;
    MetricsEngine metrics_;
    ToolRegistry registry_;
    ToolSet tools_;
    StateStore state_;
    EventBus bus_;
    std::unique_ptr<VersionStore> store_;
    std::unique_ptr<Connector> db_;

    // Guards the (state, metric values) pair so readers never see one updated
    // without the other.
    mutable std::shared_mutex view_mu_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    RunPhase phase_ = RunPhase::idle;
    bool stop_requested_ = false;
    bool loop_active_ = false;
    std::optional<std::pair<int, ActionProposal>> pending_;
    std::optional<std::pair<bool, std::string>> decision_;
    std::map<std::pair<std::string, std::string>, int> rejected_at_;
    std::vector<IterationRecord> journal_;
    int next_iteration_ = 1;
    int run_counter_ = 0;
    std::vector<double> step_history_;
    std::optional<RunReport> last_report_;
    std::thread worker_;
};

}  // namespace dpcc
