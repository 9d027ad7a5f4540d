#include "dpcc/orchestrator.hpp"

#include "dpcc/error.hpp"
#include "dpcc/json.hpp"
#include "dpcc/sql_analyzer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dpcc {

std::string_view to_string(ApprovalMode m) { return m == ApprovalMode::automatic ? "auto" : "gated"; }

std::string_view to_string(Approval a) {
    switch (a) {
        case Approval::automatic: return "auto";
        case Approval::approved_by_human: return "approved_by_human";
        case Approval::rejected_by_human: return "rejected_by_human";
    }
    return "?";
}

std::string_view to_string(RunPhase p) {
    switch (p) {
        case RunPhase::idle: return "idle";
        case RunPhase::running: return "running";
        case RunPhase::paused: return "paused";
        case RunPhase::waiting_approval: return "waiting_approval";
        case RunPhase::terminated: return "terminated";
    }
    return "?";
}

std::string_view to_string(RunVerdict v) {
    switch (v) {
        case RunVerdict::converged: return "Converged";
        case RunVerdict::manual_review: return "ManualReviewRecommended";
        case RunVerdict::budget_exhausted: return "BudgetExhausted";
        case RunVerdict::stopped: return "Stopped";
        case RunVerdict::error: return "Error";
    }
    return "?";
}

ApprovalMode approval_mode_from_string(std::string_view s) {
    if (s == "auto") return ApprovalMode::automatic;
    if (s == "gated") return ApprovalMode::gated;
    throw Error(ErrorCode::validation, "approval_mode must be \"auto\" or \"gated\"");
}

void to_json(nlohmann::json& j, const IterationRecord& r) {
    j = {{"iteration", r.iteration},
         {"run_id", r.run_id},
         {"proposal", r.proposal},
         {"approval", to_string(r.approval)},
         {"actor", r.actor},
         {"status", r.status},
         {"result_summary", r.result_summary},
         {"metrics_after", r.metrics_after},
         {"total_gap_after", r.total_gap_after},
         {"commit_ids", r.commit_ids},
         {"first_event_id", r.first_event_id},
         {"last_event_id", r.last_event_id}};
}

namespace {

nlohmann::json gap_json(const GapVector& gap) {
    auto comps = nlohmann::json::array();
    for (const auto& c : gap.components) {
        comps.push_back({{"metric_id", c.metric_id},
                         {"target", c.target},
                         {"comparator", to_string(c.comparator)},
                         {"value", c.value ? nlohmann::json(*c.value) : nlohmann::json(nullptr)},
                         {"normalized_gap", c.normalized_gap}});
    }
    return {{"components", comps}, {"total", gap.total()}};
}

}  // namespace

void to_json(nlohmann::json& j, const RunReport& r) {
    j = {{"run_id", r.run_id},
         {"verdict", to_string(r.verdict)},
         {"reason", r.reason},
         {"iterations", r.iterations},
         {"iteration_count", r.iterations.size()},
         {"failures", r.failures},
         {"final_gap", gap_json(r.final_gap)},
         {"final_metrics", r.final_metrics}};
}

std::vector<PredefinedQuestion> parse_predefined_questions(const nlohmann::json& doc) {
    if (!doc.is_array()) throw Error(ErrorCode::validation, "questions file must hold a JSON array");
    std::vector<PredefinedQuestion> out;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("text") || !item["text"].is_string() ||
            item["text"].get<std::string>().empty())
            throw Error(ErrorCode::validation, "each question needs a non-empty \"text\"");
        PredefinedQuestion q;
        q.text = item["text"].get<std::string>();
        if (item.contains("targets")) {
            if (!item["targets"].is_array()) throw Error(ErrorCode::validation, "\"targets\" must be an array");
            for (const auto& t : item["targets"]) {
                if (!t.is_object() || !t.contains("table") || !t["table"].is_string())
                    throw Error(ErrorCode::validation, "each target needs a \"table\"");
                SchemaTarget target{t["table"].get<std::string>(), std::nullopt};
                if (t.contains("column") && !t["column"].is_null()) {
                    if (!t["column"].is_string()) throw Error(ErrorCode::validation, "target \"column\" must be a string");
                    target.column = t["column"].get<std::string>();
                }
                q.targets.insert(std::move(target));
            }
        }
        if (item.contains("sql") && !item["sql"].is_null()) {
            if (!item["sql"].is_string()) throw Error(ErrorCode::validation, "\"sql\" must be a string");
            q.sql = item["sql"].get<std::string>();
        }
        if (q.targets.empty() && !q.sql)
            throw Error(ErrorCode::validation, "question \"" + q.text + "\" needs targets or SQL");
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<PredefinedQuestion> load_predefined_questions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot read questions file " + path.string());
    try {
        return parse_predefined_questions(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::validation, std::string("malformed questions file: ") + e.what());
    }
}

std::vector<TableMeta> dependency_order(std::vector<TableMeta> tables) {
    std::set<TableId> names;
    for (const auto& t : tables) names.insert(t.table_id);
    for (auto& t : tables) {
        std::erase_if(t.foreign_keys, [&](const ForeignKey& fk) { return !names.count(fk.remote_table); });
    }
    std::sort(tables.begin(), tables.end(), [](const TableMeta& a, const TableMeta& b) { return a.table_id < b.table_id; });

    std::vector<TableMeta> out;
    std::set<TableId> placed;
    while (out.size() < tables.size()) {
        bool progress = false;
        for (const auto& t : tables) {
            if (placed.count(t.table_id)) continue;
            bool ready = true;
            for (const auto& fk : t.foreign_keys)
                if (fk.remote_table != t.table_id && !placed.count(fk.remote_table)) ready = false;
            if (!ready) continue;
            out.push_back(t);
            placed.insert(t.table_id);
            progress = true;
            break;
        }
        if (!progress) throw Error(ErrorCode::validation, "foreign keys form a cycle; cannot order tables");
    }
    return out;
}

Orchestrator::Orchestrator(OrchestratorOptions options)
    : options_(std::move(options)), metrics_(options_.wall_clock), registry_(metrics_) {
    for (auto& def : builtin_metrics(options_.complexity)) metrics_.register_metric(std::move(def));
    for (auto& desc : baseline_tool_descriptors()) registry_.register_tool(std::move(desc));
    tools_ = make_baseline_tools();
    if (options_.store_dir) {
        store_ = std::make_unique<VersionStore>(*options_.store_dir, options_.wall_clock);
        for (const auto& rec : store_->journal()) {
            next_iteration_ = std::max(next_iteration_, rec.value("iteration", 0) + 1);
            const auto run = rec.value("run_id", std::string());
            if (run.rfind("run-", 0) == 0) run_counter_ = std::max(run_counter_, std::atoi(run.c_str() + 4));
        }
    }
}

Orchestrator::~Orchestrator() {
    {
        std::lock_guard lock(mu_);
        stop_requested_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

void Orchestrator::install_tool(std::unique_ptr<Tool> tool) {
    std::lock_guard lock(mu_);
    if (loop_active_) throw Error(ErrorCode::conflict, "cannot change tools during a run");
    if (!registry_.find(tool->name())) throw Error(ErrorCode::not_found, "no descriptor for tool " + std::string(tool->name()));
    tools_[std::string(tool->name())] = std::move(tool);
}

void Orchestrator::register_tool(ToolDescriptor descriptor, std::unique_ptr<Tool> tool) {
    std::lock_guard lock(mu_);
    if (loop_active_) throw Error(ErrorCode::conflict, "cannot change tools during a run");
    if (descriptor.name != tool->name()) throw Error(ErrorCode::validation, "descriptor and tool names differ");
    registry_.register_tool(std::move(descriptor));
    tools_[std::string(tool->name())] = std::move(tool);
}

void Orchestrator::register_metric(MetricDefinition def) {
    std::unique_lock view(view_mu_);
    std::lock_guard lock(mu_);
    if (loop_active_) throw Error(ErrorCode::conflict, "cannot change metrics during a run");
    const std::string id = def.metric_id;
    metrics_.register_metric(std::move(def));
    if (!db_) return;
    const auto s = state_.snapshot();
    std::vector<MetricTarget> targets;
    for (auto& t : metrics_.all_targets(s))
        if (t.metric_id == id) targets.push_back(std::move(t));
    metrics_.recalculate(s, targets, next_iteration_ - 1);
}

ConnectSummary Orchestrator::connect(const ConnectionProfile& profile, const std::vector<PredefinedQuestion>& questions) {
    {
        std::lock_guard lock(mu_);
        if (loop_active_) throw Error(ErrorCode::conflict, "cannot connect a data source during a run");
    }
    auto db = dpcc::connect(profile, options_.exec_clock);
    auto tables = dependency_order(db->introspect());

    DataProductState s;
    std::vector<StateEvent> events;
    ConnectSummary summary;
    for (auto& t : tables) {
        summary.tables.push_back(t.table_id);
        summary.columns += t.columns.size();
        events.push_back(table_added(std::move(t)));
    }
    s = s.apply_all(events);

    std::vector<StateEvent> question_events;
    std::size_t offset = 0;
    for (const auto& pq : questions) {
        const auto qid = next_question_id(s, offset++);
        question_events.push_back(question_added({qid, pq.text, QuestionOrigin::predefined, std::nullopt, pq.targets}));
        if (!pq.sql) continue;
        QueryAnalysis analysis;
        try {
            analysis = analyze(*pq.sql, SchemaCatalog::from_state(s));
        } catch (const Error& e) {
            throw Error(ErrorCode::validation, "predefined SQL for \"" + pq.text + "\" is not usable: " + e.what());
        }
        const auto outcome = db->execute_timed(*pq.sql);
        if (outcome.error) throw Error(ErrorCode::validation, "predefined SQL for \"" + pq.text + "\" fails: " + *outcome.error);
        question_events.push_back(
            query_version_added({qid, 1, *pq.sql, "predefined", analysis, outcome.elapsed_ms, outcome.timed_out}));
        question_events.push_back(answer_recorded({qid, 1, outcome.rows_digest, 1.0}));
    }
    const auto after = s.apply_all(question_events);
    summary.questions = questions.size();

    std::vector<MetricValue> values;
    {
        std::unique_lock view(view_mu_);
        std::lock_guard lock(mu_);
        if (loop_active_) throw Error(ErrorCode::conflict, "cannot connect a data source during a run");
        state_.reset(after);
        metrics_.clear_values();
        values = metrics_.recalculate_all(after, 0);
        db_ = std::move(db);
        step_history_.clear();
        rejected_at_.clear();
        if (phase_ == RunPhase::terminated) phase_ = RunPhase::idle;
    }
    publish_metrics(values);
    std::vector<std::string> commit_ids;
    commit_artifacts(question_events, after, "datasource", "connect " + profile.location, commit_ids);
    return summary;
}

bool Orchestrator::connected() const {
    std::lock_guard lock(mu_);
    return db_ != nullptr;
}

void Orchestrator::set_contract(const Contract& contract, const std::string& actor) {
    metrics_.validate_contract(contract);
    DataProductState after;
    StateEvent event = contract_changed(contract);
    {
        std::unique_lock view(view_mu_);
        {
            std::lock_guard lock(mu_);
            if (!db_) throw Error(ErrorCode::not_connected, "connect a data source first");
        }
        after = state_.apply(event);
        step_history_.clear();
    }
    std::vector<std::string> ids;
    const StateEvent applied = *after.events().back();
    commit_artifacts(std::span<const StateEvent>(&applied, 1), after, actor, "contract updated by " + actor, ids);
}

void Orchestrator::publish_metrics(const std::vector<MetricValue>& values) {
    for (const auto& v : values) bus_.publish(ApiEventKind::MetricUpdated, v);
}

void Orchestrator::commit_artifacts(std::span<const StateEvent> events, const DataProductState& after,
                                    const std::string& author, const std::string& message,
                                    std::vector<std::string>& commit_ids) {
    if (!store_) return;
    auto artifacts = artifacts_for(events, after);
    if (artifacts.empty()) return;
    const auto id = store_->commit(artifacts, author, message);
    commit_ids.push_back(id);
    nlohmann::json names = nlohmann::json::array();
    for (const auto& a : artifacts) names.push_back(a.name);
    bus_.publish(ApiEventKind::CommitCreated, {{"commit_id", id}, {"author", author}, {"message", message}, {"artifacts", names}});
}

std::vector<MetricValue> Orchestrator::database_values() const {
    std::vector<MetricValue> out;
    for (auto& v : metrics_.latest_values())
        if (v.scope.level == ScopeLevel::database) out.push_back(std::move(v));
    return out;
}

Suppressions Orchestrator::current_suppressions(int iteration) const {
    std::lock_guard lock(mu_);
    Suppressions out;
    for (const auto& [key, at] : rejected_at_)
        if (iteration - at <= options_.suppression_window) out.insert(key);
    return out;
}

bool Orchestrator::await_approval(int iteration, const ActionProposal& proposal, Approval& approval, std::string& actor) {
    std::unique_lock lock(mu_);
    pending_ = std::make_pair(iteration, proposal);
    decision_.reset();
    phase_ = RunPhase::waiting_approval;
    bus_.publish(ApiEventKind::ProposalPending, proposal);
    cv_.wait(lock, [&] { return decision_.has_value() || stop_requested_; });
    pending_.reset();
    phase_ = RunPhase::running;
    if (!decision_) return false;
    approval = decision_->first ? Approval::approved_by_human : Approval::rejected_by_human;
    actor = decision_->second;
    decision_.reset();
    return true;
}

void Orchestrator::ensure_views(const DataProductState& state) {
    for (const auto& [id, v] : state.views())
        if (!db_->has_view(v->name)) db_->create_view(*v);
}

void Orchestrator::record(RunContext& ctx, IterationRecord rec) {
    rec.run_id = ctx.run_id;
    ++ctx.iterations;
    {
        std::lock_guard lock(mu_);
        journal_.push_back(rec);
    }
    const nlohmann::json j = rec;
    if (store_) store_->append_journal(j);
    bus_.publish(ApiEventKind::IterationCompleted, j);
}

StepResult Orchestrator::iterate(RunContext& ctx, bool interactive_step) {
    const auto s = state_.snapshot();
    if (!s.contract()) throw Error(ErrorCode::validation, "no contract set");
    const Contract contract = *s.contract();
    const auto gap = metrics_.gap(contract);
    if (ctx.history.empty()) ctx.history.push_back(gap.total());

    int iteration;
    {
        std::lock_guard lock(mu_);
        iteration = next_iteration_;
    }
    const auto verdict =
        plan(s, gap, ctx.history, registry_, iteration, current_suppressions(iteration), options_.planner);
    if (verdict.kind == VerdictKind::converged) return {RunVerdict::converged, verdict.reason, std::nullopt};
    if (verdict.kind == VerdictKind::manual_review) return {RunVerdict::manual_review, verdict.reason, std::nullopt};

    const ActionProposal proposal = *verdict.proposal;
    {
        std::lock_guard lock(mu_);
        ++next_iteration_;
    }
    IterationRecord rec;
    rec.iteration = iteration;
    rec.run_id = ctx.run_id;
    rec.proposal = proposal;
    rec.actor = "planner";

    if (ctx.config.approval_mode == ApprovalMode::gated) {
        if (interactive_step) {
            // An operator-issued step is itself the approval.
            rec.approval = Approval::approved_by_human;
            rec.actor = "operator";
        } else if (!await_approval(iteration, proposal, rec.approval, rec.actor)) {
            std::lock_guard lock(mu_);
            --next_iteration_;
            return {RunVerdict::stopped, "stopped while awaiting approval", std::nullopt};
        }
        if (rec.approval == Approval::rejected_by_human) {
            {
                std::lock_guard lock(mu_);
                rejected_at_[{proposal.tool_name, proposal.target_scope.key()}] = iteration;
            }
            rec.status = "rejected";
            rec.result_summary = "proposal rejected by " + rec.actor;
            rec.metrics_after = database_values();
            rec.total_gap_after = gap.total();
            record(ctx, rec);
            return {std::nullopt, {}, rec};
        }
    }

    auto fail = [&](const std::string& why) -> StepResult {
        ++ctx.failures;
        rec.status = "failed";
        rec.result_summary = why;
        rec.metrics_after = database_values();
        rec.total_gap_after = gap.total();
        ctx.history.push_back(gap.total());
        record(ctx, rec);
        return {std::nullopt, {}, rec};
    };

    const auto* desc = registry_.find(proposal.tool_name);
    auto tool = tools_.find(proposal.tool_name);
    if (!desc || tool == tools_.end()) return fail("no implementation for tool " + proposal.tool_name);

    ToolResult result;
    try {
        desc->validate_params(proposal.parameters);
        ToolInvocation inv{proposal.tool_name, proposal.target_scope, proposal.parameters,
                           ctx.config.seed * 1000003ULL + static_cast<std::uint64_t>(iteration), iteration};
        result = tool->second->run(inv, s, *db_);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::connection_error) throw;
        return fail(std::string(to_string(e.code())) + ": " + e.what());
    } catch (const std::exception& e) {
        return fail(e.what());
    }

    std::vector<MetricValue> values;
    DataProductState before, after;
    try {
        std::unique_lock view(view_mu_);
        before = state_.snapshot();
        std::set<MetricTarget> targets;
        DataProductState cur = before;
        for (const auto& e : result.events) {
            for (auto& t : metrics_.resolve_contexts(cur, e)) targets.insert(std::move(t));
            cur = cur.apply(e);
        }
        after = cur;
        for (const auto& e : result.events)
            if (e.kind == EventKind::ViewAdded) ensure_views(after);
        state_.reset(after);
        values = metrics_.recalculate(after, {targets.begin(), targets.end()}, iteration);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::connection_error) throw;
        return fail(std::string("could not apply results: ") + e.what());
    }
    publish_metrics(values);

    std::vector<StateEvent> stored;
    for (auto i = before.events().size(); i < after.events().size(); ++i) stored.push_back(*after.events()[i]);
    commit_artifacts(stored, after, proposal.tool_name,
                     "iteration " + std::to_string(iteration) + ": " + proposal.tool_name + " - " + result.log,
                     rec.commit_ids);

    const auto gap_after = metrics_.gap(*after.contract());
    ctx.history.push_back(gap_after.total());
    rec.status = "applied";
    rec.result_summary = result.log;
    rec.metrics_after = database_values();
    rec.total_gap_after = gap_after.total();
    if (after.version() > before.version()) {
        rec.first_event_id = before.version() + 1;
        rec.last_event_id = after.version();
    }
    record(ctx, rec);
    return {std::nullopt, {}, rec};
}

void Orchestrator::begin_run(const RunConfig& config, RunContext& ctx) {
    if (config.max_iterations < 1) throw Error(ErrorCode::validation, "max_iterations must be at least 1");
    if (!connected()) throw Error(ErrorCode::not_connected, "connect a data source first");
    if (config.contract) set_contract(*config.contract, "run-config");
    if (!state_.snapshot().contract()) throw Error(ErrorCode::validation, "no contract set");
    ctx.config = config;
    std::lock_guard lock(mu_);
    ctx.run_id = "run-" + std::to_string(++run_counter_);
    rejected_at_.clear();
}

RunReport Orchestrator::finish_run(RunContext& ctx, RunVerdict verdict, std::string reason) {
    RunReport report;
    report.run_id = ctx.run_id;
    report.verdict = verdict;
    report.reason = std::move(reason);
    report.failures = ctx.failures;
    {
        std::lock_guard lock(mu_);
        for (const auto& r : journal_)
            if (r.run_id == ctx.run_id) report.iterations.push_back(r);
    }
    const auto s = state_.snapshot();
    if (s.contract()) {
        try {
            report.final_gap = metrics_.gap(*s.contract());
        } catch (const Error&) {
        }
    }
    report.final_metrics = database_values();
    {
        std::lock_guard lock(mu_);
        phase_ = RunPhase::terminated;
        loop_active_ = false;
        pending_.reset();
        last_report_ = report;
    }
    cv_.notify_all();
    bus_.publish(ApiEventKind::RunTerminated, {{"run_id", report.run_id},
                                                {"verdict", to_string(verdict)},
                                                {"reason", report.reason},
                                                {"iterations", report.iterations.size()}});
    return report;
}

void Orchestrator::claim_loop() {
    std::lock_guard lock(mu_);
    if (loop_active_) throw Error(ErrorCode::invalid_transition, "a run is already active");
    loop_active_ = true;
    stop_requested_ = false;
    phase_ = RunPhase::running;
}

RunReport Orchestrator::run_loop(const RunConfig& config) {
    claim_loop();
    return run_claimed(config);
}

RunReport Orchestrator::run_claimed(const RunConfig& config) {
    RunContext ctx;
    RunVerdict verdict = RunVerdict::stopped;
    std::string reason;
    try {
        begin_run(config, ctx);
        for (;;) {
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return phase_ != RunPhase::paused || stop_requested_; });
                if (stop_requested_) {
                    verdict = RunVerdict::stopped;
                    reason = "stopped by operator";
                    break;
                }
            }
            if (ctx.iterations >= ctx.config.max_iterations) {
                const auto s = state_.snapshot();
                if (metrics_.gap(*s.contract()).total() == 0.0) {
                    verdict = RunVerdict::converged;
                    reason = "all contract targets met";
                } else {
                    verdict = RunVerdict::budget_exhausted;
                    reason = "reached max_iterations = " + std::to_string(ctx.config.max_iterations);
                }
                break;
            }
            auto r = iterate(ctx, false);
            if (r.verdict) {
                verdict = *r.verdict;
                reason = r.reason;
                break;
            }
        }
    } catch (const std::exception& e) {
        verdict = RunVerdict::error;
        reason = e.what();
    }
    return finish_run(ctx, verdict, reason);
}

void Orchestrator::start(const RunConfig& config) {
    {
        std::lock_guard lock(mu_);
        if (loop_active_) throw Error(ErrorCode::invalid_transition, "a run is already active");
        if (!db_) throw Error(ErrorCode::not_connected, "connect a data source first");
    }
    if (worker_.joinable()) worker_.join();
    claim_loop();
    worker_ = std::thread([this, config] { run_claimed(config); });
}

void Orchestrator::pause() {
    std::lock_guard lock(mu_);
    if (phase_ != RunPhase::running) throw Error(ErrorCode::invalid_transition, "pause requires a running loop");
    phase_ = RunPhase::paused;
}

void Orchestrator::resume() {
    {
        std::lock_guard lock(mu_);
        if (phase_ != RunPhase::paused) throw Error(ErrorCode::invalid_transition, "resume requires a paused loop");
        phase_ = RunPhase::running;
    }
    cv_.notify_all();
}

void Orchestrator::stop() {
    {
        std::lock_guard lock(mu_);
        if (!loop_active_ && phase_ != RunPhase::running && phase_ != RunPhase::paused &&
            phase_ != RunPhase::waiting_approval)
            throw Error(ErrorCode::invalid_transition, "no run to stop");
        stop_requested_ = true;
    }
    cv_.notify_all();
}

std::optional<RunReport> Orchestrator::wait() {
    if (worker_.joinable()) worker_.join();
    std::lock_guard lock(mu_);
    return last_report_;
}

StepResult Orchestrator::step(const RunConfig& config) {
    {
        std::lock_guard lock(mu_);
        if (loop_active_) throw Error(ErrorCode::busy, "a run is active");
        loop_active_ = true;
    }
    struct Release {
        Orchestrator* o;
        ~Release() {
            std::lock_guard lock(o->mu_);
            o->loop_active_ = false;
        }
    } release{this};

    RunContext ctx;
    ctx.config = config;
    ctx.run_id = "step";
    if (!connected()) throw Error(ErrorCode::not_connected, "connect a data source first");
    if (config.contract) set_contract(*config.contract, "run-config");
    ctx.history = step_history_;
    auto r = iterate(ctx, true);
    step_history_ = ctx.history;
    return r;
}

void Orchestrator::resolve_approval(int iteration, bool approve, const std::string& actor) {
    {
        std::lock_guard lock(mu_);
        if (!pending_ || pending_->first != iteration || decision_) {
            if (iteration >= 1 && iteration < next_iteration_)
                throw Error(ErrorCode::no_pending_approval, "iteration " + std::to_string(iteration) + " is not awaiting approval");
            throw Error(ErrorCode::unknown_iteration, "unknown iteration " + std::to_string(iteration));
        }
        decision_ = std::make_pair(approve, actor.empty() ? std::string("operator") : actor);
        pending_.reset();
    }
    cv_.notify_all();
}

std::optional<ActionProposal> Orchestrator::pending_approval() const {
    std::lock_guard lock(mu_);
    if (!pending_) return std::nullopt;
    return pending_->second;
}

DataProductState Orchestrator::snapshot() const {
    std::shared_lock view(view_mu_);
    return state_.snapshot();
}

RunPhase Orchestrator::phase() const {
    std::lock_guard lock(mu_);
    return phase_;
}

std::vector<IterationRecord> Orchestrator::journal() const {
    std::lock_guard lock(mu_);
    return journal_;
}

std::vector<nlohmann::json> Orchestrator::persisted_journal() const {
    if (store_) return store_->journal();
    std::vector<nlohmann::json> out;
    for (const auto& r : journal()) out.push_back(r);
    return out;
}

std::optional<RunReport> Orchestrator::last_report() const {
    std::lock_guard lock(mu_);
    return last_report_;
}

Orchestrator::MetricsView Orchestrator::metrics_view() const {
    std::shared_lock view(view_mu_);
    MetricsView out;
    out.state = state_.snapshot();
    out.values = metrics_.latest_values();
    if (out.state.contract()) {
        try {
            out.gap = metrics_.gap(*out.state.contract());
        } catch (const Error&) {
        }
    }
    return out;
}

}  // namespace dpcc
