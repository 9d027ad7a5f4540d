#include "dpcc/api.hpp"

#include "dpcc/json.hpp"

#include <httplib.h>

#include <charconv>
#include <map>

namespace dpcc {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::validation:
        case ErrorCode::invalid_value:
        case ErrorCode::parse_error:
        case ErrorCode::parameter_bounds:
        case ErrorCode::dangling_reference:
        case ErrorCode::duplicate_identifier:
        case ErrorCode::unresolved_identifier:
            return 400;
        case ErrorCode::not_found:
        case ErrorCode::unknown_metric:
        case ErrorCode::unknown_question:
        case ErrorCode::unknown_iteration:
            return 404;
        case ErrorCode::conflict:
        case ErrorCode::busy:
        case ErrorCode::invalid_transition:
        case ErrorCode::no_pending_approval:
        case ErrorCode::not_connected:
            return 409;
        case ErrorCode::connection_error:
        case ErrorCode::empty_schema:
            return 502;
        default:
            return 500;
    }
}

nlohmann::json error_body(std::string_view code, std::string_view message) {
    return {{"error", {{"code", code}, {"message", message}}}};
}

RunConfig run_config_from_json(const nlohmann::json& body, const RunConfig& defaults) {
    RunConfig cfg = defaults;
    if (body.is_null()) return cfg;
    if (!body.is_object()) throw Error(ErrorCode::validation, "body must be a JSON object");
    for (const auto& [key, value] : body.items()) {
        if (key == "max_iterations") {
            if (!value.is_number_integer() || value.get<int>() < 1)
                throw Error(ErrorCode::validation, "max_iterations must be a positive integer");
            cfg.max_iterations = value.get<int>();
        } else if (key == "approval_mode") {
            if (!value.is_string()) throw Error(ErrorCode::validation, "approval_mode must be a string");
            cfg.approval_mode = approval_mode_from_string(value.get<std::string>());
        } else if (key == "seed") {
            if (!value.is_number_unsigned()) throw Error(ErrorCode::validation, "seed must be a non-negative integer");
            cfg.seed = value.get<std::uint64_t>();
        } else if (key == "contract") {
            cfg.contract = value.get<Contract>();
        } else {
            throw Error(ErrorCode::validation, "unknown field \"" + key + "\"");
        }
    }
    return cfg;
}

namespace {

using httplib::Request;
using httplib::Response;

void send_json(Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(Response& res, int status, std::string_view code, std::string_view message) {
    send_json(res, status, error_body(code, message));
}

template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const Request& req, Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), to_string(e.code()), e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, "validation", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

nlohmann::json parse_body(const Request& req) {
    if (req.body.empty()) return nullptr;
    try {
        return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::validation, std::string("request body is not JSON: ") + e.what());
    }
}

std::int64_t parse_int(std::string_view text, std::string_view what) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw Error(ErrorCode::validation, std::string(what) + " must be an integer");
    return v;
}

nlohmann::json run_status(const Orchestrator& orch) {
    nlohmann::json j = {{"phase", to_string(orch.phase())}, {"connected", orch.connected()}};
    if (auto p = orch.pending_approval()) j["pending_approval"] = *p;
    else j["pending_approval"] = nullptr;
    if (auto r = orch.last_report()) {
        j["last_run"] = {{"run_id", r->run_id},
                         {"verdict", to_string(r->verdict)},
                         {"reason", r->reason},
                         {"iterations", r->iterations.size()},
                         {"failures", r->failures}};
    } else {
        j["last_run"] = nullptr;
    }
    return j;
}

nlohmann::json gap_to_json(const GapVector& gap) {
    auto comps = nlohmann::json::array();
    for (const auto& c : gap.components)
        comps.push_back({{"metric_id", c.metric_id},
                         {"target", c.target},
                         {"comparator", to_string(c.comparator)},
                         {"value", c.value ? nlohmann::json(*c.value) : nlohmann::json(nullptr)},
                         {"normalized_gap", c.normalized_gap}});
    return {{"components", comps}, {"total", gap.total()}};
}

}  // namespace

ApiServer::ApiServer(Orchestrator& orchestrator, ApiOptions options)
    : orch_(orchestrator), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::install_routes() {
    auto& s = *server_;
    auto& orch = orch_;

    s.Post("/api/v1/datasource", guarded([this, &orch](const Request& req, Response& res) {
        const auto body = parse_body(req);
        if (!body.is_object() || !body.contains("location") || !body["location"].is_string())
            throw Error(ErrorCode::validation, "body needs a \"location\" string");
        ConnectionProfile profile;
        profile.kind = body.value("kind", std::string("sqlite"));
        profile.location = body["location"].get<std::string>();
        profile.read_only = body.value("read_only", true);
        profile.statement_timeout_ms = body.value("statement_timeout_ms", options_.statement_timeout_ms);
        std::vector<PredefinedQuestion> questions;
        if (body.contains("questions")) questions = parse_predefined_questions(body["questions"]);
        if (body.contains("questions_file")) {
            auto more = load_predefined_questions(body["questions_file"].get<std::string>());
            questions.insert(questions.end(), more.begin(), more.end());
        }
        const auto summary = orch.connect(profile, questions);
        send_json(res, 201, {{"tables", summary.tables},
                             {"table_count", summary.tables.size()},
                             {"column_count", summary.columns},
                             {"question_count", summary.questions}});
    }));

    s.Get("/api/v1/state", guarded([&orch](const Request&, Response& res) {
        auto j = state_summary_json(orch.snapshot());
        j["run"] = run_status(orch);
        send_json(res, 200, j);
    }));

    s.Get("/api/v1/metrics", guarded([&orch](const Request& req, Response& res) {
        const auto view = orch.metrics_view();
        const bool all = req.has_param("scope") && req.get_param_value("scope") == "all";
        auto values = nlohmann::json::array();
        for (const auto& v : view.values)
            if (all || v.scope.level == ScopeLevel::database) values.push_back(v);
        send_json(res, 200, {{"state_version", view.state.version()},
                             {"values", values},
                             {"contract", view.state.contract() ? nlohmann::json(*view.state.contract()) : nlohmann::json(nullptr)},
                             {"gap", view.gap ? gap_to_json(*view.gap) : nlohmann::json(nullptr)}});
    }));

    s.Get(R"(/api/v1/metrics/([^/]+)/history)", guarded([&orch](const Request& req, Response& res) {
        const std::string id = req.matches[1];
        if (!orch.metrics().has_metric(id)) throw Error(ErrorCode::not_found, "unknown metric " + id);
        const std::string scope = req.has_param("scope") ? req.get_param_value("scope") : "database";
        auto out = nlohmann::json::array();
        for (const auto& v : orch.metrics().history(id))
            if (scope == "all" || v.scope.key() == scope) out.push_back(v);
        send_json(res, 200, {{"metric_id", id}, {"scope", scope}, {"history", out}});
    }));

    s.Put("/api/v1/contract", guarded([&orch](const Request& req, Response& res) {
        const auto body = parse_body(req);
        if (body.is_null()) throw Error(ErrorCode::validation, "body must hold a contract");
        const auto contract = body.get<Contract>();
        const std::string actor = req.has_header("X-Actor") ? req.get_header_value("X-Actor") : "operator";
        orch.set_contract(contract, actor);
        send_json(res, 200, {{"contract", contract}});
    }));

    s.Post(R"(/api/v1/run/(start|pause|resume|stop|step))", guarded([this, &orch](const Request& req, Response& res) {
        const std::string action = req.matches[1];
        if (action == "start") {
            orch.start(run_config_from_json(parse_body(req), options_.run_defaults));
            send_json(res, 202, run_status(orch));
        } else if (action == "pause") {
            orch.pause();
            send_json(res, 200, run_status(orch));
        } else if (action == "resume") {
            orch.resume();
            send_json(res, 200, run_status(orch));
        } else if (action == "stop") {
            orch.stop();
            send_json(res, 200, run_status(orch));
        } else {
            const auto r = orch.step(run_config_from_json(parse_body(req), options_.run_defaults));
            nlohmann::json j = {{"verdict", r.verdict ? nlohmann::json(to_string(*r.verdict)) : nlohmann::json(nullptr)},
                                {"reason", r.reason},
                                {"record", r.record ? nlohmann::json(*r.record) : nlohmann::json(nullptr)}};
            send_json(res, 200, j);
        }
    }));

    s.Get("/api/v1/run", guarded([&orch](const Request&, Response& res) { send_json(res, 200, run_status(orch)); }));

    s.Get("/api/v1/run/journal", guarded([&orch](const Request&, Response& res) {
        send_json(res, 200, {{"records", orch.persisted_journal()}});
    }));

    s.Get("/api/v1/approvals", guarded([&orch](const Request&, Response& res) {
        auto pending = nlohmann::json::array();
        if (auto p = orch.pending_approval()) pending.push_back({{"iteration", p->iteration}, {"proposal", *p}});
        send_json(res, 200, {{"pending", pending}});
    }));

    s.Post(R"(/api/v1/approvals/([^/]+))", guarded([&orch](const Request& req, Response& res) {
        const auto iteration = parse_int(req.matches[1].str(), "iteration");
        const auto body = parse_body(req);
        if (!body.is_object() || !body.contains("decision") || !body["decision"].is_string())
            throw Error(ErrorCode::validation, "body needs \"decision\": \"approve\" or \"reject\"");
        const auto decision = body["decision"].get<std::string>();
        if (decision != "approve" && decision != "reject")
            throw Error(ErrorCode::validation, "decision must be \"approve\" or \"reject\"");
        const auto actor = body.value("actor", std::string("operator"));
        orch.resolve_approval(static_cast<int>(iteration), decision == "approve", actor);
        send_json(res, 200, {{"iteration", iteration}, {"decision", decision}, {"actor", actor}});
    }));

    s.Get("/api/v1/tools", guarded([&orch](const Request&, Response& res) {
        const auto snap = orch.snapshot();
        auto out = nlohmann::json::array();
        for (const auto& d : orch.registry().tools()) {
            nlohmann::json j = d;
            const auto failing = orch.registry().failing_preconditions(d.name, snap);
            j["applicable"] = failing.empty();
            j["failing_preconditions"] = failing;
            out.push_back(std::move(j));
        }
        send_json(res, 200, {{"tools", out}});
    }));

    s.Get("/api/v1/questions", guarded([&orch](const Request&, Response& res) {
        auto summary = state_summary_json(orch.snapshot());
        send_json(res, 200, {{"questions", summary["questions"]}});
    }));

    s.Get("/api/v1/topics", guarded([&orch](const Request&, Response& res) {
        std::map<std::string, std::vector<std::string>> topics;
        std::vector<std::string> unclustered;
        for (const auto& [id, rec] : orch.snapshot().questions()) {
            if (rec->topic) topics[*rec->topic].push_back(id);
            else unclustered.push_back(id);
        }
        auto out = nlohmann::json::array();
        for (const auto& [label, ids] : topics) out.push_back({{"label", label}, {"question_ids", ids}});
        send_json(res, 200, {{"topics", out}, {"unclustered", unclustered}});
    }));

    s.Get("/api/v1/commits", guarded([&orch](const Request&, Response& res) {
        auto out = nlohmann::json::array();
        auto* store = orch.store();
        if (store)
            for (const auto& c : store->commits()) out.push_back(c);
        send_json(res, 200, {{"commits", out}, {"verified", store ? store->verify_chain() : true}});
    }));

    s.Get("/api/v1/events", guarded([this, &orch](const Request& req, Response& res) {
        std::int64_t since = 0;
        if (req.has_param("since")) since = parse_int(req.get_param_value("since"), "since");
        else if (req.has_header("Last-Event-ID")) since = parse_int(req.get_header_value("Last-Event-ID"), "Last-Event-ID");
        res.set_header("Cache-Control", "no-cache");
        const auto heartbeat = options_.heartbeat;
        auto last_beat = std::chrono::steady_clock::now();
        res.set_chunked_content_provider(
            "text/event-stream",
            [this, &orch, cursor = since, heartbeat, last_beat](std::size_t, httplib::DataSink& sink) mutable {
                if (stopping_) {
                    sink.done();
                    return true;
                }
                const auto batch = orch.events().since(cursor, 500);
                for (const auto& e : batch) {
                    const std::string frame = "id: " + std::to_string(e.sequence) + "\nevent: " +
                                              std::string(to_string(e.kind)) + "\ndata: " + nlohmann::json(e).dump() + "\n\n";
                    if (!sink.write(frame.data(), frame.size())) return false;
                    cursor = e.sequence;
                    last_beat = std::chrono::steady_clock::now();
                }
                if (batch.empty()) {
                    const auto slice = std::min(heartbeat, std::chrono::milliseconds(200));
                    orch.events().wait(cursor, slice);
                    if (std::chrono::steady_clock::now() - last_beat >= heartbeat) {
                        static constexpr std::string_view beat = ": heartbeat\n\n";
                        if (!sink.write(beat.data(), beat.size())) return false;
                        last_beat = std::chrono::steady_clock::now();
                    }
                }
                return true;
            });
    }));

    s.set_error_handler([](const Request&, Response& res) {
        if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not_found" : "http_error", "no such route");
    });
}

int ApiServer::start(const std::string& host, int port) {
    stopping_ = false;
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::io_error, "cannot listen on " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void ApiServer::serve(const std::string& host, int port) {
    stopping_ = false;
    if (!server_->bind_to_port(host, port)) throw Error(ErrorCode::io_error, "cannot listen on " + host + ":" + std::to_string(port));
    server_->listen_after_bind();
}

void ApiServer::stop() {
    stopping_ = true;
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace dpcc
