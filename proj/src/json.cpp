#include "dpcc/json.hpp"

#include "dpcc/error.hpp"

namespace dpcc {

void to_json(json& j, const ColumnMeta& v) {
    j = json{{"name", v.name}, {"data_kind", to_string(v.data_kind)}, {"nullable", v.nullable}};
}

void from_json(const json& j, ColumnMeta& v) {
    v.name = j.at("name").get<std::string>();
    v.data_kind = data_kind_from_string(j.at("data_kind").get<std::string>());
    v.nullable = j.value("nullable", true);
}

void to_json(json& j, const ForeignKey& v) {
    j = json{{"local_column", v.local_column}, {"remote_table", v.remote_table}, {"remote_column", v.remote_column}};
}

void from_json(const json& j, ForeignKey& v) {
    v.local_column = j.at("local_column").get<std::string>();
    v.remote_table = j.at("remote_table").get<std::string>();
    v.remote_column = j.at("remote_column").get<std::string>();
}

void to_json(json& j, const TableMeta& v) {
    j = json{{"table_id", v.table_id},
             {"name", v.name},
             {"columns", v.columns},
             {"row_count_estimate", v.row_count_estimate},
             {"foreign_keys", v.foreign_keys}};
}

void from_json(const json& j, TableMeta& v) {
    v.table_id = j.at("table_id").get<std::string>();
    v.name = j.value("name", v.table_id);
    v.columns = j.at("columns").get<std::vector<ColumnMeta>>();
    v.row_count_estimate = j.value("row_count_estimate", std::int64_t{0});
    v.foreign_keys = j.value("foreign_keys", std::vector<ForeignKey>{});
}

void to_json(json& j, const ColumnRef& v) { j = json{{"table", v.table}, {"column", v.column}}; }

void from_json(const json& j, ColumnRef& v) {
    v.table = j.at("table").get<std::string>();
    v.column = j.at("column").get<std::string>();
}

void to_json(json& j, const SchemaTarget& v) {
    j = json{{"table", v.table}, {"column", v.column ? json(*v.column) : json(nullptr)}};
}

void from_json(const json& j, SchemaTarget& v) {
    v.table = j.at("table").get<std::string>();
    if (j.contains("column") && !j.at("column").is_null()) {
        v.column = j.at("column").get<std::string>();
    } else {
        v.column.reset();
    }
}

void to_json(json& j, const Question& v) {
    j = json{{"question_id", v.question_id},
             {"text", v.text},
             {"origin", to_string(v.origin)},
             {"parent_question", v.parent_question ? json(*v.parent_question) : json(nullptr)},
             {"schema_targets", v.schema_targets}};
}

void from_json(const json& j, Question& v) {
    v.question_id = j.at("question_id").get<std::string>();
    v.text = j.at("text").get<std::string>();
    v.origin = question_origin_from_string(j.value("origin", std::string("predefined")));
    if (j.contains("parent_question") && !j.at("parent_question").is_null()) {
        v.parent_question = j.at("parent_question").get<std::string>();
    } else {
        v.parent_question.reset();
    }
    v.schema_targets = j.value("schema_targets", std::set<SchemaTarget>{});
}

void to_json(json& j, const QueryAnalysis& v) {
    j = json{{"referenced_tables", v.referenced_tables},
             {"referenced_columns", v.referenced_columns},
             {"token_count", v.token_count},
             {"join_count", v.join_count},
             {"subquery_depth", v.subquery_depth},
             {"aggregate_count", v.aggregate_count},
             {"has_group_by", v.has_group_by},
             {"has_having", v.has_having},
             {"set_op_count", v.set_op_count},
             {"join_pattern_key", v.join_pattern_key}};
}

void from_json(const json& j, QueryAnalysis& v) {
    v.referenced_tables = j.at("referenced_tables").get<std::set<TableId>>();
    v.referenced_columns = j.at("referenced_columns").get<std::set<ColumnRef>>();
    v.token_count = j.at("token_count").get<int>();
    v.join_count = j.at("join_count").get<int>();
    v.subquery_depth = j.at("subquery_depth").get<int>();
    v.aggregate_count = j.at("aggregate_count").get<int>();
    v.has_group_by = j.at("has_group_by").get<bool>();
    v.has_having = j.at("has_having").get<bool>();
    v.set_op_count = j.at("set_op_count").get<int>();
    v.join_pattern_key = j.at("join_pattern_key").get<std::string>();
}

void to_json(json& j, const QueryVersion& v) {
    j = json{{"question_id", v.question_id},
             {"version_no", v.version_no},
             {"sql_text", v.sql_text},
             {"created_by", v.created_by},
             {"analysis", v.analysis},
             {"exec_ms", v.exec_ms ? json(*v.exec_ms) : json(nullptr)},
             {"timed_out", v.timed_out}};
}

void from_json(const json& j, QueryVersion& v) {
    v.question_id = j.at("question_id").get<std::string>();
    v.version_no = j.at("version_no").get<int>();
    v.sql_text = j.at("sql_text").get<std::string>();
    v.created_by = j.value("created_by", std::string());
    v.analysis = j.at("analysis").get<QueryAnalysis>();
    if (j.contains("exec_ms") && !j.at("exec_ms").is_null()) {
        v.exec_ms = j.at("exec_ms").get<double>();
    } else {
        v.exec_ms.reset();
    }
    v.timed_out = j.value("timed_out", false);
}

void to_json(json& j, const AnswerVersion& v) {
    j = json{{"question_id", v.question_id},
             {"version_no", v.version_no},
             {"payload_digest", v.payload_digest},
             {"confidence", v.confidence}};
}

void from_json(const json& j, AnswerVersion& v) {
    v.question_id = j.at("question_id").get<std::string>();
    v.version_no = j.at("version_no").get<int>();
    v.payload_digest = j.at("payload_digest").get<std::string>();
    v.confidence = j.at("confidence").get<double>();
}

void to_json(json& j, const ViewDef& v) {
    j = json{{"view_id", v.view_id},
             {"name", v.name},
             {"sql_text", v.sql_text},
             {"covers_pattern", v.covers_pattern},
             {"created_at_iteration", v.created_at_iteration}};
}

void from_json(const json& j, ViewDef& v) {
    v.view_id = j.at("view_id").get<std::string>();
    v.name = j.at("name").get<std::string>();
    v.sql_text = j.at("sql_text").get<std::string>();
    v.covers_pattern = j.value("covers_pattern", std::string());
    v.created_at_iteration = j.value("created_at_iteration", 0);
}

void to_json(json& j, const TopicAssignment& v) {
    j = json{{"question_id", v.question_id}, {"topic_label", v.topic_label}};
}

void from_json(const json& j, TopicAssignment& v) {
    v.question_id = j.at("question_id").get<std::string>();
    v.topic_label = j.at("topic_label").get<std::string>();
}

void to_json(json& j, const ContractEntry& v) {
    j = json{{"metric_id", v.metric_id}, {"target", v.target}, {"comparator", to_string(v.comparator)}};
}

void from_json(const json& j, ContractEntry& v) {
    v.metric_id = j.at("metric_id").get<std::string>();
    if (!j.at("target").is_number()) throw Error(ErrorCode::validation, "contract target must be a number");
    v.target = j.at("target").get<double>();
    v.comparator = comparator_from_string(j.value("comparator", std::string(">=")));
}

void to_json(json& j, const Contract& v) { j = json{{"entries", v.entries}}; }

void from_json(const json& j, Contract& v) {
    const json& entries = j.is_array() ? j : j.at("entries");
    v.entries = entries.get<std::vector<ContractEntry>>();
}

void to_json(json& j, const ContextScope& v) { j = json{{"level", to_string(v.level)}, {"ids", v.ids}}; }

void from_json(const json& j, ContextScope& v) {
    v.level = scope_level_from_string(j.at("level").get<std::string>());
    v.ids = j.value("ids", std::vector<std::string>{});
}

void to_json(json& j, const StateEvent& v) {
    json payload;
    std::visit([&](const auto& p) { payload = p; }, v.payload);
    j = json{{"event_id", v.event_id}, {"kind", to_string(v.kind)}, {"scope", v.scope}, {"payload", payload}};
}

void from_json(const json& j, StateEvent& v) {
    v.event_id = j.value("event_id", std::int64_t{0});
    v.kind = event_kind_from_string(j.at("kind").get<std::string>());
    v.scope = j.value("scope", ContextScope{});
    const json& p = j.at("payload");
    switch (v.kind) {
        case EventKind::TableAdded: v.payload = p.get<TableMeta>(); break;
        case EventKind::QuestionAdded: v.payload = p.get<Question>(); break;
        case EventKind::QueryVersionAdded: v.payload = p.get<QueryVersion>(); break;
        case EventKind::AnswerRecorded: v.payload = p.get<AnswerVersion>(); break;
        case EventKind::ViewAdded: v.payload = p.get<ViewDef>(); break;
        case EventKind::TopicAssigned: v.payload = p.get<TopicAssignment>(); break;
        case EventKind::ContractChanged: v.payload = p.get<Contract>(); break;
    }
}

json state_summary_json(const DataProductState& state) {
    json tables = json::array();
    for (const auto& [id, t] : state.tables()) tables.push_back(*t);
    json questions = json::array();
    for (const auto& [id, rec] : state.questions()) {
        json q = rec->question;
        q["queries"] = rec->queries;
        q["answers"] = rec->answers;
        q["topic"] = rec->topic ? json(*rec->topic) : json(nullptr);
        questions.push_back(std::move(q));
    }
    json views = json::array();
    for (const auto& [id, v] : state.views()) views.push_back(*v);
    return json{{"version", state.version()},
                {"tables", std::move(tables)},
                {"questions", std::move(questions)},
                {"views", std::move(views)},
                {"contract", state.contract() ? json(*state.contract()) : json(nullptr)},
                {"event_count", state.events().size()}};
}

std::string export_state(const DataProductState& state) {
    json events = json::array();
    for (const auto& e : state.events()) events.push_back(*e);
    json doc{{"format", "dpcc-state"},
             {"schema_version", kStateSchemaVersion},
             {"version", state.version()},
             {"events", std::move(events)}};
    return doc.dump(2) + "\n";
}

DataProductState import_state(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("state document: ") + e.what());
    }
    if (doc.value("format", std::string()) != "dpcc-state") {
        throw Error(ErrorCode::validation, "state document: unexpected format");
    }
    if (doc.value("schema_version", 0) != kStateSchemaVersion) {
        throw Error(ErrorCode::validation, "state document: unsupported schema_version");
    }
    auto events = doc.at("events").get<std::vector<StateEvent>>();
    auto state = DataProductState::replay(events);
    if (state.version() != doc.at("version").get<std::int64_t>()) {
        throw Error(ErrorCode::validation, "state document: version does not match event count");
    }
    return state;
}

}  // namespace dpcc
