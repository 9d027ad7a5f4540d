#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace dpcc {

using TableId = std::string;
using QuestionId = std::string;
using ViewId = std::string;

enum class DataKind { numeric, text, temporal, boolean, other };

struct ColumnMeta {
    std::string name;
    DataKind data_kind = DataKind::other;
    bool nullable = true;

    friend bool operator==(const ColumnMeta&, const ColumnMeta&) = default;
};

struct ForeignKey {
    std::string local_column;
    TableId remote_table;
    std::string remote_column;

    friend bool operator==(const ForeignKey&, const ForeignKey&) = default;
};

struct TableMeta {
    TableId table_id;
    std::string name;
    std::vector<ColumnMeta> columns;
    std::int64_t row_count_estimate = 0;
    std::vector<ForeignKey> foreign_keys;

    const ColumnMeta* find_column(std::string_view column) const;

    friend bool operator==(const TableMeta&, const TableMeta&) = default;
};

/// (table, column) pair; used for coverage and schema targets.
struct ColumnRef {
    TableId table;
    std::string column;

    friend auto operator<=>(const ColumnRef&, const ColumnRef&) = default;
};

/// A schema element a question is about: a table, optionally narrowed to one column.
struct SchemaTarget {
    TableId table;
    std::optional<std::string> column;

    friend auto operator<=>(const SchemaTarget&, const SchemaTarget&) = default;
};

enum class QuestionOrigin { predefined, generated, followup, human };

struct Question {
    QuestionId question_id;
    std::string text;
    QuestionOrigin origin = QuestionOrigin::generated;
    std::optional<QuestionId> parent_question;
    std::set<SchemaTarget> schema_targets;

    friend bool operator==(const Question&, const Question&) = default;
};

struct QueryAnalysis {
    std::set<TableId> referenced_tables;
    std::set<ColumnRef> referenced_columns;
    int token_count = 0;
    int join_count = 0;
    int subquery_depth = 0;
    int aggregate_count = 0;
    bool has_group_by = false;
    bool has_having = false;
    int set_op_count = 0;
    std::string join_pattern_key;

    friend bool operator==(const QueryAnalysis&, const QueryAnalysis&) = default;
};

struct QueryVersion {
    QuestionId question_id;
    int version_no = 1;
    std::string sql_text;
    std::string created_by;
    QueryAnalysis analysis;
    std::optional<double> exec_ms;
    bool timed_out = false;

    friend bool operator==(const QueryVersion&, const QueryVersion&) = default;
};

struct AnswerVersion {
    QuestionId question_id;
    int version_no = 1;
    std::string payload_digest;
    double confidence = 1.0;

    friend bool operator==(const AnswerVersion&, const AnswerVersion&) = default;
};

struct ViewDef {
    ViewId view_id;
    std::string name;
    std::string sql_text;
    std::string covers_pattern;
    int created_at_iteration = 0;

    friend bool operator==(const ViewDef&, const ViewDef&) = default;
};

struct TopicAssignment {
    QuestionId question_id;
    std::string topic_label;

    friend bool operator==(const TopicAssignment&, const TopicAssignment&) = default;
};

enum class Comparator { at_least, at_most };

struct ContractEntry {
    std::string metric_id;
    double target = 0.0;
    Comparator comparator = Comparator::at_least;

    friend bool operator==(const ContractEntry&, const ContractEntry&) = default;
};

struct Contract {
    std::vector<ContractEntry> entries;

    const ContractEntry* find(std::string_view metric_id) const;

    friend bool operator==(const Contract&, const Contract&) = default;
};

enum class ScopeLevel { database, table, question };

struct ContextScope {
    ScopeLevel level = ScopeLevel::database;
    std::vector<std::string> ids;

    static ContextScope database() { return {}; }
    static ContextScope table(TableId id) { return {ScopeLevel::table, {std::move(id)}}; }
    static ContextScope question(QuestionId id) { return {ScopeLevel::question, {std::move(id)}}; }

    /// Stable textual key, e.g. "database", "table:orders".
    std::string key() const;

    friend auto operator<=>(const ContextScope&, const ContextScope&) = default;
};

enum class EventKind {
    TableAdded,
    QuestionAdded,
    QueryVersionAdded,
    AnswerRecorded,
    ViewAdded,
    TopicAssigned,
    ContractChanged,
};

using EventPayload =
    std::variant<TableMeta, Question, QueryVersion, AnswerVersion, ViewDef, TopicAssignment, Contract>;

struct StateEvent {
    std::int64_t event_id = 0;  // assigned on apply
    EventKind kind = EventKind::TableAdded;
    ContextScope scope;
    EventPayload payload;

    friend bool operator==(const StateEvent&, const StateEvent&) = default;
};

// Event constructors; scope and kind are derived from the payload.
StateEvent table_added(TableMeta table);
StateEvent question_added(Question question);
StateEvent query_version_added(QueryVersion version);
StateEvent answer_recorded(AnswerVersion answer);
StateEvent view_added(ViewDef view);
StateEvent topic_assigned(TopicAssignment assignment);
StateEvent contract_changed(Contract contract);

std::string_view to_string(DataKind kind);
std::string_view to_string(QuestionOrigin origin);
std::string_view to_string(ScopeLevel level);
std::string_view to_string(EventKind kind);
std::string_view to_string(Comparator comparator);

DataKind data_kind_from_string(std::string_view s);
QuestionOrigin question_origin_from_string(std::string_view s);
ScopeLevel scope_level_from_string(std::string_view s);
EventKind event_kind_from_string(std::string_view s);
Comparator comparator_from_string(std::string_view s);

bool iequals(std::string_view a, std::string_view b);
std::string to_lower(std::string_view s);

}  // namespace dpcc
