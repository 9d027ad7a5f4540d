#include "dpcc/types.hpp"

#include "dpcc/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

namespace dpcc {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

const ColumnMeta* TableMeta::find_column(std::string_view column) const {
    for (const auto& c : columns) {
        if (iequals(c.name, column)) return &c;
    }
    return nullptr;
}

const ContractEntry* Contract::find(std::string_view metric_id) const {
    for (const auto& e : entries) {
        if (e.metric_id == metric_id) return &e;
    }
    return nullptr;
}

std::string ContextScope::key() const {
    std::string out(to_string(level));
    for (const auto& id : ids) {
        out += ':';
        out += id;
    }
    return out;
}

StateEvent table_added(TableMeta table) {
    auto scope = ContextScope::table(table.table_id);
    return {0, EventKind::TableAdded, std::move(scope), std::move(table)};
}

StateEvent question_added(Question question) {
    auto scope = ContextScope::question(question.question_id);
    return {0, EventKind::QuestionAdded, std::move(scope), std::move(question)};
}

StateEvent query_version_added(QueryVersion version) {
    auto scope = ContextScope::question(version.question_id);
    return {0, EventKind::QueryVersionAdded, std::move(scope), std::move(version)};
}

StateEvent answer_recorded(AnswerVersion answer) {
    auto scope = ContextScope::question(answer.question_id);
    return {0, EventKind::AnswerRecorded, std::move(scope), std::move(answer)};
}

StateEvent view_added(ViewDef view) {
    return {0, EventKind::ViewAdded, ContextScope::database(), std::move(view)};
}

StateEvent topic_assigned(TopicAssignment assignment) {
    auto scope = ContextScope::question(assignment.question_id);
    return {0, EventKind::TopicAssigned, std::move(scope), std::move(assignment)};
}

StateEvent contract_changed(Contract contract) {
    return {0, EventKind::ContractChanged, ContextScope::database(), std::move(contract)};
}

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<Enum, std::string_view>, N>& table,
                std::string_view what) {
    for (const auto& [value, name] : table) {
        if (name == s) return value;
    }
    throw Error(ErrorCode::validation, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum v, const std::array<std::pair<Enum, std::string_view>, N>& table) {
    for (const auto& [value, name] : table) {
        if (value == v) return name;
    }
    return "?";
}

constexpr std::array<std::pair<DataKind, std::string_view>, 5> kDataKinds{{
    {DataKind::numeric, "numeric"},
    {DataKind::text, "text"},
    {DataKind::temporal, "temporal"},
    {DataKind::boolean, "boolean"},
    {DataKind::other, "other"},
}};

constexpr std::array<std::pair<QuestionOrigin, std::string_view>, 4> kOrigins{{
    {QuestionOrigin::predefined, "predefined"},
    {QuestionOrigin::generated, "generated"},
    {QuestionOrigin::followup, "followup"},
    {QuestionOrigin::human, "human"},
}};

constexpr std::array<std::pair<ScopeLevel, std::string_view>, 3> kLevels{{
    {ScopeLevel::database, "database"},
    {ScopeLevel::table, "table"},
    {ScopeLevel::question, "question"},
}};

constexpr std::array<std::pair<EventKind, std::string_view>, 7> kEventKinds{{
    {EventKind::TableAdded, "TableAdded"},
    {EventKind::QuestionAdded, "QuestionAdded"},
    {EventKind::QueryVersionAdded, "QueryVersionAdded"},
    {EventKind::AnswerRecorded, "AnswerRecorded"},
    {EventKind::ViewAdded, "ViewAdded"},
    {EventKind::TopicAssigned, "TopicAssigned"},
    {EventKind::ContractChanged, "ContractChanged"},
}};

constexpr std::array<std::pair<Comparator, std::string_view>, 2> kComparators{{
    {Comparator::at_least, ">="},
    {Comparator::at_most, "<="},
}};

}  // namespace

std::string_view to_string(DataKind kind) { return enum_name(kind, kDataKinds); }
std::string_view to_string(QuestionOrigin origin) { return enum_name(origin, kOrigins); }
std::string_view to_string(ScopeLevel level) { return enum_name(level, kLevels); }
std::string_view to_string(EventKind kind) { return enum_name(kind, kEventKinds); }
std::string_view to_string(Comparator comparator) { return enum_name(comparator, kComparators); }

DataKind data_kind_from_string(std::string_view s) { return parse_enum(s, kDataKinds, "data kind"); }
QuestionOrigin question_origin_from_string(std::string_view s) { return parse_enum(s, kOrigins, "origin"); }
ScopeLevel scope_level_from_string(std::string_view s) { return parse_enum(s, kLevels, "scope level"); }
EventKind event_kind_from_string(std::string_view s) { return parse_enum(s, kEventKinds, "event kind"); }
Comparator comparator_from_string(std::string_view s) { return parse_enum(s, kComparators, "comparator"); }

}  // namespace dpcc
