#pragma once

#include "dpcc/state.hpp"
#include "dpcc/types.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace dpcc {

using json = nlohmann::json;

void to_json(json& j, const ColumnMeta& v);
void from_json(const json& j, ColumnMeta& v);
void to_json(json& j, const ForeignKey& v);
void from_json(const json& j, ForeignKey& v);
void to_json(json& j, const TableMeta& v);
void from_json(const json& j, TableMeta& v);
void to_json(json& j, const ColumnRef& v);
void from_json(const json& j, ColumnRef& v);
void to_json(json& j, const SchemaTarget& v);
void from_json(const json& j, SchemaTarget& v);
void to_json(json& j, const Question& v);
void from_json(const json& j, Question& v);
void to_json(json& j, const QueryAnalysis& v);
void from_json(const json& j, QueryAnalysis& v);
void to_json(json& j, const QueryVersion& v);
void from_json(const json& j, QueryVersion& v);
void to_json(json& j, const AnswerVersion& v);
void from_json(const json& j, AnswerVersion& v);
void to_json(json& j, const ViewDef& v);
void from_json(const json& j, ViewDef& v);
void to_json(json& j, const TopicAssignment& v);
void from_json(const json& j, TopicAssignment& v);
void to_json(json& j, const ContractEntry& v);
void from_json(const json& j, ContractEntry& v);
void to_json(json& j, const Contract& v);
void from_json(const json& j, Contract& v);
void to_json(json& j, const ContextScope& v);
void from_json(const json& j, ContextScope& v);
void to_json(json& j, const StateEvent& v);
void from_json(const json& j, StateEvent& v);

/// Materialized view of a snapshot (tables, questions with versions, views,
/// topics, contract). Used by the API; not a round-trippable format.
json state_summary_json(const DataProductState& state);

inline constexpr int kStateSchemaVersion = 1;

/// Self-describing export: {"format", "schema_version", "version", "events"}.
/// Keys are emitted in sorted order, so equal states export byte-identically.
std::string export_state(const DataProductState& state);

/// Rebuilds a state by replaying the exported event log.
DataProductState import_state(std::string_view text);

}  // namespace dpcc
