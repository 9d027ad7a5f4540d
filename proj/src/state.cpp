#include "dpcc/state.hpp"

#include "dpcc/error.hpp"

#include <set>

namespace dpcc {
namespace {

template <typename T>
bool maps_equal(const DataProductState::Map<T>& a, const DataProductState::Map<T>& b) {
    if (a.size() != b.size()) return false;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first) return false;
        if (ia->second != ib->second && !(*ia->second == *ib->second)) return false;
    }
    return true;
}

[[noreturn]] void dangling(const std::string& what) { throw Error(ErrorCode::dangling_reference, what); }

[[noreturn]] void duplicate(const std::string& what) { throw Error(ErrorCode::duplicate_identifier, what); }

}  // namespace

DataProductState::DataProductState() : data_(std::make_shared<const Data>()) {}

const TableMeta* DataProductState::find_table(std::string_view table_id) const {
    auto it = data_->tables.find(table_id);
    return it == data_->tables.end() ? nullptr : it->second.get();
}

const QuestionRecord* DataProductState::find_question(std::string_view question_id) const {
    auto it = data_->questions.find(question_id);
    return it == data_->questions.end() ? nullptr : it->second.get();
}

const ViewDef* DataProductState::find_view_by_name(std::string_view name) const {
    for (const auto& [id, view] : data_->views) {
        if (iequals(view->name, name)) return view.get();
    }
    return nullptr;
}

std::optional<QueryVersion> DataProductState::latest_query(std::string_view question_id) const {
    const auto* rec = find_question(question_id);
    if (!rec) throw Error(ErrorCode::unknown_question, "unknown question '" + std::string(question_id) + "'");
    if (const auto* q = rec->latest_query()) return *q;
    return std::nullopt;
}

DataProductState DataProductState::apply(StateEvent event) const {
    auto next = std::make_shared<Data>(*data_);

    std::visit(
        [&](auto& payload) {
            using T = std::decay_t<decltype(payload)>;
            if constexpr (std::is_same_v<T, TableMeta>) {
                if (event.kind != EventKind::TableAdded) throw Error(ErrorCode::validation, "payload/kind mismatch");
                if (payload.table_id.empty()) throw Error(ErrorCode::validation, "table_id must be non-empty");
                if (next->tables.contains(payload.table_id)) duplicate("table '" + payload.table_id + "' exists");
                for (const auto& [id, t] : next->tables) {
                    if (iequals(t->name, payload.name)) duplicate("table name '" + payload.name + "' exists");
                }
                std::set<std::string> seen;
                for (const auto& c : payload.columns) {
                    if (!seen.insert(to_lower(c.name)).second) {
                        duplicate("column '" + c.name + "' repeated in table '" + payload.table_id + "'");
                    }
                }
                if (payload.row_count_estimate < 0) throw Error(ErrorCode::invalid_value, "negative row count");
                for (const auto& fk : payload.foreign_keys) {
                    if (!payload.find_column(fk.local_column)) {
                        dangling("foreign key column '" + fk.local_column + "' not in table");
                    }
                    const TableMeta* remote = fk.remote_table == payload.table_id
                                                  ? &payload
                                                  : (next->tables.contains(fk.remote_table)
                                                         ? next->tables.at(fk.remote_table).get()
                                                         : nullptr);
                    if (!remote || !remote->find_column(fk.remote_column)) {
                        dangling("foreign key target " + fk.remote_table + "." + fk.remote_column + " unknown");
                    }
                }
                event.scope = ContextScope::table(payload.table_id);
                next->tables.emplace(payload.table_id, std::make_shared<const TableMeta>(payload));
            } else if constexpr (std::is_same_v<T, Question>) {
                if (event.kind != EventKind::QuestionAdded) throw Error(ErrorCode::validation, "payload/kind mismatch");
                if (payload.question_id.empty()) throw Error(ErrorCode::validation, "question_id must be non-empty");
                if (next->questions.contains(payload.question_id)) {
                    duplicate("question '" + payload.question_id + "' exists");
                }
                const bool is_followup = payload.origin == QuestionOrigin::followup;
                if (is_followup != payload.parent_question.has_value()) {
                    throw Error(ErrorCode::validation, "parent_question must be set exactly for follow-ups");
                }
                if (payload.parent_question && !next->questions.contains(*payload.parent_question)) {
                    dangling("parent question '" + *payload.parent_question + "' unknown");
                }
                for (const auto& target : payload.schema_targets) {
                    auto it = next->tables.find(target.table);
                    if (it == next->tables.end()) dangling("target table '" + target.table + "' unknown");
                    if (target.column && !it->second->find_column(*target.column)) {
                        dangling("target column '" + target.table + "." + *target.column + "' unknown");
                    }
                }
                event.scope = ContextScope::question(payload.question_id);
                auto rec = std::make_shared<QuestionRecord>();
                rec->question = payload;
                next->questions.emplace(payload.question_id, std::move(rec));
            } else if constexpr (std::is_same_v<T, QueryVersion>) {
                if (event.kind != EventKind::QueryVersionAdded) {
                    throw Error(ErrorCode::validation, "payload/kind mismatch");
                }
                auto it = next->questions.find(payload.question_id);
                if (it == next->questions.end()) dangling("question '" + payload.question_id + "' unknown");
                const int expected = static_cast<int>(it->second->queries.size()) + 1;
                if (payload.version_no != expected) {
                    throw Error(ErrorCode::version_gap, "query version " + std::to_string(payload.version_no) +
                                                            " for '" + payload.question_id + "', expected " +
                                                            std::to_string(expected));
                }
                if (payload.exec_ms && *payload.exec_ms < 0) throw Error(ErrorCode::invalid_value, "negative exec_ms");
                for (const auto& t : payload.analysis.referenced_tables) {
                    if (!next->tables.contains(t)) dangling("query references unknown table '" + t + "'");
                }
                event.scope = ContextScope::question(payload.question_id);
                auto rec = std::make_shared<QuestionRecord>(*it->second);
                rec->queries.push_back(payload);
                it->second = std::move(rec);
            } else if constexpr (std::is_same_v<T, AnswerVersion>) {
                if (event.kind != EventKind::AnswerRecorded) throw Error(ErrorCode::validation, "payload/kind mismatch");
                auto it = next->questions.find(payload.question_id);
                if (it == next->questions.end()) dangling("question '" + payload.question_id + "' unknown");
                const int expected = static_cast<int>(it->second->answers.size()) + 1;
                if (payload.version_no != expected) {
                    throw Error(ErrorCode::version_gap, "answer version " + std::to_string(payload.version_no) +
                                                            ", expected " + std::to_string(expected));
                }
                if (!(payload.confidence >= 0.0 && payload.confidence <= 1.0)) {
                    throw Error(ErrorCode::invalid_value, "confidence outside [0,1]");
                }
                event.scope = ContextScope::question(payload.question_id);
                auto rec = std::make_shared<QuestionRecord>(*it->second);
                rec->answers.push_back(payload);
                it->second = std::move(rec);
            } else if constexpr (std::is_same_v<T, ViewDef>) {
                if (event.kind != EventKind::ViewAdded) throw Error(ErrorCode::validation, "payload/kind mismatch");
                if (payload.view_id.empty()) throw Error(ErrorCode::validation, "view_id must be non-empty");
                if (next->views.contains(payload.view_id)) duplicate("view '" + payload.view_id + "' exists");
                for (const auto& [id, v] : next->views) {
                    if (iequals(v->name, payload.name)) duplicate("view name '" + payload.name + "' exists");
                }
                for (const auto& [id, t] : next->tables) {
                    if (iequals(t->name, payload.name)) duplicate("view name '" + payload.name + "' shadows a table");
                }
                event.scope = ContextScope::database();
                next->views.emplace(payload.view_id, std::make_shared<const ViewDef>(payload));
            } else if constexpr (std::is_same_v<T, TopicAssignment>) {
                if (event.kind != EventKind::TopicAssigned) throw Error(ErrorCode::validation, "payload/kind mismatch");
                auto it = next->questions.find(payload.question_id);
                if (it == next->questions.end()) dangling("question '" + payload.question_id + "' unknown");
                if (it->second->topic) duplicate("question '" + payload.question_id + "' already has a topic");
                event.scope = ContextScope::question(payload.question_id);
                auto rec = std::make_shared<QuestionRecord>(*it->second);
                rec->topic = payload.topic_label;
                it->second = std::move(rec);
            } else if constexpr (std::is_same_v<T, Contract>) {
                if (event.kind != EventKind::ContractChanged) {
                    throw Error(ErrorCode::validation, "payload/kind mismatch");
                }
                event.scope = ContextScope::database();
                next->contract = payload;
            }
        },
        event.payload);

    next->version = data_->version + 1;
    event.event_id = next->version;
    next->log.push_back(std::make_shared<const StateEvent>(std::move(event)));
    return DataProductState(std::move(next));
}

DataProductState DataProductState::apply_all(std::span<const StateEvent> events) const {
    DataProductState s = *this;
    for (const auto& e : events) s = s.apply(e);
    return s;
}

DataProductState DataProductState::replay(std::span<const StateEvent> events) {
    return DataProductState{}.apply_all(events);
}

std::vector<StateEvent> DataProductState::event_list() const {
    std::vector<StateEvent> out;
    out.reserve(data_->log.size());
    for (const auto& e : data_->log) out.push_back(*e);
    return out;
}

bool operator==(const DataProductState& a, const DataProductState& b) {
    if (a.data_ == b.data_) return true;
    const auto& x = *a.data_;
    const auto& y = *b.data_;
    if (x.version != y.version || x.contract != y.contract) return false;
    if (!maps_equal(x.tables, y.tables) || !maps_equal(x.questions, y.questions) || !maps_equal(x.views, y.views)) {
        return false;
    }
    if (x.log.size() != y.log.size()) return false;
    for (std::size_t i = 0; i < x.log.size(); ++i) {
        if (!(*x.log[i] == *y.log[i])) return false;
    }
    return true;
}

DataProductState StateStore::snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
}

DataProductState StateStore::apply(StateEvent event) {
    std::lock_guard lock(mu_);
    current_ = current_.apply(std::move(event));
    return current_;
}

DataProductState StateStore::apply_all(std::span<const StateEvent> events) {
    std::lock_guard lock(mu_);
    current_ = current_.apply_all(events);
    return current_;
}

void StateStore::reset(DataProductState state) {
    std::lock_guard lock(mu_);
    current_ = std::move(state);
}

}  // namespace dpcc
