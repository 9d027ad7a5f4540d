#pragma once

#include "dpcc/types.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dpcc {

/// Everything the state knows about one question.
struct QuestionRecord {
    Question question;
    std::vector<QueryVersion> queries;   // version_no 1..N in order
    std::vector<AnswerVersion> answers;  // version_no 1..N in order
    std::optional<std::string> topic;

    const QueryVersion* latest_query() const { return queries.empty() ? nullptr : &queries.back(); }

    friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

/// Immutable snapshot of the data product. Copies are cheap and share structure;
/// applying an event yields a new snapshot and leaves this one untouched.
class DataProductState {
public:
    template <typename T>
    using Map = std::map<std::string, std::shared_ptr<const T>, std::less<>>;
    using EventLog = std::vector<std::shared_ptr<const StateEvent>>;

    DataProductState();

    std::int64_t version() const { return data_->version; }

    const Map<TableMeta>& tables() const { return data_->tables; }
    const Map<QuestionRecord>& questions() const { return data_->questions; }
    const Map<ViewDef>& views() const { return data_->views; }
    const std::optional<Contract>& contract() const { return data_->contract; }
    const EventLog& events() const { return data_->log; }

    const TableMeta* find_table(std::string_view table_id) const;
    const QuestionRecord* find_question(std::string_view question_id) const;
    const ViewDef* find_view_by_name(std::string_view name) const;

    /// Highest query version of a question, or nullopt when it has no SQL yet.
    /// Throws unknown_question for ids that are not in the state.
    std::optional<QueryVersion> latest_query(std::string_view question_id) const;

    /// Validates and applies one event. The returned snapshot has version + 1
    /// and the event (with its assigned event_id) appended to the log.
    DataProductState apply(StateEvent event) const;

    /// Applies all events or none.
    DataProductState apply_all(std::span<const StateEvent> events) const;

    /// Rebuilds a state by replaying events from empty.
    static DataProductState replay(std::span<const StateEvent> events);

    std::vector<StateEvent> event_list() const;

    friend bool operator==(const DataProductState& a, const DataProductState& b);

private:
    struct Data {
        std::int64_t version = 0;
        Map<TableMeta> tables;
        Map<QuestionRecord> questions;
        Map<ViewDef> views;
        std::optional<Contract> contract;
        EventLog log;
    };

    explicit DataProductState(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

    std::shared_ptr<const Data> data_;
};

/// Single-writer holder of the live state. Readers take snapshots.
class StateStore {
public:
    DataProductState snapshot() const;

    DataProductState apply(StateEvent event);
    DataProductState apply_all(std::span<const StateEvent> events);
    void reset(DataProductState state = {});

private:
    mutable std::mutex mu_;
    DataProductState current_;
};

}  // namespace dpcc
