#include <doctest.h>

#include "dpcc/error.hpp"
#include "dpcc/json.hpp"
#include "dpcc/state.hpp"

using namespace dpcc;

namespace {

TableMeta table(std::string id, std::vector<std::string> cols, std::vector<ForeignKey> fks = {}) {
    TableMeta t;
    t.table_id = id;
    t.name = id;
    for (auto& c : cols) t.columns.push_back({c, DataKind::numeric, true});
    t.foreign_keys = std::move(fks);
    return t;
}

DataProductState two_tables() {
    DataProductState s;
    s = s.apply(table_added(table("regions", {"region_id", "name"})));
    s = s.apply(table_added(table("customers", {"customer_id", "region_id"}, {{"region_id", "regions", "region_id"}})));
    return s;
}

Question question(std::string id, std::optional<std::string> parent = std::nullopt) {
    Question q;
    q.question_id = id;
    q.text = "text of " + id;
    q.origin = parent ? QuestionOrigin::followup : QuestionOrigin::generated;
    q.parent_question = parent;
    q.schema_targets = {{"regions", std::nullopt}};
    return q;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::validation;
}

}  // namespace

TEST_CASE("apply assigns consecutive versions and event ids") {
    auto s = two_tables();
    CHECK(s.version() == 2);
    CHECK(s.events().size() == 2);
    CHECK(s.events()[0]->event_id == 1);
    CHECK(s.events()[1]->event_id == 2);
    CHECK(s.events()[1]->scope == ContextScope::table("customers"));
}

TEST_CASE("snapshots are immutable") {
    const auto a = two_tables();
    const auto b = a.apply(question_added(question("q1")));
    CHECK(a.questions().empty());
    CHECK(a.version() == 2);
    CHECK(b.questions().size() == 1);
    CHECK(b.find_question("q1")->question.text == "text of q1");
}

TEST_CASE("structural errors") {
    const auto s = two_tables();
    SUBCASE("dangling foreign key") {
        CHECK(code_of([&] { s.apply(table_added(table("x", {"a"}, {{"a", "missing", "id"}}))); }) ==
              ErrorCode::dangling_reference);
    }
    SUBCASE("duplicate table") {
        CHECK(code_of([&] { s.apply(table_added(table("regions", {"a"}))); }) == ErrorCode::duplicate_identifier);
    }
    SUBCASE("question targeting unknown column") {
        auto q = question("q1");
        q.schema_targets = {{"regions", std::string("nope")}};
        CHECK(code_of([&] { s.apply(question_added(q)); }) == ErrorCode::dangling_reference);
    }
    SUBCASE("follow-up with unknown parent") {
        CHECK(code_of([&] { s.apply(question_added(question("q2", "q1"))); }) == ErrorCode::dangling_reference);
    }
    SUBCASE("query for unknown question") {
        CHECK(code_of([&] { s.apply(query_version_added({"q9", 1, "SELECT 1", "t", {}, 1.0, false})); }) ==
              ErrorCode::dangling_reference);
    }
    SUBCASE("latest_query of unknown question") {
        CHECK(code_of([&] { (void)s.latest_query("q9"); }) == ErrorCode::unknown_question);
    }
}

TEST_CASE("query and answer versions must be contiguous") {
    auto s = two_tables().apply(question_added(question("q1")));
    CHECK(code_of([&] { s.apply(query_version_added({"q1", 2, "SELECT 1", "t", {}, 1.0, false})); }) ==
          ErrorCode::version_gap);
    s = s.apply(query_version_added({"q1", 1, "SELECT 1", "t", {}, 1.0, false}));
    s = s.apply(query_version_added({"q1", 2, "SELECT 2", "t", {}, 1.0, false}));
    CHECK(s.latest_query("q1")->sql_text == "SELECT 2");
    CHECK(code_of([&] { s.apply(answer_recorded({"q1", 2, "d", 1.0})); }) == ErrorCode::version_gap);
    CHECK(code_of([&] { s.apply(answer_recorded({"q1", 1, "d", 1.5})); }) == ErrorCode::invalid_value);
    CHECK(code_of([&] { s.apply(query_version_added({"q1", 3, "x", "t", {}, -1.0, false})); }) == ErrorCode::invalid_value);
}

TEST_CASE("topics are assigned once") {
    auto s = two_tables().apply(question_added(question("q1")));
    s = s.apply(topic_assigned({"q1", "regions · lookup"}));
    CHECK(*s.find_question("q1")->topic == "regions · lookup");
    CHECK(code_of([&] { s.apply(topic_assigned({"q1", "again"})); }) == ErrorCode::duplicate_identifier);
}

TEST_CASE("views may not shadow tables or repeat names") {
    auto s = two_tables();
    CHECK(code_of([&] { s.apply(view_added({"v1", "regions", "SELECT 1", "", 1})); }) == ErrorCode::duplicate_identifier);
    s = s.apply(view_added({"v1", "v_one", "SELECT 1", "", 1}));
    CHECK(code_of([&] { s.apply(view_added({"v2", "V_ONE", "SELECT 1", "", 1})); }) == ErrorCode::duplicate_identifier);
}

TEST_CASE("apply_all is all-or-nothing") {
    StateStore store;
    store.reset(two_tables());
    std::vector<StateEvent> batch = {question_added(question("q1")), question_added(question("q1"))};
    CHECK_THROWS_AS(store.apply_all(batch), Error);
    CHECK(store.snapshot().version() == 2);
    CHECK(store.snapshot().questions().empty());
}

TEST_CASE("replay and export round-trip") {
    auto s = two_tables().apply(question_added(question("q1")));
    s = s.apply(question_added(question("q2", "q1")));
    s = s.apply(contract_changed({{{"table_coverage", 0.9, Comparator::at_least}}}));
    const auto events = s.event_list();
    CHECK(DataProductState::replay(events) == s);
    const auto text = export_state(s);
    const auto back = import_state(text);
    CHECK(back == s);
    CHECK(export_state(back) == text);
    CHECK_THROWS_AS(import_state("{\"format\":\"other\"}"), Error);
}
