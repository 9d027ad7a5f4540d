#include <doctest.h>

#include "dpcc/error.hpp"
#include "dpcc/hash.hpp"
#include "dpcc/version_store.hpp"
#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace dpcc;
namespace fs = std::filesystem;

namespace {

std::int64_t counter_clock() {
    static std::int64_t t = 1000;
    return ++t;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void flip_byte(const fs::path& p, std::size_t offset) {
    auto s = slurp(p);
    REQUIRE(offset < s.size());
    s[offset] = static_cast<char>(s[offset] ^ 0x01);
    std::ofstream(p, std::ios::binary | std::ios::trunc) << s;
}

void fill(VersionStore& store) {
    store.commit({{"questions/q0001.txt", "How many orders?\n"}, {"sql/q0001/v1.sql", "SELECT COUNT(*) FROM orders\n"}},
                 "question_generation", "first");
    store.commit({{"sql/q0001/v2.sql", "SELECT COUNT(order_id) FROM orders\n"}}, "text_to_sql", "second");
    store.commit({{"questions/q0001.txt", "How many orders were placed?\n"}, {"topics/assignments.txt", "q0001\torders\n"}},
                 "operator", "third");
}

}  // namespace

TEST_CASE("commits form a hash chain") {
    const auto dir = test::temp_dir("store");
    VersionStore store(dir, counter_clock);
    CHECK_FALSE(store.head());
    fill(store);
    const auto commits = store.commits();
    REQUIRE(commits.size() == 3);
    CHECK_FALSE(commits[0].parent_id);
    CHECK(*commits[1].parent_id == commits[0].commit_id);
    CHECK(*commits[2].parent_id == commits[1].commit_id);
    for (const auto& c : commits) {
        CHECK(compute_commit_id(c) == c.commit_id);
        for (const auto& p : c.payloads) CHECK(sha256_hex(slurp(dir / "objects" / p.digest)) == p.digest);
    }
    CHECK(store.verify_chain());

    // Reopening reads the same chain.
    VersionStore again(dir);
    CHECK(again.size() == 3);
    CHECK(again.head() == store.head());
    CHECK(again.verify_chain());
}

TEST_CASE("commit validation") {
    VersionStore store(test::temp_dir("store"), counter_clock);
    try {
        store.commit({}, "a", "m");
        FAIL("expected empty_artifacts");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_artifacts);
    }
    CHECK_THROWS_AS(store.commit({{"a.txt", "1"}, {"a.txt", "2"}}, "a", "m"), Error);
    CHECK(store.size() == 0);
}

TEST_CASE("tampering is detected") {
    SUBCASE("payload byte") {
        const auto dir = test::temp_dir("tamper");
        VersionStore store(dir, counter_clock);
        fill(store);
        flip_byte(dir / "objects" / store.commits()[1].payloads[0].digest, 3);
        CHECK_FALSE(store.verify_chain());
    }
    SUBCASE("commit message") {
        const auto dir = test::temp_dir("tamper");
        VersionStore store(dir, counter_clock);
        fill(store);
        auto log = slurp(dir / "commits.jsonl");
        const auto pos = log.find("\"second\"");
        REQUIRE(pos != std::string::npos);
        flip_byte(dir / "commits.jsonl", pos + 2);
        CHECK_FALSE(store.verify_chain());
    }
    SUBCASE("missing object") {
        const auto dir = test::temp_dir("tamper");
        VersionStore store(dir, counter_clock);
        fill(store);
        fs::remove(dir / "objects" / store.commits()[0].payloads[0].digest);
        CHECK_FALSE(store.verify_chain());
    }
    SUBCASE("dropped commit") {
        const auto dir = test::temp_dir("tamper");
        VersionStore store(dir, counter_clock);
        fill(store);
        auto log = slurp(dir / "commits.jsonl");
        log.erase(0, log.find('\n') + 1);
        std::ofstream(dir / "commits.jsonl", std::ios::trunc) << log;
        CHECK_FALSE(store.verify_chain());
    }
}

TEST_CASE("exports") {
    const auto dir = test::temp_dir("export");
    VersionStore store(dir / "store", counter_clock);
    fill(store);
    store.export_worktree(dir / "a");
    store.replay_export(dir / "b");
    CHECK(trees_equal(dir / "a", dir / "b"));
    CHECK(slurp(dir / "a" / "questions" / "q0001.txt") == "How many orders were placed?\n");
    CHECK(slurp(dir / "a" / "sql" / "q0001" / "v1.sql") == "SELECT COUNT(*) FROM orders\n");
    CHECK(fs::is_directory(dir / "a" / "views"));

    // Existing content (other than .git) is replaced.
    fs::create_directories(dir / "c" / ".git");
    std::ofstream(dir / "c" / "stale.txt") << "x";
    store.export_worktree(dir / "c");
    CHECK_FALSE(fs::exists(dir / "c" / "stale.txt"));
    CHECK(fs::exists(dir / "c" / ".git"));

    VersionStore empty(dir / "empty-store");
    empty.export_worktree(dir / "e");
    for (const auto* d : {"questions", "sql", "views", "topics"}) {
        CHECK(fs::is_directory(dir / "e" / d));
        CHECK(fs::is_empty(dir / "e" / d));
    }
}

TEST_CASE("artifact layout") {
    DataProductState s;
    for (const auto& t : test::retail_tables()) s = s.apply(table_added(t));
    std::vector<StateEvent> events = {
        question_added({"q0001", "How many orders?", QuestionOrigin::generated, std::nullopt, {{"orders", std::nullopt}}}),
        query_version_added({"q0001", 1, "SELECT COUNT(*) FROM orders", "t", {}, 1.0, false}),
        view_added({"v1", "v_abc", "SELECT 1 AS x", "k", 1}),
        topic_assigned({"q0001", "orders \xC2\xB7 aggregate"}),
        contract_changed({{{"table_coverage", 0.9, Comparator::at_least}}}),
    };
    const auto after = s.apply_all(events);
    const auto artifacts = artifacts_for(events, after);
    std::set<std::string> names;
    for (const auto& a : artifacts) names.insert(a.name);
    CHECK(names == std::set<std::string>{"contract.json", "questions/q0001.txt", "sql/q0001/v1.sql", "topics/assignments.txt",
                                         "views/v_abc.sql"});
    for (const auto& a : artifacts) {
        if (a.name == "views/v_abc.sql") CHECK(a.content == "CREATE VIEW v_abc AS SELECT 1 AS x;\n");
        if (a.name == "topics/assignments.txt") CHECK(a.content == "q0001\torders \xC2\xB7 aggregate\n");
    }
    // Answers and tables have no artifacts.
    CHECK(artifacts_for(std::vector<StateEvent>{table_added(test::retail_tables()[0])}, s).empty());
}

TEST_CASE("journal") {
    VersionStore store(test::temp_dir("journal"));
    store.append_journal({{"iteration", 1}});
    store.append_journal({{"iteration", 2}});
    const auto j = store.journal();
    REQUIRE(j.size() == 2);
    CHECK(j[1]["iteration"] == 2);
}
