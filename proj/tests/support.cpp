#include "support.hpp"

#include "dpcc/sql_analyzer.hpp"
#include "dpcc/error.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <unistd.h>

namespace fs = std::filesystem;

namespace dpcc::test {

fs::path fixture_dir() { return DPCC_FIXTURE_DIR; }

fs::path temp_dir(const std::string& name) {
    static std::atomic<int> counter{0};
    auto dir = fs::temp_directory_path() /
               ("dpcc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string retail_db() {
    static std::once_flag once;
    static std::string path;
    std::call_once(once, [] {
        path = (temp_dir("retail") / "retail.db").string();
        load_fixture_script((fixture_dir() / "retail.sql").string(), path);
    });
    return path;
}

std::vector<TableMeta> retail_tables() {
    static const std::vector<TableMeta> tables = [] {
        auto db = connect({"sqlite", retail_db()});
        auto raw = db->introspect();
        std::vector<TableMeta> out;
        std::set<TableId> placed;
        while (out.size() < raw.size()) {
            for (const auto& t : raw) {
                if (placed.count(t.table_id)) continue;
                bool ready = std::all_of(t.foreign_keys.begin(), t.foreign_keys.end(), [&](const ForeignKey& fk) {
                    return fk.remote_table == t.table_id || placed.count(fk.remote_table);
                });
                if (ready) {
                    out.push_back(t);
                    placed.insert(t.table_id);
                }
            }
        }
        return out;
    }();
    return tables;
}

namespace {

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

struct Edge {
    const TableMeta* from;
    const TableMeta* to;
    std::string from_col, to_col;
};

std::vector<Edge> edges_of(const TableMeta& t, const std::vector<TableMeta>& tables) {
    std::vector<Edge> out;
    auto find = [&](const TableId& id) -> const TableMeta* {
        for (const auto& x : tables)
            if (x.table_id == id) return &x;
        return nullptr;
    };
    for (const auto& fk : t.foreign_keys)
        if (fk.remote_table != t.table_id)
            if (auto* r = find(fk.remote_table)) out.push_back({&t, r, fk.local_column, fk.remote_column});
    for (const auto& other : tables)
        for (const auto& fk : other.foreign_keys)
            if (fk.remote_table == t.table_id && other.table_id != t.table_id)
                out.push_back({&t, &other, fk.remote_column, fk.local_column});
    return out;
}

}  // namespace

GeneratedQuery random_query(std::mt19937_64& rng, const std::vector<TableMeta>& tables) {
    GeneratedQuery q;
    struct Joined {
        const TableMeta* table;
        std::string alias;
    };
    std::vector<Joined> joined{{&pick(rng, tables), "a"}};
    std::string from = joined[0].table->name + " a";
    q.tables.insert(joined[0].table->table_id);

    const int joins = coin(rng, 0.5) ? (coin(rng, 0.4) ? 2 : 1) : 0;
    for (int j = 0; j < joins; ++j) {
        const auto& src = joined.back();
        std::vector<Edge> candidates;
        for (auto& e : edges_of(*src.table, tables))
            if (!q.tables.count(e.to->table_id)) candidates.push_back(e);
        if (candidates.empty()) break;
        const auto e = pick(rng, candidates);
        const std::string alias(1, static_cast<char>('a' + joined.size()));
        from += " JOIN " + e.to->name + " " + alias + " ON " + src.alias + "." + e.from_col + " = " + alias + "." +
                e.to_col;
        q.columns.insert({src.table->table_id, e.from_col});
        q.columns.insert({e.to->table_id, e.to_col});
        q.tables.insert(e.to->table_id);
        joined.push_back({e.to, alias});
    }

    auto random_column = [&](std::string& expr) {
        const auto& j = pick(rng, joined);
        const auto& c = pick(rng, j.table->columns);
        q.columns.insert({j.table->table_id, c.name});
        expr = j.alias + "." + c.name;
    };

    std::vector<std::string> select;
    std::string group_by;
    if (coin(rng, 0.35)) {
        std::string dim, measure;
        random_column(dim);
        random_column(measure);
        static const std::vector<std::string> fns = {"SUM", "COUNT", "AVG", "MAX", "MIN"};
        select = {dim, pick(rng, fns) + "(" + measure + ") AS agg"};
        group_by = " GROUP BY " + dim;
    } else {
        const int n = std::uniform_int_distribution<int>(1, 3)(rng);
        for (int i = 0; i < n; ++i) {
            std::string col;
            random_column(col);
            select.push_back(col);
        }
    }
    std::string sql = "SELECT ";
    for (std::size_t i = 0; i < select.size(); ++i) sql += (i ? ", " : "") + select[i];
    sql += " FROM " + from;
    if (coin(rng, 0.3)) {
        std::string col;
        random_column(col);
        sql += " WHERE " + col + " IS NOT NULL";
    }
    sql += group_by;
    if (coin(rng, 0.2)) sql += " ORDER BY 1";
    q.sql = sql;
    return q;
}

std::vector<StateEvent> random_event_sequence(std::uint64_t seed, std::size_t count, const std::vector<TableMeta>& tables) {
    std::mt19937_64 rng(seed);
    DataProductState s;
    std::vector<StateEvent> out;
    auto push = [&](StateEvent e) {
        s = s.apply(e);
        out.push_back(std::move(e));
    };
    for (const auto& t : tables) push(table_added(t));

    int next_q = 1, next_view = 1;
    static const std::vector<std::string> labels = {"sales", "customers", "catalog", "geography"};
    while (out.size() < tables.size() + count) {
        const double r = std::uniform_real_distribution<double>(0, 1)(rng);
        std::vector<QuestionId> ids;
        for (const auto& [id, rec] : s.questions()) ids.push_back(id);

        if (r < 0.2 || ids.empty()) {
            Question q;
            q.question_id = "q" + std::to_string(next_q++);
            q.text = "question " + q.question_id;
            const auto& t = pick(rng, tables);
            q.schema_targets.insert({t.table_id, coin(rng, 0.5) ? std::optional<std::string>(pick(rng, t.columns).name)
                                                                : std::nullopt});
            if (coin(rng, 0.2) && !ids.empty()) {
                q.origin = QuestionOrigin::followup;
                q.parent_question = pick(rng, ids);
            }
            push(question_added(q));
        } else if (r < 0.55) {
            const auto& qid = pick(rng, ids);
            const auto* rec = s.find_question(qid);
            QueryVersion v;
            v.question_id = qid;
            v.version_no = static_cast<int>(rec->queries.size()) + 1;
            v.created_by = "random";
            const auto catalog = SchemaCatalog::from_state(s);
            v.sql_text = random_query(rng, tables).sql;
            // Sometimes move an existing query onto a matching view instead.
            if (rec->latest_query() && !s.views().empty() && coin(rng, 0.5)) {
                for (const auto& [vid, view] : s.views()) {
                    if (view->covers_pattern != rec->latest_query()->analysis.join_pattern_key) continue;
                    try {
                        v.sql_text = rewrite_with_view(rec->latest_query()->sql_text, *view, catalog);
                    } catch (const Error&) {
                    }
                    break;
                }
            }
            v.analysis = analyze(v.sql_text, catalog);
            if (coin(rng, 0.1)) {
                v.exec_ms = std::nullopt;
            } else {
                v.exec_ms = std::uniform_real_distribution<double>(0.1, 8000.0)(rng);
                v.timed_out = *v.exec_ms > 7500.0;
            }
            push(query_version_added(v));
        } else if (r < 0.7) {
            std::vector<QuestionId> pending;
            for (const auto& [id, rec] : s.questions())
                if (rec->answers.size() < rec->queries.size()) pending.push_back(id);
            if (pending.empty()) continue;
            const auto& qid = pick(rng, pending);
            const int no = static_cast<int>(s.find_question(qid)->answers.size()) + 1;
            push(answer_recorded({qid, no, "digest-" + std::to_string(rng()), std::uniform_real_distribution<double>(0, 1)(rng)}));
        } else if (r < 0.8) {
            std::vector<const QueryVersion*> joins;
            for (const auto& [id, rec] : s.questions())
                if (const auto* q = rec->latest_query(); q && q->analysis.join_count > 0 &&
                                                         pattern_is_viewable(q->analysis.join_pattern_key))
                    joins.push_back(q);
            if (joins.empty()) continue;
            const auto* q = pick(rng, joins);
            if (s.find_view_by_name(view_name_for_pattern(q->analysis.join_pattern_key))) continue;
            bool base_only = std::all_of(q->analysis.referenced_tables.begin(), q->analysis.referenced_tables.end(),
                                         [&](const TableId& t) { return s.find_table(t); });
            if (!base_only || q->sql_text.find("v_") != std::string::npos) continue;
            try {
                push(view_added(make_join_view(q->sql_text, SchemaCatalog::from_state(s), "view" + std::to_string(next_view++),
                                               static_cast<int>(out.size()))));
            } catch (const Error&) {
            }
        } else if (r < 0.9) {
            std::vector<QuestionId> free;
            for (const auto& [id, rec] : s.questions())
                if (!rec->topic) free.push_back(id);
            if (free.empty()) continue;
            push(topic_assigned({pick(rng, free), pick(rng, labels)}));
        } else {
            Contract c;
            c.entries.push_back({"table_coverage", std::uniform_real_distribution<double>(0.1, 1.0)(rng), Comparator::at_least});
            if (coin(rng, 0.5))
                c.entries.push_back({"avg_exec_speed", std::uniform_real_distribution<double>(10, 6000)(rng), Comparator::at_most});
            push(contract_changed(c));
        }
    }
    return out;
}

std::optional<double> oracle_metric(const std::string& metric_id, const DataProductState& state, const ContextScope& scope) {
    std::vector<const QueryVersion*> latest;
    for (const auto& [id, rec] : state.questions())
        if (!rec->queries.empty()) latest.push_back(&rec->queries.back());

    std::size_t total_columns = 0;
    for (const auto& [id, t] : state.tables()) total_columns += t->columns.size();

    if (metric_id == "question_count") return static_cast<double>(state.questions().size());
    if (metric_id == "table_coverage") {
        if (state.tables().empty()) return std::nullopt;
        std::set<TableId> hit;
        for (auto* q : latest)
            for (const auto& t : q->analysis.referenced_tables)
                if (state.find_table(t)) hit.insert(t);
        return static_cast<double>(hit.size()) / static_cast<double>(state.tables().size());
    }
    if (metric_id == "column_coverage") {
        std::set<std::pair<std::string, std::string>> hit;
        for (auto* q : latest)
            for (const auto& c : q->analysis.referenced_columns) {
                const auto* t = state.find_table(c.table);
                if (!t || !t->find_column(c.column)) continue;
                if (scope.level == ScopeLevel::table && c.table != scope.ids[0]) continue;
                hit.insert({c.table, c.column});
            }
        const double denom = scope.level == ScopeLevel::table
                                 ? static_cast<double>(state.find_table(scope.ids[0])->columns.size())
                                 : static_cast<double>(total_columns);
        if (denom == 0) return std::nullopt;
        return static_cast<double>(hit.size()) / denom;
    }
    double sum = 0;
    int n = 0;
    for (auto* q : latest) {
        std::optional<double> v;
        if (metric_id == "avg_query_length") v = q->analysis.token_count;
        else if (metric_id == "avg_query_complexity") v = complexity_score(q->analysis);
        else if (metric_id == "avg_exec_speed") v = q->exec_ms;
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

OrchestratorOptions deterministic_options(std::optional<fs::path> store_dir) {
    OrchestratorOptions o;
    auto exec = std::make_shared<double>(0.0);
    o.exec_clock = [exec] { return *exec += 0.75; };
    auto wall = std::make_shared<std::int64_t>(1'700'000'000'000);
    o.wall_clock = [wall] { return ++*wall; };
    o.store_dir = std::move(store_dir);
    return o;
}

Contract default_contract() {
    return {{{"table_coverage", 0.9, Comparator::at_least},
             {"column_coverage", 0.5, Comparator::at_least},
             {"avg_exec_speed", 5000, Comparator::at_most}}};
}

bool wait_for_pending(const Orchestrator& orch, int timeout_ms) {
    for (int waited = 0; waited < timeout_ms; waited += 5) {
        if (orch.pending_approval()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return false;
}

}  // namespace dpcc::test
