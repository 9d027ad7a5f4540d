#include "dpcc/baseline_tools.hpp"

#include "dpcc/error.hpp"
#include "dpcc/sql_analyzer.hpp"
#include "dpcc/sql_ast.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>

namespace dpcc {

namespace {

void validate(std::string_view tool, const ToolInvocation& inv) {
    static const auto descriptors = baseline_tool_descriptors();
    for (const auto& d : descriptors) {
        if (d.name == tool) {
            d.validate_params(inv.parameters);
            return;
        }
    }
}

int int_param(const ToolInvocation& inv, const char* name) { return inv.parameters.at(name).get<int>(); }

std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, end);
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

const std::set<std::string>& reserved_words() {
    static const std::set<std::string> words = {
        "ALL",   "AND",   "AS",     "ASC",    "BETWEEN", "BY",     "CASE",  "CAST",   "CROSS",  "DESC",
        "DISTINCT", "ELSE", "END",  "EXCEPT", "EXISTS",  "FROM",   "FULL",  "GROUP",  "HAVING", "IN",
        "INNER", "INTERSECT", "IS", "JOIN",   "LEFT",    "LIKE",   "LIMIT", "NATURAL", "NOT",   "NULL",
        "OFFSET", "ON",   "OR",     "ORDER",  "OUTER",   "RIGHT",  "SELECT", "THEN",  "UNION",  "USING",
        "WHEN",  "WHERE", "WITH",   "TRUE",   "FALSE"};
    return words;
}

std::string ident(std::string_view name) {
    bool plain = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_');
    for (char c : name) plain = plain && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
    std::string upper(name);
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (plain && !reserved_words().count(upper)) return std::string(name);
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::size_t children_of(const DataProductState& s, const QuestionId& qid) {
    std::size_t n = 0;
    for (const auto& [id, rec] : s.questions())
        if (rec->question.parent_question == qid) ++n;
    return n;
}

class IdAllocator {
public:
    explicit IdAllocator(const DataProductState& s) : state_(s) {}

    QuestionId next() {
        for (;;) {
            ++counter_;
            char buf[16];
            std::snprintf(buf, sizeof buf, "q%04zu", counter_);
            QuestionId id(buf);
            if (!state_.find_question(id) && taken_.insert(id).second) return id;
        }
    }

private:
    const DataProductState& state_;
    std::size_t counter_ = 0;
    std::set<QuestionId> taken_;
};

int next_version_no(const DataProductState& s, const QuestionId& qid, bool answers) {
    const auto* rec = s.find_question(qid);
    if (!rec) return 1;
    return static_cast<int>(answers ? rec->answers.size() : rec->queries.size()) + 1;
}

// ---------------------------------------------------------------------------
// Question generation

struct Candidate {
    std::string text;
    std::set<SchemaTarget> targets;
    std::set<ColumnRef> columns;
};

enum class Role { key, measure, temporal, dimension };

Role role_of(const TableMeta& t, const ColumnMeta& c) {
    if (is_key_column(t, c)) return Role::key;
    if (c.data_kind == DataKind::numeric) return Role::measure;
    if (c.data_kind == DataKind::temporal) return Role::temporal;
    return Role::dimension;
}

std::vector<const ColumnMeta*> columns_with(const TableMeta& t, Role role) {
    std::vector<const ColumnMeta*> out;
    for (const auto& c : t.columns)
        if (role_of(t, c) == role) out.push_back(&c);
    return out;
}

std::vector<Candidate> candidates_for(const TableMeta& t, const DataProductState& s) {
    std::vector<Candidate> out;
    auto add = [&](std::string text, std::vector<std::pair<const TableMeta*, const ColumnMeta*>> cols, bool whole_table) {
        Candidate c;
        c.text = std::move(text);
        if (whole_table) c.targets.insert({t.table_id, std::nullopt});
        for (const auto& [tab, col] : cols) {
            c.targets.insert({tab->table_id, col->name});
            c.columns.insert({tab->table_id, col->name});
        }
        out.push_back(std::move(c));
    };
    const auto measures = columns_with(t, Role::measure);
    const auto dims = columns_with(t, Role::dimension);
    const auto times = columns_with(t, Role::temporal);

    for (const auto& fk : t.foreign_keys) {
        const auto* r = s.find_table(fk.remote_table);
        if (!r || r == &t || r->table_id == t.table_id) continue;
        const auto* local = t.find_column(fk.local_column);
        const auto* remote = r->find_column(fk.remote_column);
        if (!local || !remote) continue;
        for (const auto* rd : columns_with(*r, Role::dimension)) {
            for (const auto* m : measures) {
                add("What is the total " + m->name + " in " + t.name + " by " + rd->name + " of " + r->name + "?",
                    {{&t, m}, {&t, local}, {r, remote}, {r, rd}}, false);
            }
            add("How many " + t.name + " are there per " + rd->name + " of " + r->name + "?",
                {{&t, local}, {r, remote}, {r, rd}}, true);
        }
    }
    for (const auto* m : measures) {
        for (const auto* d : dims) {
            add("What is the total " + m->name + " by " + d->name + " in " + t.name + "?", {{&t, m}, {&t, d}}, false);
            add("What is the average " + m->name + " by " + d->name + " in " + t.name + "?", {{&t, m}, {&t, d}}, false);
        }
    }
    for (const auto* time : times) {
        for (const auto* m : measures) {
            add("How does the total " + m->name + " in " + t.name + " change over " + time->name + "?",
                {{&t, m}, {&t, time}}, false);
        }
        add("How does the number of " + t.name + " change over " + time->name + "?", {{&t, time}}, true);
    }
    for (const auto* d : dims) add("How many " + t.name + " are there per " + d->name + "?", {{&t, d}}, true);
    for (const auto* m : measures) {
        add("What is the maximum " + m->name + " in " + t.name + "?", {{&t, m}}, false);
        add("What is the minimum " + m->name + " in " + t.name + "?", {{&t, m}}, false);
    }
    for (const auto& c : t.columns) add("List the distinct " + c.name + " values in " + t.name + ".", {{&t, &c}}, false);
    return out;
}

// ---------------------------------------------------------------------------
// Text-to-SQL

enum class Intent { sum, avg, max, min, count, trend, lookup };

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::optional<Intent> intent_of(std::string_view text) {
    if (starts_with(text, "How does the ") && text.find(" change over ") != std::string_view::npos) return Intent::trend;
    if (starts_with(text, "List ")) return Intent::lookup;
    if (starts_with(text, "What is the total ")) return Intent::sum;
    if (starts_with(text, "What is the average ")) return Intent::avg;
    if (starts_with(text, "What is the maximum ")) return Intent::max;
    if (starts_with(text, "What is the minimum ")) return Intent::min;
    if (starts_with(text, "How many ")) return Intent::count;

    const auto words = words_of(text);
    auto has = [&](std::initializer_list<std::string_view> any) {
        for (const auto& w : words)
            for (auto a : any)
                if (w == a) return true;
        return false;
    };
    if (has({"trend", "over"})) return Intent::trend;
    if (has({"list", "show", "which"})) return Intent::lookup;
    if (has({"total", "sum", "revenue"})) return Intent::sum;
    if (has({"average", "avg", "mean"})) return Intent::avg;
    if (has({"maximum", "max", "highest", "largest"})) return Intent::max;
    if (has({"minimum", "min", "lowest", "smallest"})) return Intent::min;
    if (has({"many", "count", "number"})) return Intent::count;
    return std::nullopt;
}

struct JoinEdge {
    TableId from;
    std::string from_column;
    TableId to;
    std::string to_column;
};

// Shortest foreign-key paths from `root` to every table in `needed`, in BFS
// order so each join only references tables already in scope.
std::optional<std::vector<JoinEdge>> join_plan(const DataProductState& s, const TableId& root,
                                               const std::set<TableId>& needed) {
    std::map<TableId, std::vector<JoinEdge>> adj;
    for (const auto& [id, t] : s.tables()) {
        for (const auto& fk : t->foreign_keys) {
            if (fk.remote_table == id || !s.find_table(fk.remote_table)) continue;
            adj[id].push_back({id, fk.local_column, fk.remote_table, fk.remote_column});
            adj[fk.remote_table].push_back({fk.remote_table, fk.remote_column, id, fk.local_column});
        }
    }
    for (auto& [id, edges] : adj) {
        std::stable_sort(edges.begin(), edges.end(), [](const JoinEdge& a, const JoinEdge& b) {
            return std::tie(a.to, a.from_column) < std::tie(b.to, b.from_column);
        });
    }
    std::map<TableId, JoinEdge> via;
    std::vector<TableId> order{root};
    std::set<TableId> seen{root};
    std::deque<TableId> queue{root};
    while (!queue.empty()) {
        auto cur = queue.front();
        queue.pop_front();
        for (const auto& e : adj[cur]) {
            if (!seen.insert(e.to).second) continue;
            via.emplace(e.to, e);
            order.push_back(e.to);
            queue.push_back(e.to);
        }
    }
    std::set<TableId> keep{root};
    for (const auto& t : needed) {
        if (!seen.count(t)) return std::nullopt;
        for (TableId cur = t; cur != root; cur = via.at(cur).from) keep.insert(cur);
    }
    std::vector<JoinEdge> plan;
    for (const auto& t : order)
        if (t != root && keep.count(t)) plan.push_back(via.at(t));
    return plan;
}

}  // namespace

bool is_key_column(const TableMeta& table, const ColumnMeta& column) {
    const auto lower = to_lower(column.name);
    if (lower == "id" || (lower.size() > 3 && lower.compare(lower.size() - 3, 3, "_id") == 0)) return true;
    for (const auto& fk : table.foreign_keys)
        if (iequals(fk.local_column, column.name)) return true;
    return false;
}

QuestionId next_question_id(const DataProductState& snapshot, std::size_t offset) {
    IdAllocator ids(snapshot);
    QuestionId id = ids.next();
    for (std::size_t i = 0; i < offset; ++i) id = ids.next();
    return id;
}

std::optional<std::string> synthesize_sql(const Question& question, const DataProductState& s) {
    if (question.schema_targets.empty()) return std::nullopt;
    const auto intent = intent_of(question.text);

    std::set<TableId> tables;
    std::optional<TableId> whole_table;
    std::vector<ColumnRef> measures, temporals, dims;
    for (const auto& target : question.schema_targets) {
        const auto* t = s.find_table(target.table);
        if (!t) return std::nullopt;
        tables.insert(t->table_id);
        if (!target.column) {
            if (!whole_table) whole_table = t->table_id;
            continue;
        }
        const auto* c = t->find_column(*target.column);
        if (!c) return std::nullopt;
        ColumnRef ref{t->table_id, c->name};
        switch (role_of(*t, *c)) {
            case Role::key:
                if (intent == Intent::lookup) dims.push_back(ref);
                break;
            case Role::measure: measures.push_back(ref); break;
            case Role::temporal: temporals.push_back(ref); break;
            case Role::dimension: dims.push_back(ref); break;
        }
    }

    Intent kind = intent.value_or(!measures.empty() ? Intent::sum : (!dims.empty() ? Intent::count : Intent::lookup));
    std::optional<ColumnRef> measure;
    const bool aggregating = kind == Intent::sum || kind == Intent::avg || kind == Intent::max ||
                             kind == Intent::min || kind == Intent::trend;
    if (aggregating && !measures.empty()) {
        measure = measures.front();
        for (std::size_t i = 1; i < measures.size(); ++i) dims.push_back(measures[i]);
    } else {
        dims.insert(dims.end(), measures.begin(), measures.end());
        if (kind != Intent::trend && kind != Intent::lookup && kind != Intent::count) kind = Intent::count;
    }
    std::optional<ColumnRef> time;
    if (kind == Intent::trend) {
        if (temporals.empty()) {
            kind = measure ? Intent::sum : Intent::count;
        } else {
            time = temporals.front();
            for (std::size_t i = 1; i < temporals.size(); ++i) dims.push_back(temporals[i]);
        }
    } else {
        dims.insert(dims.end(), temporals.begin(), temporals.end());
    }
    if (kind == Intent::lookup && dims.empty() && measure) dims.push_back(*measure);
    if (kind == Intent::lookup && dims.empty()) return std::nullopt;

    const TableId root = measure ? measure->table : whole_table ? *whole_table : *tables.begin();
    auto plan = join_plan(s, root, tables);
    if (!plan) return std::nullopt;
    const bool multi = !plan->empty();

    auto col = [&](const ColumnRef& c) {
        const auto* t = s.find_table(c.table);
        return multi ? ident(t->name) + "." + ident(c.column) : ident(c.column);
    };
    auto table_name = [&](const TableId& id) { return ident(s.find_table(id)->name); };

    std::vector<std::string> group;
    if (time) group.push_back(col(*time));
    for (const auto& d : dims) {
        auto g = col(d);
        if (std::find(group.begin(), group.end(), g) == group.end()) group.push_back(g);
    }

    std::string select;
    auto join_list = [](const std::vector<std::string>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
        return out;
    };
    std::string agg;
    switch (kind) {
        case Intent::sum: agg = "SUM(" + col(*measure) + ")"; break;
        case Intent::avg: agg = "AVG(" + col(*measure) + ")"; break;
        case Intent::max: agg = "MAX(" + col(*measure) + ")"; break;
        case Intent::min: agg = "MIN(" + col(*measure) + ")"; break;
        case Intent::trend: agg = measure ? "SUM(" + col(*measure) + ")" : "COUNT(*)"; break;
        case Intent::count: agg = "COUNT(*)"; break;
        case Intent::lookup: break;
    }

    std::string sql;
    if (kind == Intent::lookup) {
        sql = "SELECT DISTINCT " + join_list(group);
    } else {
        auto items = group;
        items.push_back(agg);
        sql = "SELECT " + join_list(items);
    }
    sql += " FROM " + table_name(root);
    for (const auto& e : *plan) {
        sql += " JOIN " + table_name(e.to) + " ON " + table_name(e.from) + "." + ident(e.from_column) + " = " +
               table_name(e.to) + "." + ident(e.to_column);
    }
    if (kind != Intent::lookup && !group.empty()) sql += " GROUP BY " + join_list(group);
    if (kind == Intent::trend) sql += " ORDER BY " + col(*time);
    return sql;
}

std::string topic_label(const QueryAnalysis& a, const DataProductState& s) {
    std::map<TableId, int> per_table;
    for (const auto& t : a.referenced_tables) per_table[t] = 0;
    bool temporal = false;
    for (const auto& c : a.referenced_columns) {
        ++per_table[c.table];
        if (const auto* t = s.find_table(c.table))
            if (const auto* meta = t->find_column(c.column); meta && meta->data_kind == DataKind::temporal)
                temporal = true;
    }
    TableId dominant;
    int best = -1;
    for (const auto& [t, n] : per_table) {
        if (n > best) {
            best = n;
            dominant = t;
        }
    }
    std::string kind;
    if (a.join_count > 0 || a.referenced_tables.size() > 1) kind = "join";
    else if (a.has_group_by && temporal) kind = "trend";
    else if (a.aggregate_count > 0 || a.has_group_by) kind = "aggregate";
    else kind = "lookup";
    return dominant + " \xC2\xB7 " + kind;
}

ToolResult run_question_generation(const ToolInvocation& inv, const DataProductState& s, Connector&) {
    validate(tool_names::question_generation, inv);
    const int n = int_param(inv, "n");
    if (s.tables().empty()) throw Error(ErrorCode::empty_schema, "no tables to generate questions for");

    std::vector<TableId> rotation;
    if (auto it = inv.parameters.find("priority_tables"); it != inv.parameters.end()) {
        for (const auto& t : *it) {
            const auto* meta = s.find_table(t.get<std::string>());
            if (!meta) throw Error(ErrorCode::validation, "unknown priority table: " + t.get<std::string>());
            if (std::find(rotation.begin(), rotation.end(), meta->table_id) == rotation.end())
                rotation.push_back(meta->table_id);
        }
    }
    if (rotation.empty()) {
        std::vector<const TableMeta*> all;
        for (const auto& [id, t] : s.tables()) all.push_back(t.get());
        std::stable_sort(all.begin(), all.end(), [](const TableMeta* a, const TableMeta* b) {
            return a->row_count_estimate > b->row_count_estimate;
        });
        for (const auto* t : all) rotation.push_back(t->table_id);
    }

    std::set<ColumnRef> covered = covered_columns(s);
    std::set<std::string> texts;
    for (const auto& [id, rec] : s.questions()) {
        texts.insert(rec->question.text);
        for (const auto& t : rec->question.schema_targets)
            if (t.column) covered.insert({t.table, *t.column});
    }

    std::mt19937_64 rng(inv.seed);
    std::map<TableId, std::vector<Candidate>> pools;
    std::map<TableId, std::size_t> offsets;
    for (const auto& t : rotation) {
        pools[t] = candidates_for(*s.find_table(t), s);
        offsets[t] = pools[t].empty() ? 0 : rng() % pools[t].size();
    }

    IdAllocator ids(s);
    ToolResult result;
    std::size_t exhausted = 0;
    for (std::size_t turn = 0; static_cast<int>(result.events.size()) < n && exhausted < rotation.size(); ++turn) {
        const auto& table = rotation[turn % rotation.size()];
        auto& pool = pools[table];
        // Prefer the candidate that touches the most not-yet-covered columns;
        // ties go to the seed-rotated template order.
        const Candidate* best = nullptr;
        std::size_t best_new = 0;
        for (std::size_t k = 0; k < pool.size(); ++k) {
            const auto& c = pool[(offsets[table] + k) % pool.size()];
            if (texts.count(c.text)) continue;
            std::size_t fresh = 0;
            for (const auto& col : c.columns) fresh += covered.count(col) ? 0 : 1;
            if (!best || fresh > best_new) {
                best = &c;
                best_new = fresh;
            }
        }
        if (!best) {
            ++exhausted;
            continue;
        }
        exhausted = 0;
        texts.insert(best->text);
        covered.insert(best->columns.begin(), best->columns.end());
        result.events.push_back(
            question_added({ids.next(), best->text, QuestionOrigin::generated, std::nullopt, best->targets}));
    }
    std::ostringstream log;
    log << "generated " << result.events.size() << " of " << n << " requested questions over " << rotation.size()
        << " table(s)";
    if (static_cast<int>(result.events.size()) < n) log << "; template space exhausted";
    result.log = log.str();
    return result;
}

namespace {

struct Executed {
    QueryVersion version;
    AnswerVersion answer;
};

// Analyzes and executes SQL; nullopt (with a reason) when it does not run.
std::optional<Executed> execute_version(const DataProductState& s, const SchemaCatalog& catalog, Connector& db,
                                        const QuestionId& qid, int version_no, int answer_no, std::string sql,
                                        std::string_view created_by, std::string& why,
                                        std::optional<std::string_view> exec_sql = std::nullopt) {
    (void)s;
    QueryAnalysis analysis;
    try {
        analysis = analyze(sql, catalog);
    } catch (const Error& e) {
        why = e.what();
        return std::nullopt;
    }
    auto outcome = db.execute_timed(exec_sql ? *exec_sql : std::string_view(sql));
    if (outcome.error) {
        why = *outcome.error;
        return std::nullopt;
    }
    Executed out;
    out.version = {qid, version_no, std::move(sql), std::string(created_by), std::move(analysis), outcome.elapsed_ms,
                   outcome.timed_out};
    out.answer = {qid, answer_no, outcome.rows_digest, 1.0};
    return out;
}

}  // namespace

ToolResult run_text_to_sql(const ToolInvocation& inv, const DataProductState& s, Connector& db) {
    validate(tool_names::text_to_sql, inv);
    const int m = int_param(inv, "m");
    std::vector<QuestionId> eligible;
    for (const auto& [id, rec] : s.questions())
        if (!rec->latest_query()) eligible.push_back(id);
    if (eligible.empty()) throw Error(ErrorCode::no_eligible_question, "every question already has SQL");

    const auto catalog = SchemaCatalog::from_state(s);
    ToolResult result;
    std::size_t done = 0, skipped = 0;
    std::ostringstream log;
    for (const auto& qid : eligible) {
        if (static_cast<int>(done) >= m) break;
        const auto& q = s.find_question(qid)->question;
        auto sql = synthesize_sql(q, s);
        std::string why = "targets are not connected by foreign keys";
        std::optional<Executed> ex;
        if (sql) ex = execute_version(s, catalog, db, qid, 1, next_version_no(s, qid, true), *sql,
                                      tool_names::text_to_sql, why);
        if (!ex) {
            ++skipped;
            log << "skipped " << qid << ": " << why << "; ";
            continue;
        }
        result.events.push_back(query_version_added(std::move(ex->version)));
        result.events.push_back(answer_recorded(std::move(ex->answer)));
        ++done;
    }
    log << "wrote SQL for " << done << " question(s)";
    if (skipped) log << ", skipped " << skipped;
    result.log = log.str();
    return result;
}

namespace {

std::optional<double> numeric(const SqlValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

std::optional<double> column_median(const ResultSet& rs, std::size_t index, bool require_all_numeric) {
    std::vector<double> values;
    for (const auto& row : rs.rows) {
        if (index >= row.size()) return std::nullopt;
        auto v = numeric(row[index]);
        if (!v) {
            if (require_all_numeric) return std::nullopt;
            continue;
        }
        values.push_back(*v);
    }
    if (values.empty()) return std::nullopt;
    std::sort(values.begin(), values.end());
    const auto mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
}

struct Extension {
    std::string sql;
    std::string suffix;
};

std::optional<Extension> extend(const std::string& parent_sql, int which, Connector& db) {
    auto q = sql::parse(parent_sql);
    bool has_star = false;
    for (const auto& core : q->cores)
        for (const auto& item : core.items) has_star = has_star || item.expr->kind == sql::ExprKind::star;

    switch (which) {
        case 0: {
            if (q->cores.size() != 1 || has_star) return std::nullopt;
            auto& core = q->cores[0];
            ResultSet rs;
            try {
                rs = db.query(parent_sql);
            } catch (const Error&) {
                return std::nullopt;
            }
            if (!core.group_by.empty()) {
                for (std::size_t i = core.items.size(); i-- > 0;) {
                    if (!sql::is_aggregate_call(*core.items[i].expr)) continue;
                    auto median = column_median(rs, i, false);
                    if (!median) continue;
                    auto cond = sql::make_binary(">", sql::clone(*core.items[i].expr), sql::make_literal(format_number(*median)));
                    core.having = sql::conjoin(std::move(core.having), std::move(cond));
                    return Extension{sql::to_sql(*q), "only groups above the median"};
                }
                return std::nullopt;
            }
            bool aggregates = false;
            for (const auto& item : core.items) aggregates = aggregates || sql::is_aggregate_call(*item.expr);
            if (aggregates) return std::nullopt;
            for (std::size_t i = 0; i < core.items.size(); ++i) {
                if (core.items[i].expr->kind != sql::ExprKind::column) continue;
                auto median = column_median(rs, i, true);
                if (!median) continue;
                auto cond = sql::make_binary(">", sql::clone(*core.items[i].expr), sql::make_literal(format_number(*median)));
                core.where = sql::conjoin(std::move(core.where), std::move(cond));
                return Extension{sql::to_sql(*q), "only rows above the median"};
            }
            return std::nullopt;
        }
        case 1: {
            const std::size_t ordinal = has_star ? 1 : q->cores[0].items.size();
            sql::OrderItem item;
            item.expr = sql::make_literal(std::to_string(ordinal));
            item.desc = true;
            item.explicit_direction = true;
            q->order_by.push_back(std::move(item));
            return Extension{sql::to_sql(*q), "sorted descending"};
        }
        default: {
            if (q->limit) return std::nullopt;
            q->limit = sql::make_literal("10");
            return Extension{sql::to_sql(*q), "top 10 only"};
        }
    }
}

std::string strip_question_mark(std::string text) {
    while (!text.empty() && (text.back() == '?' || text.back() == '.' || text.back() == ' ')) text.pop_back();
    return text;
}

}  // namespace

ToolResult run_followup_generation(const ToolInvocation& inv, const DataProductState& s, Connector& db) {
    validate(tool_names::followup_generation, inv);
    const int k = int_param(inv, "k");

    struct Parent {
        QuestionId id;
        std::size_t children;
        int tokens;
    };
    std::vector<Parent> parents;
    double sum = 0.0;
    std::size_t with_sql = 0;
    for (const auto& [id, rec] : s.questions()) {
        if (const auto* q = rec->latest_query()) {
            sum += q->analysis.token_count;
            ++with_sql;
        }
    }
    if (with_sql == 0) throw Error(ErrorCode::no_parent_available, "no question has SQL yet");
    const double mean = sum / static_cast<double>(with_sql);
    for (const auto& [id, rec] : s.questions()) {
        const auto* q = rec->latest_query();
        if (!q || q->analysis.token_count < mean) continue;
        const auto n = children_of(s, id);
        if (n >= 3) continue;
        parents.push_back({id, n, q->analysis.token_count});
    }
    std::stable_sort(parents.begin(), parents.end(), [](const Parent& a, const Parent& b) {
        if (a.children != b.children) return a.children < b.children;
        return a.tokens > b.tokens;
    });

    const auto catalog = SchemaCatalog::from_state(s);
    IdAllocator ids(s);
    ToolResult result;
    int made = 0;
    for (const auto& p : parents) {
        if (made >= k) break;
        const auto& rec = *s.find_question(p.id);
        const auto& parent_sql = rec.latest_query()->sql_text;
        for (int attempt = 0; attempt < 3; ++attempt) {
            const int which = static_cast<int>((p.children + static_cast<std::size_t>(attempt)) % 3);
            std::optional<Extension> ext;
            try {
                ext = extend(parent_sql, which, db);
            } catch (const Error&) {
                break;
            }
            if (!ext) continue;
            const auto qid = ids.next();
            std::string why;
            auto ex = execute_version(s, catalog, db, qid, 1, 1, ext->sql, tool_names::followup_generation, why);
            if (!ex || ex->version.analysis.token_count <= p.tokens) continue;
            Question child{qid, strip_question_mark(rec.question.text) + " (" + ext->suffix + ")?",
                           QuestionOrigin::followup, p.id, rec.question.schema_targets};
            result.events.push_back(question_added(std::move(child)));
            result.events.push_back(query_version_added(std::move(ex->version)));
            result.events.push_back(answer_recorded(std::move(ex->answer)));
            ++made;
            break;
        }
    }
    if (made == 0) throw Error(ErrorCode::no_parent_available, "no question admits a follow-up extension");
    result.log = "generated " + std::to_string(made) + " follow-up question(s)";
    return result;
}

ToolResult run_view_creation(const ToolInvocation& inv, const DataProductState& s, Connector& db) {
    validate(tool_names::view_creation, inv);
    const int v = int_param(inv, "v");
    auto shared = shared_join_patterns(s);
    if (shared.empty()) throw Error(ErrorCode::no_shared_pattern, "no join pattern is shared by two queries");

    std::vector<std::pair<std::string, std::vector<QuestionId>>> ranked(shared.begin(), shared.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second.size() > b.second.size(); });
    if (static_cast<int>(ranked.size()) > v) ranked.resize(static_cast<std::size_t>(v));

    auto catalog = SchemaCatalog::from_state(s);
    ToolResult result;
    std::ostringstream log;
    std::size_t views = 0, rewrites = 0;
    for (const auto& [key, qids] : ranked) {
        const auto name = view_name_for_pattern(key);
        std::optional<ViewDef> view;
        bool fresh = false;
        if (const auto* existing = s.find_view_by_name(name)) {
            view = *existing;
        } else {
            try {
                view = make_join_view(s.find_question(qids.front())->latest_query()->sql_text, catalog, name,
                                      inv.iteration);
                catalog.add_view(*view);
                fresh = true;
            } catch (const Error& e) {
                log << "pattern '" << key << "' skipped: " << e.what() << "; ";
                continue;
            }
        }

        std::vector<StateEvent> events;
        for (const auto& qid : qids) {
            const auto& original = *s.find_question(qid)->latest_query();
            std::string rewritten;
            try {
                rewritten = rewrite_with_view(original.sql_text, *view, catalog);
            } catch (const Error& e) {
                log << qid << " not rewritten: " << e.what() << "; ";
                continue;
            }
            const auto before = db.execute_timed(original.sql_text);
            // The view may not exist in the database yet; inline it for the check.
            const std::string inlined = "WITH " + view->name + " AS (" + view->sql_text + ") " + rewritten;
            std::string why;
            auto ex = execute_version(s, catalog, db, qid, original.version_no + 1, next_version_no(s, qid, true),
                                      rewritten, tool_names::view_creation, why, inlined);
            if (!ex) {
                log << qid << " rewrite failed: " << why << "; ";
                continue;
            }
            if (!before.ok() || before.rows_digest != ex->answer.payload_digest) {
                log << qid << " rewrite changes the result; kept original; ";
                continue;
            }
            events.push_back(query_version_added(std::move(ex->version)));
            events.push_back(answer_recorded(std::move(ex->answer)));
        }
        if (events.empty()) {
            log << "no query rewritten for pattern '" << key << "'; ";
            continue;
        }
        if (fresh) {
            result.events.push_back(view_added(*view));
            ++views;
        }
        rewrites += events.size() / 2;
        for (auto& e : events) result.events.push_back(std::move(e));
    }
    log << "created " << views << " view(s), rewrote " << rewrites << " query(ies)";
    result.log = log.str();
    return result;
}

ToolResult run_topic_mapping(const ToolInvocation& inv, const DataProductState& s, Connector&) {
    validate(tool_names::topic_mapping, inv);
    ToolResult result;
    for (const auto& qid : unclustered_questions(s)) {
        const auto* q = s.find_question(qid)->latest_query();
        result.events.push_back(topic_assigned({qid, topic_label(q->analysis, s)}));
    }
    result.log = result.events.empty() ? "every question already has a topic"
                                       : "assigned topics to " + std::to_string(result.events.size()) + " question(s)";
    return result;
}

namespace {

class FnTool final : public Tool {
public:
    using Fn = ToolResult (*)(const ToolInvocation&, const DataProductState&, Connector&);
    FnTool(std::string_view name, Fn fn) : name_(name), fn_(fn) {}

    std::string_view name() const override { return name_; }
    ToolResult run(const ToolInvocation& inv, const DataProductState& snapshot, Connector& db) override {
        return fn_(inv, snapshot, db);
    }

private:
    std::string name_;
    Fn fn_;
};

}  // namespace

ToolSet make_baseline_tools() {
    ToolSet out;
    auto add = [&](std::string_view name, FnTool::Fn fn) { out.emplace(std::string(name), std::make_unique<FnTool>(name, fn)); };
    add(tool_names::question_generation, run_question_generation);
    add(tool_names::text_to_sql, run_text_to_sql);
    add(tool_names::followup_generation, run_followup_generation);
    add(tool_names::view_creation, run_view_creation);
    add(tool_names::topic_mapping, run_topic_mapping);
    return out;
}

}  // namespace dpcc
