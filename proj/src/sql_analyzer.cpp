#include "dpcc/sql_analyzer.hpp"

#include "dpcc/error.hpp"
#include "dpcc/hash.hpp"
#include "dpcc/sql_ast.hpp"

#include <algorithm>
#include <map>

namespace dpcc {

using sql::Expr;
using sql::ExprKind;
using sql::ExprPtr;
using sql::Query;
using sql::SelectCore;

namespace {

constexpr std::string_view kInnerJoin = "⋈";  // ⋈
constexpr std::string_view kLeftJoin = "⟕";   // ⟕
constexpr std::string_view kNoEquiJoin = "×";  // ×

struct Source {
    std::string alias_lower;
    const TableMeta* table = nullptr;
    const ViewShape* view = nullptr;

    std::string base_name() const { return table ? table->name : view->name; }

    std::optional<std::string> column(std::string_view name) const {
        if (table) {
            if (const auto* c = table->find_column(name)) return c->name;
            return std::nullopt;
        }
        if (const auto* o = view->find(name)) return o->name;
        return std::nullopt;
    }

    std::vector<std::string> all_columns() const {
        std::vector<std::string> out;
        if (table) {
            for (const auto& c : table->columns) out.push_back(c.name);
        } else {
            for (const auto& o : view->outputs) out.push_back(o.name);
        }
        return out;
    }
};

struct Scope {
    const SelectCore* core = nullptr;
    std::vector<Source> sources;
    const Scope* parent = nullptr;
};

[[noreturn]] void unresolved(const std::string& msg) { throw Error(ErrorCode::unresolved_identifier, msg); }

class Analyzer {
public:
    Analyzer(const SchemaCatalog& catalog, QueryAnalysis& out) : cat_(catalog), out_(out) {}

    // Per-item / per-clause column sinks for the top select core; used to
    // derive view shapes.
    std::vector<std::set<ColumnRef>>* item_sinks = nullptr;
    std::set<ColumnRef>* clause_sink = nullptr;

    Scope top_scope;

    void run(Query& q) { query(q, nullptr, 0, true); }

private:
    void query(Query& q, const Scope* parent, int depth, bool is_top) {
        out_.subquery_depth = std::max(out_.subquery_depth, depth);
        out_.set_op_count += static_cast<int>(q.cores.size()) - 1;
        Scope first;
        for (std::size_t i = 0; i < q.cores.size(); ++i) {
            Scope s = core(q.cores[i], parent, depth, is_top && i == 0);
            if (i == 0) first = std::move(s);
        }
        for (auto& o : q.order_by) expr(*o.expr, first, depth, &q.cores[0], true);
        if (q.limit) expr(*q.limit, first, depth, nullptr, false);
        if (q.offset) expr(*q.offset, first, depth, nullptr, false);
        if (is_top) top_scope = first;
    }

    Source make_source(const sql::TableRef& ref, const Scope& scope) {
        Source src;
        src.alias_lower = to_lower(ref.effective_name());
        for (const auto& s : scope.sources) {
            if (s.alias_lower == src.alias_lower) {
                throw Error(ErrorCode::parse_error, "duplicate table alias '" + ref.effective_name() + "'");
            }
        }
        if ((src.table = cat_.find_table(ref.name))) {
            out_.referenced_tables.insert(src.table->table_id);
        } else if ((src.view = cat_.find_view(ref.name))) {
            out_.referenced_tables.insert(src.view->base_tables.begin(), src.view->base_tables.end());
            out_.referenced_columns.insert(src.view->intrinsic_columns.begin(), src.view->intrinsic_columns.end());
            if (clause_sink && depth_zero_top_) {
                clause_sink->insert(src.view->intrinsic_columns.begin(), src.view->intrinsic_columns.end());
            }
        } else {
            unresolved("unknown table '" + ref.name + "'");
        }
        return src;
    }

    Scope core(SelectCore& c, const Scope* parent, int depth, bool is_top_core) {
        Scope scope;
        scope.core = &c;
        scope.parent = parent;
        depth_zero_top_ = is_top_core;
        scope.sources.push_back(make_source(c.from, scope));
        for (auto& j : c.joins) scope.sources.push_back(make_source(j.table, scope));
        depth_zero_top_ = false;
        out_.join_count += static_cast<int>(c.joins.size());
        if (!c.group_by.empty()) out_.has_group_by = true;
        if (c.having) out_.has_having = true;

        for (std::size_t i = 0; i < c.items.size(); ++i) {
            std::set<ColumnRef>* saved = extra_;
            if (is_top_core && item_sinks) {
                item_sinks->emplace_back();
                extra_ = &item_sinks->back();
            }
            auto& e = *c.items[i].expr;
            if (e.kind == ExprKind::star) {
                star(e, scope);
            } else {
                expr(e, scope, depth, nullptr, false);
            }
            extra_ = saved;
        }

        std::set<ColumnRef>* saved = extra_;
        if (is_top_core && clause_sink) extra_ = clause_sink;
        for (auto& j : c.joins) expr(*j.on, scope, depth, nullptr, false);
        if (c.where) expr(*c.where, scope, depth, nullptr, false);
        for (auto& g : c.group_by) expr(*g, scope, depth, &c, false);
        if (c.having) expr(*c.having, scope, depth, &c, false);
        extra_ = saved;
        return scope;
    }

    void add_column(const Source& src, const std::string& column) {
        if (src.table) {
            insert({src.table->table_id, column});
        } else if (const auto* o = src.view->find(column)) {
            for (const auto& b : o->base) insert(b);
        }
    }

    void insert(const ColumnRef& ref) {
        out_.referenced_columns.insert(ref);
        if (extra_) extra_->insert(ref);
    }

    void star(Expr& e, const Scope& scope) {
        bool matched = false;
        for (const auto& src : scope.sources) {
            if (!e.qualifier.empty() && src.alias_lower != to_lower(e.qualifier)) continue;
            matched = true;
            for (const auto& col : src.all_columns()) add_column(src, col);
        }
        if (!matched) unresolved("unknown table '" + e.qualifier + "' in " + e.qualifier + ".*");
    }

    static bool is_alias(const SelectCore* alias_core, std::string_view name) {
        if (!alias_core) return false;
        return std::any_of(alias_core->items.begin(), alias_core->items.end(),
                           [&](const sql::SelectItem& it) { return !it.alias.empty() && iequals(it.alias, name); });
    }

    void bind(Expr& e, const Scope& scope, int index, const std::string& column) {
        e.bound_core = scope.core;
        e.bound_source = index;
        e.text = column;
        add_column(scope.sources[static_cast<std::size_t>(index)], column);
    }

    void column(Expr& e, const Scope& scope, const SelectCore* alias_core, bool alias_first) {
        if (!e.qualifier.empty()) {
            const std::string q = to_lower(e.qualifier);
            for (const Scope* s = &scope; s; s = s->parent) {
                for (std::size_t i = 0; i < s->sources.size(); ++i) {
                    if (s->sources[i].alias_lower != q) continue;
                    auto col = s->sources[i].column(e.text);
                    if (!col) unresolved("unknown column '" + e.qualifier + "." + e.text + "'");
                    bind(e, *s, static_cast<int>(i), *col);
                    return;
                }
            }
            unresolved("unknown table or alias '" + e.qualifier + "'");
        }
        if (alias_first && is_alias(alias_core, e.text)) return;
        for (const Scope* s = &scope; s; s = s->parent) {
            int found = -1;
            std::string found_col;
            for (std::size_t i = 0; i < s->sources.size(); ++i) {
                if (auto col = s->sources[i].column(e.text)) {
                    if (found >= 0) unresolved("ambiguous column '" + e.text + "'");
                    found = static_cast<int>(i);
                    found_col = *col;
                }
            }
            if (found >= 0) {
                bind(e, *s, found, found_col);
                return;
            }
            if (s == &scope && is_alias(alias_core, e.text)) return;
        }
        unresolved("unknown column '" + e.text + "'");
    }

    void expr(Expr& e, const Scope& scope, int depth, const SelectCore* alias_core, bool alias_first) {
        switch (e.kind) {
            case ExprKind::column:
                column(e, scope, alias_core, alias_first);
                return;
            case ExprKind::star:
                return;  // COUNT(*)
            case ExprKind::function:
                if (sql::is_aggregate_call(e)) ++out_.aggregate_count;
                break;
            case ExprKind::in_subquery:
            case ExprKind::exists:
            case ExprKind::scalar_subquery:
                query(*e.subquery, &scope, depth + 1, false);
                break;
            default:
                break;
        }
        for (auto& a : e.args) expr(*a, scope, depth, alias_core, alias_first);
    }

    const SchemaCatalog& cat_;
    QueryAnalysis& out_;
    std::set<ColumnRef>* extra_ = nullptr;
    bool depth_zero_top_ = false;
};

struct Parsed {
    sql::QueryPtr query;
    QueryAnalysis analysis;
    Scope top;
};

Parsed parse_and_analyze(std::string_view sql_text, const SchemaCatalog& schema,
                         std::vector<std::set<ColumnRef>>* item_sinks = nullptr,
                         std::set<ColumnRef>* clause_sink = nullptr);

void split_conjuncts(Expr& e, std::vector<Expr*>& out) {
    if (e.kind == ExprKind::binary && e.text == "AND") {
        split_conjuncts(*e.args[0], out);
        split_conjuncts(*e.args[1], out);
    } else if (e.kind == ExprKind::paren && e.args[0]->kind == ExprKind::binary && e.args[0]->text == "AND") {
        split_conjuncts(*e.args[0], out);
    } else {
        out.push_back(&e);
    }
}

struct JoinAtom {
    int left_source = -1;
    std::string left_column;
    int right_source = -1;
    std::string right_column;
};

// An equality between columns of two different FROM sources of `core`.
std::optional<JoinAtom> as_atom(const Expr& e, const SelectCore& core) {
    if (e.kind != ExprKind::binary || (e.text != "=" && e.text != "==")) return std::nullopt;
    const Expr& a = *e.args[0];
    const Expr& b = *e.args[1];
    if (a.kind != ExprKind::column || b.kind != ExprKind::column) return std::nullopt;
    if (a.bound_core != &core || b.bound_core != &core || a.bound_source == b.bound_source) return std::nullopt;
    return JoinAtom{a.bound_source, a.text, b.bound_source, b.text};
}

std::string pattern_key(const SelectCore& core, const Scope& scope) {
    if (core.joins.empty()) return {};
    std::vector<std::string> atoms;
    for (std::size_t j = 0; j < core.joins.size(); ++j) {
        const auto& join = core.joins[j];
        std::vector<Expr*> conj;
        split_conjuncts(*join.on, conj);
        bool any = false;
        for (Expr* c : conj) {
            auto atom = as_atom(*c, core);
            if (!atom) continue;
            any = true;
            std::string lt = to_lower(scope.sources[static_cast<std::size_t>(atom->left_source)].base_name());
            std::string lc = to_lower(atom->left_column);
            std::string rt = to_lower(scope.sources[static_cast<std::size_t>(atom->right_source)].base_name());
            std::string rc = to_lower(atom->right_column);
            if (std::tie(rt, rc) < std::tie(lt, lc)) {
                std::swap(lt, rt);
                std::swap(lc, rc);
            }
            const auto op = join.type == sql::JoinType::left ? kLeftJoin : kInnerJoin;
            atoms.push_back(lt + std::string(op) + rt + " on " + lc + "=" + rc);
        }
        if (!any) {
            atoms.push_back(std::string(kNoEquiJoin) + to_lower(scope.sources[j + 1].base_name()));
        }
    }
    std::sort(atoms.begin(), atoms.end());
    std::string key;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (i > 0) key += "; ";
        key += atoms[i];
    }
    return key;
}

Parsed parse_and_analyze(std::string_view sql_text, const SchemaCatalog& schema,
                         std::vector<std::set<ColumnRef>>* item_sinks, std::set<ColumnRef>* clause_sink) {
    Parsed p;
    auto tokens = sql::tokenize(sql_text);
    if (tokens.empty()) throw Error(ErrorCode::parse_error, "empty SQL");
    p.query = sql::parse(sql_text);
    p.analysis.token_count = static_cast<int>(tokens.size());
    Analyzer a(schema, p.analysis);
    a.item_sinks = item_sinks;
    a.clause_sink = clause_sink;
    a.run(*p.query);
    p.top = a.top_scope;
    p.analysis.join_pattern_key = pattern_key(p.query->cores[0], p.top);
    return p;
}

template <typename F>
void walk(Expr& e, const F& f);

template <typename F>
void walk(Query& q, const F& f) {
    for (auto& c : q.cores) {
        for (auto& it : c.items) walk(*it.expr, f);
        for (auto& j : c.joins) walk(*j.on, f);
        if (c.where) walk(*c.where, f);
        for (auto& g : c.group_by) walk(*g, f);
        if (c.having) walk(*c.having, f);
    }
    for (auto& o : q.order_by) walk(*o.expr, f);
    if (q.limit) walk(*q.limit, f);
    if (q.offset) walk(*q.offset, f);
}

template <typename F>
void walk(Expr& e, const F& f) {
    f(e);
    for (auto& a : e.args) walk(*a, f);
    if (e.subquery) walk(*e.subquery, f);
}

std::string output_column_name(const std::string& table, const std::string& column) {
    return table + "__" + column;
}

}  // namespace

const ViewShape::Output* ViewShape::find(std::string_view column) const {
    for (const auto& o : outputs) {
        if (iequals(o.name, column)) return &o;
    }
    return nullptr;
}

SchemaCatalog SchemaCatalog::from_state(const DataProductState& state) {
    SchemaCatalog cat;
    for (const auto& [id, t] : state.tables()) cat.add_table(*t);
    for (const auto& [id, v] : state.views()) cat.add_view(*v);
    return cat;
}

void SchemaCatalog::add_table(TableMeta table) { tables_.push_back(std::move(table)); }

void SchemaCatalog::add_view(const ViewDef& view) {
    if (find_table(view.name) || find_view(view.name)) {
        throw Error(ErrorCode::name_collision, "name '" + view.name + "' already in catalog");
    }
    std::vector<std::set<ColumnRef>> items;
    std::set<ColumnRef> clauses;
    Parsed p = parse_and_analyze(view.sql_text, *this, &items, &clauses);
    const auto& core = p.query->cores[0];
    ViewShape shape;
    shape.name = view.name;
    shape.covers_pattern = view.covers_pattern;
    shape.base_tables = p.analysis.referenced_tables;
    shape.intrinsic_columns = std::move(clauses);
    for (std::size_t i = 0; i < core.items.size(); ++i) {
        const auto& item = core.items[i];
        const Expr& e = *item.expr;
        if (e.kind == ExprKind::star) {
            for (const auto& src : p.top.sources) {
                if (!e.qualifier.empty() && src.alias_lower != to_lower(e.qualifier)) continue;
                for (const auto& col : src.all_columns()) {
                    ViewShape::Output o;
                    o.name = col;
                    if (src.table) {
                        o.base = {{src.table->table_id, col}};
                        o.direct = ColumnRef{src.table->table_id, col};
                    } else if (const auto* vo = src.view->find(col)) {
                        o.base = vo->base;
                        o.direct = vo->direct;
                    }
                    shape.outputs.push_back(std::move(o));
                }
            }
            continue;
        }
        ViewShape::Output o;
        o.name = !item.alias.empty() ? item.alias : (e.kind == ExprKind::column ? e.text : sql::to_sql(e));
        o.base = items[i];
        if (e.kind == ExprKind::column && e.bound_core == &core && o.base.size() == 1) o.direct = *o.base.begin();
        shape.outputs.push_back(std::move(o));
    }
    views_.push_back(std::move(shape));
}

const TableMeta* SchemaCatalog::find_table(std::string_view name) const {
    for (const auto& t : tables_) {
        if (iequals(t.name, name)) return &t;
    }
    return nullptr;
}

const ViewShape* SchemaCatalog::find_view(std::string_view name) const {
    for (const auto& v : views_) {
        if (iequals(v.name, name)) return &v;
    }
    return nullptr;
}

QueryAnalysis analyze(std::string_view sql_text, const SchemaCatalog& schema) {
    return parse_and_analyze(sql_text, schema).analysis;
}

double complexity_score(const QueryAnalysis& a, const ComplexityWeights& w) {
    return w.base + w.join * a.join_count + w.subquery_depth * a.subquery_depth + w.aggregate * a.aggregate_count +
           w.group_by * (a.has_group_by ? 1 : 0) + w.having * (a.has_having ? 1 : 0) + w.set_op * a.set_op_count;
}

bool pattern_is_viewable(std::string_view key) {
    if (key.empty()) return false;
    if (key.find(kLeftJoin) != std::string_view::npos || key.find(kNoEquiJoin) != std::string_view::npos) {
        return false;
    }
    return true;
}

std::string view_name_for_pattern(std::string_view key) { return "v_" + sha256_hex(key).substr(0, 8); }

ViewDef make_join_view(std::string_view representative_sql, const SchemaCatalog& schema, std::string view_id,
                       int iteration) {
    Parsed p = parse_and_analyze(representative_sql, schema);
    const std::string& key = p.analysis.join_pattern_key;
    if (!pattern_is_viewable(key)) {
        throw Error(ErrorCode::pattern_mismatch, "join pattern '" + key + "' cannot be materialized as a view");
    }
    auto& core = p.query->cores[0];
    std::set<std::string> distinct;
    for (const auto& s : p.top.sources) {
        if (!s.table) throw Error(ErrorCode::pattern_mismatch, "view patterns must join base tables only");
        if (!distinct.insert(to_lower(s.table->name)).second) {
            throw Error(ErrorCode::pattern_mismatch, "self-joins cannot be materialized as a view");
        }
    }

    sql::Query view;
    SelectCore vc;
    for (const auto& s : p.top.sources) {
        for (const auto& col : s.table->columns) {
            sql::SelectItem item;
            item.expr = sql::make_column(s.table->name, col.name);
            item.alias = output_column_name(s.table->name, col.name);
            item.explicit_as = true;
            vc.items.push_back(std::move(item));
        }
    }
    vc.from = {p.top.sources[0].table->name, ""};
    for (std::size_t j = 0; j < core.joins.size(); ++j) {
        std::vector<Expr*> conj;
        split_conjuncts(*core.joins[j].on, conj);
        ExprPtr on;
        for (Expr* c : conj) {
            auto atom = as_atom(*c, core);
            if (!atom) continue;
            const auto& l = p.top.sources[static_cast<std::size_t>(atom->left_source)];
            const auto& r = p.top.sources[static_cast<std::size_t>(atom->right_source)];
            on = sql::conjoin(std::move(on), sql::make_binary("=", sql::make_column(l.table->name, atom->left_column),
                                                              sql::make_column(r.table->name, atom->right_column)));
        }
        vc.joins.push_back({sql::JoinType::inner, false, false, {p.top.sources[j + 1].table->name, ""}, std::move(on)});
    }
    view.cores.push_back(std::move(vc));

    ViewDef def;
    def.view_id = std::move(view_id);
    def.name = view_name_for_pattern(key);
    def.sql_text = sql::to_sql(view);
    def.covers_pattern = key;
    def.created_at_iteration = iteration;
    return def;
}

std::string rewrite_with_view(std::string_view sql_text, const ViewDef& view, const SchemaCatalog& schema) {
    const ViewShape* shape = schema.find_view(view.name);
    if (!shape) unresolved("view '" + view.name + "' is not in the catalog");
    Parsed p = parse_and_analyze(sql_text, schema);
    const std::string& key = p.analysis.join_pattern_key;
    if (key != view.covers_pattern || !pattern_is_viewable(key)) {
        throw Error(ErrorCode::pattern_mismatch,
                    "query pattern '" + key + "' does not match view pattern '" + view.covers_pattern + "'");
    }
    auto& core = p.query->cores[0];
    const auto& sources = p.top.sources;
    for (const auto& s : sources) {
        if (!s.table) throw Error(ErrorCode::pattern_mismatch, "query joins a view");
    }

    std::map<ColumnRef, std::string> out_name;
    for (const auto& o : shape->outputs) {
        if (o.direct) out_name.emplace(*o.direct, o.name);
    }
    auto view_column = [&](int source, const std::string& column) -> std::string {
        const auto* t = sources[static_cast<std::size_t>(source)].table;
        auto it = out_name.find(ColumnRef{t->table_id, column});
        if (it == out_name.end()) {
            throw Error(ErrorCode::pattern_mismatch, "view '" + view.name + "' does not expose " + t->name + "." + column);
        }
        return it->second;
    };

    // Non-join conjuncts of ON clauses move to WHERE (inner joins only, so equivalent).
    ExprPtr moved;
    for (auto& j : core.joins) {
        std::vector<Expr*> conj;
        split_conjuncts(*j.on, conj);
        for (Expr* c : conj) {
            if (!as_atom(*c, core)) moved = sql::conjoin(std::move(moved), sql::clone(*c));
        }
    }
    walk(*p.query, [&](Expr& e) {
        if (e.kind == ExprKind::column && e.bound_core == &core) {
            e.text = view_column(e.bound_source, e.text);
            e.qualifier = view.name;
        }
    });
    if (moved) {
        walk(*moved, [&](Expr& e) {
            if (e.kind == ExprKind::column && e.bound_core == &core) {
                e.text = view_column(e.bound_source, e.text);
                e.qualifier = view.name;
            }
        });
    }

    std::vector<sql::SelectItem> items;
    for (auto& item : core.items) {
        if (item.expr->kind != ExprKind::star) {
            items.push_back(std::move(item));
            continue;
        }
        for (std::size_t i = 0; i < sources.size(); ++i) {
            if (!item.expr->qualifier.empty() && sources[i].alias_lower != to_lower(item.expr->qualifier)) continue;
            for (const auto& col : sources[i].all_columns()) {
                items.push_back({sql::make_column(view.name, view_column(static_cast<int>(i), col)), "", false});
            }
        }
    }
    core.items = std::move(items);
    core.where = sql::conjoin(std::move(core.where), std::move(moved));
    core.from = {view.name, ""};
    core.joins.clear();
    return sql::to_sql(*p.query);
}

}  // namespace dpcc
