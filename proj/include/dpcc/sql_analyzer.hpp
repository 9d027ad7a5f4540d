#pragma once

#include "dpcc/state.hpp"
#include "dpcc/types.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dpcc {

/// Output columns of a view and the base-schema columns each one exposes.
struct ViewShape {
    struct Output {
        std::string name;
        std::set<ColumnRef> base;
        std::optional<ColumnRef> direct;  // set when the output is a bare base column
    };

    std::string name;
    std::string covers_pattern;
    std::vector<Output> outputs;
    std::set<TableId> base_tables;
    std::set<ColumnRef> intrinsic_columns;  // referenced by the view's own ON/WHERE/GROUP BY/HAVING

    const Output* find(std::string_view column) const;
};

/// Name-resolution context: base tables plus analyzed views. Lookups are
/// case-insensitive.
class SchemaCatalog {
public:
    static SchemaCatalog from_state(const DataProductState& state);

    void add_table(TableMeta table);

    /// Analyzes the view SQL against what is already in the catalog.
    void add_view(const ViewDef& view);

    const TableMeta* find_table(std::string_view name) const;
    const ViewShape* find_view(std::string_view name) const;

    const std::vector<TableMeta>& tables() const { return tables_; }
    const std::vector<ViewShape>& views() const { return views_; }

private:
    std::vector<TableMeta> tables_;
    std::vector<ViewShape> views_;
};

/// Parses and resolves a query of the supported subset. Throws parse_error for
/// malformed or out-of-subset SQL and unresolved_identifier for unknown names.
QueryAnalysis analyze(std::string_view sql_text, const SchemaCatalog& schema);

struct ComplexityWeights {
    double base = 1.0;
    double join = 2.0;
    double subquery_depth = 3.0;
    double aggregate = 1.0;
    double group_by = 1.0;
    double having = 1.0;
    double set_op = 2.0;
};

double complexity_score(const QueryAnalysis& analysis, const ComplexityWeights& weights = {});

/// True when a pattern consists solely of inner equi-joins over distinct tables.
bool pattern_is_viewable(std::string_view join_pattern_key);

/// "v_" followed by the first 8 hex digits of the pattern key's SHA-256.
std::string view_name_for_pattern(std::string_view join_pattern_key);

/// Builds a view materializing the FROM clause of `representative_sql`: every
/// column of every joined table, exposed as <table>__<column>.
ViewDef make_join_view(std::string_view representative_sql, const SchemaCatalog& schema, std::string view_id,
                       int iteration);

/// Replaces the query's joined tables with `view`. The catalog must already
/// contain the view. Throws pattern_mismatch when the query's join pattern is
/// not the one the view covers.
std::string rewrite_with_view(std::string_view sql_text, const ViewDef& view, const SchemaCatalog& schema);

}  // namespace dpcc
