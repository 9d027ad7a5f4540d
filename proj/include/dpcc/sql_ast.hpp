#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace dpcc::sql {

enum class TokenKind { identifier, keyword, number, string, op, lparen, rparen, comma, dot, semicolon };

struct Token {
    TokenKind kind;
    std::string text;  // keywords uppercased; quoted identifiers unquoted
    std::size_t offset = 0;
    bool quoted = false;
};

/// Lexes SQL, dropping whitespace and comments. Throws parse_error on
/// characters outside the supported subset or unterminated literals.
std::vector<Token> tokenize(std::string_view sql);

struct Query;
struct SelectCore;
struct Expr;
using ExprPtr = std::unique_ptr<Expr>;
using QueryPtr = std::unique_ptr<Query>;

enum class ExprKind {
    literal,       // text = literal as written ('abc', 12.5, NULL, TRUE)
    column,        // qualifier (optional) + text = column name
    star,          // qualifier (optional); only in select lists and COUNT(*)
    paren,         // args[0]
    unary,         // text = "-", "+", "NOT"; args[0]
    binary,        // text = operator / AND / OR / LIKE; args[0], args[1]; negated for NOT LIKE
    is_null,       // args[0]; negated for IS NOT NULL
    between,       // args[0] BETWEEN args[1] AND args[2]; negated
    in_list,       // args[0] IN (args[1..]); negated
    in_subquery,   // args[0] IN (subquery); negated
    exists,        // EXISTS (subquery); negated
    scalar_subquery,
    function,      // text = name; distinct flag; args
    case_when,     // args: [operand?] (when, then)* [else]; has_operand/has_else flags
    cast,          // CAST(args[0] AS text)
};

struct Expr {
    ExprKind kind = ExprKind::literal;
    std::string text;
    std::string qualifier;
    bool negated = false;
    bool distinct = false;
    bool has_operand = false;
    bool has_else = false;
    std::vector<ExprPtr> args;
    QueryPtr subquery;

    // Filled by name resolution: which FROM source of which select core a
    // column reference binds to. Null for aliases and ordinals.
    const SelectCore* bound_core = nullptr;
    int bound_source = -1;
};

enum class JoinType { inner, left };

struct TableRef {
    std::string name;
    std::string alias;

    const std::string& effective_name() const { return alias.empty() ? name : alias; }
};

struct JoinClause {
    JoinType type = JoinType::inner;
    bool explicit_inner = false;  // "INNER JOIN" rather than "JOIN"
    bool explicit_outer = false;  // "LEFT OUTER JOIN"
    TableRef table;
    ExprPtr on;
};

struct SelectItem {
    ExprPtr expr;
    std::string alias;
    bool explicit_as = false;
};

struct SelectCore {
    bool distinct = false;
    std::vector<SelectItem> items;
    TableRef from;
    std::vector<JoinClause> joins;
    ExprPtr where;
    std::vector<ExprPtr> group_by;
    ExprPtr having;
};

struct OrderItem {
    ExprPtr expr;
    bool desc = false;
    bool explicit_direction = false;
};

struct Query {
    std::vector<SelectCore> cores;     // joined by UNION [ALL]
    std::vector<bool> union_all;       // cores.size() - 1 entries
    std::vector<OrderItem> order_by;
    ExprPtr limit;
    ExprPtr offset;
};

/// Parses one statement (optionally terminated by ';') of the supported
/// subset. Throws parse_error otherwise.
QueryPtr parse(std::string_view sql);

/// Canonical single-line rendering; keywords uppercase, one space between tokens.
std::string to_sql(const Query& query);
std::string to_sql(const Expr& expr);

ExprPtr make_column(std::string qualifier, std::string name);
ExprPtr make_literal(std::string text);
ExprPtr make_binary(std::string op, ExprPtr lhs, ExprPtr rhs);

/// lhs AND rhs, parenthesizing OR operands so precedence is preserved.
ExprPtr conjoin(ExprPtr lhs, ExprPtr rhs);

/// Deep copy; column bindings are preserved.
ExprPtr clone(const Expr& expr);
QueryPtr clone(const Query& query);

bool is_aggregate_call(const Expr& expr);

}  // namespace dpcc::sql
