#include "dpcc/error.hpp"
#include "dpcc/sql_ast.hpp"
#include "dpcc/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace dpcc::sql {
namespace {

constexpr std::array<std::string_view, 48> kKeywords{
    "SELECT", "DISTINCT", "ALL",   "FROM",  "WHERE",  "GROUP",     "BY",      "HAVING", "ORDER",  "ASC",
    "DESC",   "LIMIT",    "OFFSET", "JOIN", "INNER",  "LEFT",      "OUTER",   "ON",     "AS",     "AND",
    "OR",     "NOT",      "IN",    "IS",    "NULL",   "LIKE",      "BETWEEN", "UNION",  "EXISTS", "CASE",
    "WHEN",   "THEN",     "ELSE",  "END",   "CAST",   "CROSS",     "RIGHT",   "FULL",   "NATURAL", "USING",
    "INTERSECT", "EXCEPT", "WITH", "INSERT", "UPDATE", "DELETE", "TRUE", "FALSE",
};

bool is_keyword(std::string_view upper) {
    return std::find(kKeywords.begin(), kKeywords.end(), upper) != kKeywords.end();
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

[[noreturn]] void fail(const std::string& msg, std::size_t offset) {
    throw Error(ErrorCode::parse_error, msg + " at offset " + std::to_string(offset));
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

}  // namespace

std::vector<Token> tokenize(std::string_view sql) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = sql.size();
    while (i < n) {
        const char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            auto end = sql.find("*/", i + 2);
            if (end == std::string_view::npos) fail("unterminated comment", i);
            i = end + 2;
            continue;
        }
        const std::size_t start = i;
        if (ident_start(c)) {
            while (i < n && ident_char(sql[i])) ++i;
            std::string word(sql.substr(start, i - start));
            std::string upper = to_upper(word);
            if (is_keyword(upper)) {
                out.push_back({TokenKind::keyword, std::move(upper), start});
            } else {
                out.push_back({TokenKind::identifier, std::move(word), start});
            }
            continue;
        }
        if (c == '"' || c == '`' || c == '[') {
            const char close = c == '[' ? ']' : c;
            std::string text;
            ++i;
            while (true) {
                if (i >= n) fail("unterminated quoted identifier", start);
                if (sql[i] == close) {
                    if (close != ']' && i + 1 < n && sql[i + 1] == close) {
                        text.push_back(close);
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                text.push_back(sql[i++]);
            }
            out.push_back({TokenKind::identifier, std::move(text), start, true});
            continue;
        }
        if (c == '\'') {
            ++i;
            while (true) {
                if (i >= n) fail("unterminated string literal", start);
                if (sql[i] == '\'') {
                    if (i + 1 < n && sql[i + 1] == '\'') {
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                ++i;
            }
            out.push_back({TokenKind::string, std::string(sql.substr(start, i - start)), start});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
            if (i < n && sql[i] == '.') {
                ++i;
                while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
            }
            if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < n && (sql[j] == '+' || sql[j] == '-')) ++j;
                if (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) {
                    i = j;
                    while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                }
            }
            if (i < n && ident_start(sql[i])) fail("malformed number", start);
            out.push_back({TokenKind::number, std::string(sql.substr(start, i - start)), start});
            continue;
        }
        auto two = i + 1 < n ? sql.substr(i, 2) : std::string_view{};
        if (two == "<=" || two == ">=" || two == "<>" || two == "!=" || two == "==" || two == "||") {
            out.push_back({TokenKind::op, std::string(two), start});
            i += 2;
            continue;
        }
        switch (c) {
            case '=': case '<': case '>': case '+': case '-': case '*': case '/': case '%':
                out.push_back({TokenKind::op, std::string(1, c), start});
                break;
            case '(': out.push_back({TokenKind::lparen, "(", start}); break;
            case ')': out.push_back({TokenKind::rparen, ")", start}); break;
            case ',': out.push_back({TokenKind::comma, ",", start}); break;
            case '.': out.push_back({TokenKind::dot, ".", start}); break;
            case ';': out.push_back({TokenKind::semicolon, ";", start}); break;
            default: fail(std::string("unexpected character '") + c + "'", start);
        }
        ++i;
    }
    return out;
}

namespace {

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    QueryPtr parse_statement() {
        if (toks_.empty()) fail("empty SQL", 0);
        auto q = parse_query();
        if (at(TokenKind::semicolon)) ++pos_;
        if (pos_ != toks_.size()) fail("unexpected token '" + peek().text + "'", peek().offset);
        return q;
    }

private:
    const Token& peek() const { return done() ? eof_token() : toks_[pos_]; }

    const Token& eof_token() const {
        static thread_local Token end;
        end = Token{TokenKind::semicolon, "<end>", toks_.empty() ? 0 : toks_.back().offset + toks_.back().text.size()};
        return end;
    }

    bool done() const { return pos_ >= toks_.size(); }
    bool at(TokenKind k) const { return !done() && toks_[pos_].kind == k; }
    bool at_kw(std::string_view kw, std::size_t ahead = 0) const {
        return pos_ + ahead < toks_.size() && toks_[pos_ + ahead].kind == TokenKind::keyword &&
               toks_[pos_ + ahead].text == kw;
    }
    bool at_op(std::string_view op) const { return at(TokenKind::op) && toks_[pos_].text == op; }

    bool accept_kw(std::string_view kw) {
        if (at_kw(kw)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect_kw(std::string_view kw) {
        if (!accept_kw(kw)) fail("expected " + std::string(kw) + " but found '" + peek().text + "'", peek().offset);
    }

    void expect(TokenKind k, std::string_view what) {
        if (!at(k)) fail("expected " + std::string(what) + " but found '" + peek().text + "'", peek().offset);
        ++pos_;
    }

    std::string expect_identifier(std::string_view what) {
        if (!at(TokenKind::identifier)) {
            fail("expected " + std::string(what) + " but found '" + peek().text + "'", peek().offset);
        }
        return toks_[pos_++].text;
    }

    QueryPtr parse_query() {
        if (at_kw("WITH")) fail("WITH clauses are not supported", peek().offset);
        auto q = std::make_unique<Query>();
        q->cores.push_back(parse_core());
        while (at_kw("UNION")) {
            ++pos_;
            q->union_all.push_back(accept_kw("ALL"));
            q->cores.push_back(parse_core());
        }
        if (at_kw("INTERSECT") || at_kw("EXCEPT")) fail("INTERSECT/EXCEPT not supported", peek().offset);
        if (accept_kw("ORDER")) {
            expect_kw("BY");
            do {
                OrderItem item;
                item.expr = parse_expr();
                if (accept_kw("DESC")) {
                    item.desc = true;
                    item.explicit_direction = true;
                } else if (accept_kw("ASC")) {
                    item.explicit_direction = true;
                }
                q->order_by.push_back(std::move(item));
            } while (accept_comma());
        }
        if (accept_kw("LIMIT")) {
            q->limit = parse_expr();
            if (accept_kw("OFFSET")) q->offset = parse_expr();
        }
        return q;
    }

    bool accept_comma() {
        if (at(TokenKind::comma)) {
            ++pos_;
            return true;
        }
        return false;
    }

    SelectCore parse_core() {
        SelectCore core;
        expect_kw("SELECT");
        if (accept_kw("DISTINCT")) {
            core.distinct = true;
        } else {
            accept_kw("ALL");
        }
        do {
            core.items.push_back(parse_select_item());
        } while (accept_comma());
        expect_kw("FROM");
        core.from = parse_table_ref();
        while (true) {
            if (at(TokenKind::comma)) fail("comma joins are not supported; use JOIN ... ON", peek().offset);
            if (at_kw("CROSS") || at_kw("RIGHT") || at_kw("FULL") || at_kw("NATURAL")) {
                fail("unsupported join type " + peek().text, peek().offset);
            }
            JoinClause join;
            if (accept_kw("JOIN")) {
                join.type = JoinType::inner;
            } else if (at_kw("INNER") && at_kw("JOIN", 1)) {
                pos_ += 2;
                join.type = JoinType::inner;
                join.explicit_inner = true;
            } else if (at_kw("LEFT")) {
                ++pos_;
                join.type = JoinType::left;
                join.explicit_outer = accept_kw("OUTER");
                expect_kw("JOIN");
            } else {
                break;
            }
            join.table = parse_table_ref();
            if (at_kw("USING")) fail("JOIN ... USING is not supported", peek().offset);
            expect_kw("ON");
            join.on = parse_expr();
            core.joins.push_back(std::move(join));
        }
        if (accept_kw("WHERE")) core.where = parse_expr();
        if (accept_kw("GROUP")) {
            expect_kw("BY");
            do {
                core.group_by.push_back(parse_expr());
            } while (accept_comma());
        }
        if (accept_kw("HAVING")) core.having = parse_expr();
        return core;
    }

    SelectItem parse_select_item() {
        SelectItem item;
        if (at_op("*")) {
            ++pos_;
            item.expr = std::make_unique<Expr>();
            item.expr->kind = ExprKind::star;
            return item;
        }
        if (at(TokenKind::identifier) && pos_ + 2 < toks_.size() && toks_[pos_ + 1].kind == TokenKind::dot &&
            toks_[pos_ + 2].kind == TokenKind::op && toks_[pos_ + 2].text == "*") {
            item.expr = std::make_unique<Expr>();
            item.expr->kind = ExprKind::star;
            item.expr->qualifier = toks_[pos_].text;
            pos_ += 3;
            return item;
        }
        item.expr = parse_expr();
        if (accept_kw("AS")) {
            item.explicit_as = true;
            item.alias = at(TokenKind::string) ? unquote_string(toks_[pos_++].text) : expect_identifier("alias");
        } else if (at(TokenKind::identifier)) {
            item.alias = toks_[pos_++].text;
        }
        return item;
    }

    static std::string unquote_string(const std::string& lit) {
        std::string out;
        for (std::size_t i = 1; i + 1 < lit.size(); ++i) {
            out.push_back(lit[i]);
            if (lit[i] == '\'' && lit[i + 1] == '\'') ++i;
        }
        return out;
    }

    TableRef parse_table_ref() {
        if (at(TokenKind::lparen)) fail("derived tables are not supported", peek().offset);
        TableRef ref;
        ref.name = expect_identifier("table name");
        if (at(TokenKind::dot)) fail("schema-qualified table names are not supported", peek().offset);
        if (accept_kw("AS")) {
            ref.alias = expect_identifier("table alias");
        } else if (at(TokenKind::identifier)) {
            ref.alias = toks_[pos_++].text;
        }
        return ref;
    }

    ExprPtr parse_expr() { return parse_or(); }

    ExprPtr parse_or() {
        auto lhs = parse_and();
        while (accept_kw("OR")) lhs = make_binary("OR", std::move(lhs), parse_and());
        return lhs;
    }

    ExprPtr parse_and() {
        auto lhs = parse_not();
        while (accept_kw("AND")) lhs = make_binary("AND", std::move(lhs), parse_not());
        return lhs;
    }

    ExprPtr parse_not() {
        if (at_kw("NOT") && !at_kw("EXISTS", 1)) {
            ++pos_;
            auto e = std::make_unique<Expr>();
            e->kind = ExprKind::unary;
            e->text = "NOT";
            e->args.push_back(parse_not());
            return e;
        }
        return parse_comparison();
    }

    ExprPtr parse_comparison() {
        auto lhs = parse_additive();
        while (true) {
            if (at(TokenKind::op)) {
                const std::string& op = toks_[pos_].text;
                if (op == "=" || op == "==" || op == "<>" || op == "!=" || op == "<" || op == "<=" || op == ">" ||
                    op == ">=") {
                    ++pos_;
                    lhs = make_binary(op, std::move(lhs), parse_additive());
                    continue;
                }
                break;
            }
            if (at_kw("IS")) {
                ++pos_;
                auto e = std::make_unique<Expr>();
                e->kind = ExprKind::is_null;
                e->negated = accept_kw("NOT");
                expect_kw("NULL");
                e->args.push_back(std::move(lhs));
                lhs = std::move(e);
                continue;
            }
            bool negated = false;
            if (at_kw("NOT") && (at_kw("IN", 1) || at_kw("LIKE", 1) || at_kw("BETWEEN", 1))) {
                ++pos_;
                negated = true;
            }
            if (accept_kw("LIKE")) {
                auto e = make_binary("LIKE", std::move(lhs), parse_additive());
                e->negated = negated;
                lhs = std::move(e);
                continue;
            }
            if (accept_kw("BETWEEN")) {
                auto e = std::make_unique<Expr>();
                e->kind = ExprKind::between;
                e->negated = negated;
                e->args.push_back(std::move(lhs));
                e->args.push_back(parse_additive());
                expect_kw("AND");
                e->args.push_back(parse_additive());
                lhs = std::move(e);
                continue;
            }
            if (accept_kw("IN")) {
                expect(TokenKind::lparen, "'('");
                auto e = std::make_unique<Expr>();
                e->negated = negated;
                e->args.push_back(std::move(lhs));
                if (at_kw("SELECT")) {
                    e->kind = ExprKind::in_subquery;
                    e->subquery = parse_query();
                } else {
                    e->kind = ExprKind::in_list;
                    do {
                        e->args.push_back(parse_expr());
                    } while (accept_comma());
                }
                expect(TokenKind::rparen, "')'");
                lhs = std::move(e);
                continue;
            }
            if (negated) fail("expected IN, LIKE or BETWEEN after NOT", peek().offset);
            break;
        }
        return lhs;
    }

    ExprPtr parse_additive() {
        auto lhs = parse_multiplicative();
        while (at_op("+") || at_op("-")) {
            std::string op = toks_[pos_++].text;
            lhs = make_binary(op, std::move(lhs), parse_multiplicative());
        }
        return lhs;
    }

    ExprPtr parse_multiplicative() {
        auto lhs = parse_concat();
        while (at_op("*") || at_op("/") || at_op("%")) {
            std::string op = toks_[pos_++].text;
            lhs = make_binary(op, std::move(lhs), parse_concat());
        }
        return lhs;
    }

    ExprPtr parse_concat() {
        auto lhs = parse_unary();
        while (at_op("||")) {
            ++pos_;
            lhs = make_binary("||", std::move(lhs), parse_unary());
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (at_op("-") || at_op("+")) {
            auto e = std::make_unique<Expr>();
            e->kind = ExprKind::unary;
            e->text = toks_[pos_++].text;
            e->args.push_back(parse_unary());
            return e;
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        if (done()) fail("unexpected end of SQL", eof_token().offset);
        const Token& t = toks_[pos_];
        switch (t.kind) {
            case TokenKind::number:
            case TokenKind::string:
                ++pos_;
                return make_literal(t.text);
            case TokenKind::keyword:
                if (t.text == "NULL" || t.text == "TRUE" || t.text == "FALSE") {
                    ++pos_;
                    return make_literal(t.text);
                }
                if (t.text == "EXISTS" || (t.text == "NOT" && at_kw("EXISTS", 1))) {
                    auto e = std::make_unique<Expr>();
                    e->kind = ExprKind::exists;
                    e->negated = accept_kw("NOT");
                    expect_kw("EXISTS");
                    expect(TokenKind::lparen, "'('");
                    e->subquery = parse_query();
                    expect(TokenKind::rparen, "')'");
                    return e;
                }
                if (t.text == "CASE") return parse_case();
                if (t.text == "CAST") {
                    ++pos_;
                    expect(TokenKind::lparen, "'('");
                    auto e = std::make_unique<Expr>();
                    e->kind = ExprKind::cast;
                    e->args.push_back(parse_expr());
                    expect_kw("AS");
                    e->text = expect_identifier("type name");
                    expect(TokenKind::rparen, "')'");
                    return e;
                }
                fail("unexpected keyword " + t.text, t.offset);
            case TokenKind::lparen: {
                ++pos_;
                auto e = std::make_unique<Expr>();
                if (at_kw("SELECT")) {
                    e->kind = ExprKind::scalar_subquery;
                    e->subquery = parse_query();
                } else {
                    e->kind = ExprKind::paren;
                    e->args.push_back(parse_expr());
                }
                expect(TokenKind::rparen, "')'");
                return e;
            }
            case TokenKind::identifier: {
                ++pos_;
                if (at(TokenKind::lparen) && !t.quoted) return parse_call(t.text);
                if (at(TokenKind::dot)) {
                    ++pos_;
                    std::string col = expect_identifier("column name");
                    return make_column(t.text, std::move(col));
                }
                return make_column("", t.text);
            }
            default:
                fail("unexpected token '" + t.text + "'", t.offset);
        }
    }

    ExprPtr parse_call(const std::string& name) {
        expect(TokenKind::lparen, "'('");
        auto e = std::make_unique<Expr>();
        e->kind = ExprKind::function;
        e->text = to_upper(name);
        if (at(TokenKind::rparen)) {
            ++pos_;
            return e;
        }
        if (at_op("*")) {
            ++pos_;
            auto star = std::make_unique<Expr>();
            star->kind = ExprKind::star;
            e->args.push_back(std::move(star));
            expect(TokenKind::rparen, "')'");
            return e;
        }
        e->distinct = accept_kw("DISTINCT");
        do {
            e->args.push_back(parse_expr());
        } while (accept_comma());
        expect(TokenKind::rparen, "')'");
        return e;
    }

    ExprPtr parse_case() {
        expect_kw("CASE");
        auto e = std::make_unique<Expr>();
        e->kind = ExprKind::case_when;
        if (!at_kw("WHEN")) {
            e->has_operand = true;
            e->args.push_back(parse_expr());
        }
        if (!at_kw("WHEN")) fail("expected WHEN", peek().offset);
        while (accept_kw("WHEN")) {
            e->args.push_back(parse_expr());
            expect_kw("THEN");
            e->args.push_back(parse_expr());
        }
        if (accept_kw("ELSE")) {
            e->has_else = true;
            e->args.push_back(parse_expr());
        }
        expect_kw("END");
        return e;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

bool needs_quoting(const std::string& ident) {
    if (ident.empty() || !ident_start(ident[0])) return true;
    for (char c : ident) {
        if (!ident_char(c)) return true;
    }
    return is_keyword(to_upper(ident));
}

std::string quote_ident(const std::string& ident) {
    if (!needs_quoting(ident)) return ident;
    std::string out = "\"";
    for (char c : ident) {
        out.push_back(c);
        if (c == '"') out.push_back('"');
    }
    out.push_back('"');
    return out;
}

class Printer {
public:
    std::string out;

    void query(const Query& q) {
        for (std::size_t i = 0; i < q.cores.size(); ++i) {
            if (i > 0) out += q.union_all[i - 1] ? " UNION ALL " : " UNION ";
            core(q.cores[i]);
        }
        if (!q.order_by.empty()) {
            out += " ORDER BY ";
            for (std::size_t i = 0; i < q.order_by.size(); ++i) {
                if (i > 0) out += ", ";
                expr(*q.order_by[i].expr);
                if (q.order_by[i].explicit_direction) out += q.order_by[i].desc ? " DESC" : " ASC";
            }
        }
        if (q.limit) {
            out += " LIMIT ";
            expr(*q.limit);
            if (q.offset) {
                out += " OFFSET ";
                expr(*q.offset);
            }
        }
    }

    void table_ref(const TableRef& t) {
        out += quote_ident(t.name);
        if (!t.alias.empty()) out += " AS " + quote_ident(t.alias);
    }

    void core(const SelectCore& c) {
        out += "SELECT ";
        if (c.distinct) out += "DISTINCT ";
        for (std::size_t i = 0; i < c.items.size(); ++i) {
            if (i > 0) out += ", ";
            expr(*c.items[i].expr);
            if (!c.items[i].alias.empty()) {
                out += c.items[i].explicit_as ? " AS " : " ";
                out += quote_ident(c.items[i].alias);
            }
        }
        out += " FROM ";
        table_ref(c.from);
        for (const auto& j : c.joins) {
            if (j.type == JoinType::left) {
                out += j.explicit_outer ? " LEFT OUTER JOIN " : " LEFT JOIN ";
            } else {
                out += j.explicit_inner ? " INNER JOIN " : " JOIN ";
            }
            table_ref(j.table);
            out += " ON ";
            expr(*j.on);
        }
        if (c.where) {
            out += " WHERE ";
            expr(*c.where);
        }
        if (!c.group_by.empty()) {
            out += " GROUP BY ";
            for (std::size_t i = 0; i < c.group_by.size(); ++i) {
                if (i > 0) out += ", ";
                expr(*c.group_by[i]);
            }
        }
        if (c.having) {
            out += " HAVING ";
            expr(*c.having);
        }
    }

    void expr(const Expr& e) {
        switch (e.kind) {
            case ExprKind::literal: out += e.text; break;
            case ExprKind::column:
                if (!e.qualifier.empty()) out += quote_ident(e.qualifier) + ".";
                out += quote_ident(e.text);
                break;
            case ExprKind::star:
                if (!e.qualifier.empty()) out += quote_ident(e.qualifier) + ".";
                out += "*";
                break;
            case ExprKind::paren:
                out += "(";
                expr(*e.args[0]);
                out += ")";
                break;
            case ExprKind::unary:
                out += e.text;
                if (e.text == "NOT") out += " ";
                expr(*e.args[0]);
                break;
            case ExprKind::binary:
                expr(*e.args[0]);
                out += " ";
                if (e.negated) out += "NOT ";
                out += e.text + " ";
                expr(*e.args[1]);
                break;
            case ExprKind::is_null:
                expr(*e.args[0]);
                out += e.negated ? " IS NOT NULL" : " IS NULL";
                break;
            case ExprKind::between:
                expr(*e.args[0]);
                out += e.negated ? " NOT BETWEEN " : " BETWEEN ";
                expr(*e.args[1]);
                out += " AND ";
                expr(*e.args[2]);
                break;
            case ExprKind::in_list:
                expr(*e.args[0]);
                out += e.negated ? " NOT IN (" : " IN (";
                for (std::size_t i = 1; i < e.args.size(); ++i) {
                    if (i > 1) out += ", ";
                    expr(*e.args[i]);
                }
                out += ")";
                break;
            case ExprKind::in_subquery:
                expr(*e.args[0]);
                out += e.negated ? " NOT IN (" : " IN (";
                query(*e.subquery);
                out += ")";
                break;
            case ExprKind::exists:
                out += e.negated ? "NOT EXISTS (" : "EXISTS (";
                query(*e.subquery);
                out += ")";
                break;
            case ExprKind::scalar_subquery:
                out += "(";
                query(*e.subquery);
                out += ")";
                break;
            case ExprKind::function:
                out += e.text + "(";
                if (e.distinct) out += "DISTINCT ";
                for (std::size_t i = 0; i < e.args.size(); ++i) {
                    if (i > 0) out += ", ";
                    expr(*e.args[i]);
                }
                out += ")";
                break;
            case ExprKind::case_when: {
                out += "CASE";
                std::size_t i = 0;
                if (e.has_operand) {
                    out += " ";
                    expr(*e.args[i++]);
                }
                const std::size_t pairs_end = e.args.size() - (e.has_else ? 1 : 0);
                for (; i < pairs_end; i += 2) {
                    out += " WHEN ";
                    expr(*e.args[i]);
                    out += " THEN ";
                    expr(*e.args[i + 1]);
                }
                if (e.has_else) {
                    out += " ELSE ";
                    expr(*e.args.back());
                }
                out += " END";
                break;
            }
            case ExprKind::cast:
                out += "CAST(";
                expr(*e.args[0]);
                out += " AS " + e.text + ")";
                break;
        }
    }
};

}  // namespace

QueryPtr parse(std::string_view sql) { return Parser(tokenize(sql)).parse_statement(); }

std::string to_sql(const Query& query) {
    Printer p;
    p.query(query);
    return p.out;
}

std::string to_sql(const Expr& expr) {
    Printer p;
    p.expr(expr);
    return p.out;
}

ExprPtr make_column(std::string qualifier, std::string name) {
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::column;
    e->qualifier = std::move(qualifier);
    e->text = std::move(name);
    return e;
}

ExprPtr make_literal(std::string text) {
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::literal;
    e->text = std::move(text);
    return e;
}

ExprPtr make_binary(std::string op, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::binary;
    e->text = std::move(op);
    e->args.push_back(std::move(lhs));
    e->args.push_back(std::move(rhs));
    return e;
}

ExprPtr conjoin(ExprPtr lhs, ExprPtr rhs) {
    auto wrap = [](ExprPtr e) {
        if (e->kind == ExprKind::binary && e->text == "OR") {
            auto p = std::make_unique<Expr>();
            p->kind = ExprKind::paren;
            p->args.push_back(std::move(e));
            return p;
        }
        return e;
    };
    if (!lhs) return rhs;
    if (!rhs) return lhs;
    return make_binary("AND", wrap(std::move(lhs)), wrap(std::move(rhs)));
}

ExprPtr clone(const Expr& e) {
    auto c = std::make_unique<Expr>();
    c->kind = e.kind;
    c->text = e.text;
    c->qualifier = e.qualifier;
    c->negated = e.negated;
    c->distinct = e.distinct;
    c->has_operand = e.has_operand;
    c->has_else = e.has_else;
    c->bound_core = e.bound_core;
    c->bound_source = e.bound_source;
    for (const auto& a : e.args) c->args.push_back(clone(*a));
    if (e.subquery) c->subquery = clone(*e.subquery);
    return c;
}

QueryPtr clone(const Query& q) {
    auto c = std::make_unique<Query>();
    for (const auto& core : q.cores) {
        SelectCore sc;
        sc.distinct = core.distinct;
        for (const auto& item : core.items) sc.items.push_back({clone(*item.expr), item.alias, item.explicit_as});
        sc.from = core.from;
        for (const auto& j : core.joins) {
            sc.joins.push_back({j.type, j.explicit_inner, j.explicit_outer, j.table, clone(*j.on)});
        }
        if (core.where) sc.where = clone(*core.where);
        for (const auto& g : core.group_by) sc.group_by.push_back(clone(*g));
        if (core.having) sc.having = clone(*core.having);
        c->cores.push_back(std::move(sc));
    }
    c->union_all = q.union_all;
    for (const auto& o : q.order_by) c->order_by.push_back({clone(*o.expr), o.desc, o.explicit_direction});
    if (q.limit) c->limit = clone(*q.limit);
    if (q.offset) c->offset = clone(*q.offset);
    return c;
}

bool is_aggregate_call(const Expr& e) {
    if (e.kind != ExprKind::function) return false;
    const std::string& n = e.text;
    if (n == "COUNT" || n == "SUM" || n == "AVG" || n == "TOTAL" || n == "GROUP_CONCAT") return true;
    return (n == "MIN" || n == "MAX") && e.args.size() == 1;
}

}  // namespace dpcc::sql
