#include "dpcc/db_connector.hpp"

#include "dpcc/error.hpp"
#include "dpcc/hash.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dpcc {
namespace {

DataKind kind_from_declared_type(std::string_view declared) {
    const std::string t = to_lower(declared);
    auto has = [&](std::string_view s) { return t.find(s) != std::string::npos; };
    if (has("bool")) return DataKind::boolean;
    if (has("date") || has("time")) return DataKind::temporal;
    if (has("int") || has("real") || has("floa") || has("doub") || has("num") || has("dec")) return DataKind::numeric;
    if (has("char") || has("text") || has("clob")) return DataKind::text;
    return DataKind::other;
}

std::string encode_value(const SqlValue& v) {
    struct {
        std::string operator()(std::monostate) const { return "n"; }
        std::string operator()(std::int64_t i) const { return "i:" + std::to_string(i); }
        std::string operator()(double d) const {
            char buf[64];
            auto res = std::to_chars(buf, buf + sizeof(buf), d);
            return "r:" + std::string(buf, res.ptr);
        }
        std::string operator()(const std::string& s) const { return "t:" + std::to_string(s.size()) + ":" + s; }
    } visitor;
    return std::visit(visitor, v);
}

SqlValue read_column(sqlite3_stmt* stmt, int i) {
    switch (sqlite3_column_type(stmt, i)) {
        case SQLITE_INTEGER: return static_cast<std::int64_t>(sqlite3_column_int64(stmt, i));
        case SQLITE_FLOAT: return sqlite3_column_double(stmt, i);
        case SQLITE_NULL: return std::monostate{};
        default: {
            const auto* p = static_cast<const char*>(sqlite3_column_blob(stmt, i));
            const int n = sqlite3_column_bytes(stmt, i);
            return std::string(p ? p : "", static_cast<std::size_t>(n));
        }
    }
}

bool is_connection_failure(int rc) {
    switch (rc & 0xff) {
        case SQLITE_IOERR:
        case SQLITE_CORRUPT:
        case SQLITE_NOTADB:
        case SQLITE_CANTOPEN:
        case SQLITE_FULL:
            return true;
        default:
            return false;
    }
}

std::string quote_identifier(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        out.push_back(c);
        if (c == '"') out.push_back('"');
    }
    out.push_back('"');
    return out;
}

struct StmtDeleter {
    void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using Stmt = std::unique_ptr<sqlite3_stmt, StmtDeleter>;

class SqliteConnector final : public Connector {
public:
    SqliteConnector(ConnectionProfile profile, MillisClock clock)
        : profile_(std::move(profile)), clock_(clock ? std::move(clock) : steady_millis_clock()) {
        if (profile_.statement_timeout_ms <= 0) {
            throw Error(ErrorCode::validation, "statement_timeout_ms must be positive");
        }
        if (profile_.location.empty()) throw Error(ErrorCode::connection_error, "empty database location");
        if (profile_.location != ":memory:" && !std::filesystem::exists(profile_.location)) {
            throw Error(ErrorCode::connection_error, "database '" + profile_.location + "' does not exist");
        }
        const int flags = profile_.read_only ? SQLITE_OPEN_READONLY : SQLITE_OPEN_READWRITE;
        sqlite3* db = nullptr;
        const int rc = sqlite3_open_v2(profile_.location.c_str(), &db, flags | SQLITE_OPEN_NOMUTEX, nullptr);
        db_.reset(db);
        if (rc != SQLITE_OK) {
            throw Error(ErrorCode::connection_error,
                        "cannot open '" + profile_.location + "': " + (db ? sqlite3_errmsg(db) : "out of memory"));
        }
        // Forces a header read so non-database files fail here rather than later.
        char* err = nullptr;
        if (sqlite3_exec(db_.get(), "SELECT count(*) FROM sqlite_master", nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown error";
            sqlite3_free(err);
            throw Error(ErrorCode::connection_error, "cannot read '" + profile_.location + "': " + msg);
        }
    }

    const ConnectionProfile& profile() const override { return profile_; }

    std::vector<TableMeta> introspect() override {
        auto names = query("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name");
        if (names.rows.empty()) throw Error(ErrorCode::empty_schema, "database '" + profile_.location + "' has no tables");
        std::vector<TableMeta> out;
        for (const auto& row : names.rows) {
            const auto& name = std::get<std::string>(row[0]);
            TableMeta t;
            t.table_id = name;
            t.name = name;
            std::string pk_column;
            auto cols = query("PRAGMA table_info(" + quote_identifier(name) + ")");
            for (const auto& c : cols.rows) {
                ColumnMeta col;
                col.name = std::get<std::string>(c[1]);
                const auto* declared = std::get_if<std::string>(&c[2]);
                col.data_kind = kind_from_declared_type(declared ? *declared : "");
                col.nullable = std::get<std::int64_t>(c[3]) == 0;
                if (std::get<std::int64_t>(c[5]) == 1) pk_column = col.name;
                t.columns.push_back(std::move(col));
            }
            auto count = query("SELECT COUNT(*) FROM " + quote_identifier(name));
            t.row_count_estimate = std::get<std::int64_t>(count.rows.at(0).at(0));
            auto fks = query("PRAGMA foreign_key_list(" + quote_identifier(name) + ")");
            for (const auto& f : fks.rows) {
                ForeignKey fk;
                fk.remote_table = std::get<std::string>(f[2]);
                fk.local_column = std::get<std::string>(f[3]);
                if (const auto* to = std::get_if<std::string>(&f[4])) {
                    fk.remote_column = *to;
                } else {
                    auto info = query("PRAGMA table_info(" + quote_identifier(fk.remote_table) + ")");
                    for (const auto& c : info.rows) {
                        if (std::get<std::int64_t>(c[5]) == 1) fk.remote_column = std::get<std::string>(c[1]);
                    }
                }
                t.foreign_keys.push_back(std::move(fk));
            }
            std::sort(t.foreign_keys.begin(), t.foreign_keys.end(), [](const ForeignKey& a, const ForeignKey& b) {
                return std::tie(a.local_column, a.remote_table, a.remote_column) <
                       std::tie(b.local_column, b.remote_table, b.remote_column);
            });
            out.push_back(std::move(t));
        }
        return out;
    }

    ExecutionOutcome execute_timed(std::string_view sql) override {
        ExecutionOutcome outcome;
        const auto wall_start = std::chrono::steady_clock::now();
        const double start = clock_();
        Deadline deadline{wall_start + std::chrono::milliseconds(profile_.statement_timeout_ms), false};
        sqlite3_progress_handler(db_.get(), 1000, &Deadline::check, &deadline);

        sqlite3_stmt* raw = nullptr;
        int rc = sqlite3_prepare_v2(db_.get(), sql.data(), static_cast<int>(sql.size()), &raw, nullptr);
        Stmt stmt(raw);
        std::vector<SqlRow> rows;
        if (rc == SQLITE_OK && stmt) {
            const int ncol = sqlite3_column_count(stmt.get());
            while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
                SqlRow row;
                row.reserve(static_cast<std::size_t>(ncol));
                for (int i = 0; i < ncol; ++i) row.push_back(read_column(stmt.get(), i));
                rows.push_back(std::move(row));
            }
        } else if (rc == SQLITE_OK) {
            rc = SQLITE_DONE;  // empty statement
        }
        sqlite3_progress_handler(db_.get(), 0, nullptr, nullptr);
        outcome.elapsed_ms = clock_() - start;

        if (deadline.expired || rc == SQLITE_INTERRUPT) {
            outcome.timed_out = true;
            outcome.elapsed_ms = std::max(outcome.elapsed_ms, static_cast<double>(profile_.statement_timeout_ms));
            return outcome;
        }
        if (rc != SQLITE_DONE) {
            if (is_connection_failure(rc)) {
                throw Error(ErrorCode::connection_error, std::string("connection failure: ") + sqlite3_errmsg(db_.get()));
            }
            outcome.error = sqlite3_errmsg(db_.get());
            return outcome;
        }
        outcome.row_count = static_cast<std::int64_t>(rows.size());
        outcome.rows_digest = digest_rows(rows);
        return outcome;
    }

    ResultSet query(std::string_view sql) override {
        sqlite3_stmt* raw = nullptr;
        int rc = sqlite3_prepare_v2(db_.get(), sql.data(), static_cast<int>(sql.size()), &raw, nullptr);
        Stmt stmt(raw);
        if (rc != SQLITE_OK) fail(rc);
        ResultSet rs;
        if (!stmt) return rs;
        const int ncol = sqlite3_column_count(stmt.get());
        for (int i = 0; i < ncol; ++i) rs.columns.emplace_back(sqlite3_column_name(stmt.get(), i));
        while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
            SqlRow row;
            for (int i = 0; i < ncol; ++i) row.push_back(read_column(stmt.get(), i));
            rs.rows.push_back(std::move(row));
        }
        if (rc != SQLITE_DONE) fail(rc);
        return rs;
    }

    bool has_view(std::string_view name) override {
        const std::string n = quote_literal(name);
        auto rs = query("SELECT name FROM sqlite_master WHERE lower(name) = lower(" + n +
                        ") UNION ALL SELECT name FROM sqlite_temp_master WHERE lower(name) = lower(" + n + ")");
        return !rs.rows.empty();
    }

    void create_view(const ViewDef& view) override {
        if (has_view(view.name)) throw Error(ErrorCode::name_collision, "object '" + view.name + "' already exists");
        const std::string ddl = std::string(profile_.read_only ? "CREATE TEMP VIEW " : "CREATE VIEW ") +
                                quote_identifier(view.name) + " AS " + view.sql_text;
        char* err = nullptr;
        if (sqlite3_exec(db_.get(), ddl.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown error";
            sqlite3_free(err);
            throw Error(ErrorCode::sql_error, "create view '" + view.name + "': " + msg);
        }
    }

private:
    struct Deadline {
        std::chrono::steady_clock::time_point at;
        bool expired;

        static int check(void* self) {
            auto* d = static_cast<Deadline*>(self);
            if (std::chrono::steady_clock::now() >= d->at) d->expired = true;
            return d->expired ? 1 : 0;
        }
    };

    static std::string quote_literal(std::string_view s) {
        std::string out = "'";
        for (char c : s) {
            out.push_back(c);
            if (c == '\'') out.push_back('\'');
        }
        out.push_back('\'');
        return out;
    }

    [[noreturn]] void fail(int rc) {
        if (is_connection_failure(rc)) {
            throw Error(ErrorCode::connection_error, std::string("connection failure: ") + sqlite3_errmsg(db_.get()));
        }
        throw Error(ErrorCode::sql_error, sqlite3_errmsg(db_.get()));
    }

    struct DbDeleter {
        void operator()(sqlite3* db) const { sqlite3_close_v2(db); }
    };

    ConnectionProfile profile_;
    MillisClock clock_;
    std::unique_ptr<sqlite3, DbDeleter> db_;
};

}  // namespace

MillisClock steady_millis_clock() {
    return [] {
        using namespace std::chrono;
        return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
    };
}

std::string digest_rows(const std::vector<SqlRow>& rows) {
    std::vector<std::string> encoded;
    encoded.reserve(rows.size());
    for (const auto& row : rows) {
        std::string e;
        for (const auto& v : row) {
            e += encode_value(v);
            e.push_back('\x1f');
        }
        encoded.push_back(std::move(e));
    }
    std::sort(encoded.begin(), encoded.end());
    std::string all;
    for (const auto& e : encoded) {
        all += e;
        all.push_back('\x1e');
    }
    return sha256_hex(all);
}

std::unique_ptr<Connector> connect(const ConnectionProfile& profile, MillisClock clock) {
    if (profile.kind != "sqlite") {
        throw Error(ErrorCode::connection_error, "unsupported source kind '" + profile.kind + "'");
    }
    return std::make_unique<SqliteConnector>(profile, std::move(clock));
}

void load_fixture_script(const std::string& script_path, const std::string& database_path) {
    std::ifstream in(script_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot read fixture script '" + script_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::error_code ec;
    std::filesystem::remove(database_path, ec);
    sqlite3* raw = nullptr;
    if (sqlite3_open_v2(database_path.c_str(), &raw, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr) != SQLITE_OK) {
        std::string msg = raw ? sqlite3_errmsg(raw) : "out of memory";
        sqlite3_close_v2(raw);
        throw Error(ErrorCode::connection_error, "cannot create '" + database_path + "': " + msg);
    }
    std::unique_ptr<sqlite3, int (*)(sqlite3*)> db(raw, &sqlite3_close_v2);
    const std::string script = "BEGIN;\n" + buf.str() + "\nCOMMIT;";
    char* err = nullptr;
    if (sqlite3_exec(db.get(), script.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw Error(ErrorCode::sql_error, "fixture script '" + script_path + "': " + msg);
    }
}

}  // namespace dpcc
