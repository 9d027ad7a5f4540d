#pragma once

#include "dpcc/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dpcc {

struct ConnectionProfile {
    std::string kind = "sqlite";
    std::string location;
    // Agent-created views go to the connection's temp namespace when set.
    bool read_only = true;
    int statement_timeout_ms = 5000;
};

struct ExecutionOutcome {
    std::string rows_digest;
    std::int64_t row_count = 0;
    double elapsed_ms = 0.0;
    bool timed_out = false;
    std::optional<std::string> error;

    bool ok() const { return !error && !timed_out; }
};

using SqlValue = std::variant<std::monostate, std::int64_t, double, std::string>;
using SqlRow = std::vector<SqlValue>;

struct ResultSet {
    std::vector<std::string> columns;
    std::vector<SqlRow> rows;
};

/// Monotonic milliseconds. Injected so tests can make timings deterministic.
using MillisClock = std::function<double()>;
MillisClock steady_millis_clock();

/// Order-independent digest of a result multiset: SHA-256 over the sorted
/// canonical encodings of the rows.
std::string digest_rows(const std::vector<SqlRow>& rows);

/// A relational data source. One reference backend (SQLite) is provided;
/// other engines plug in behind this interface.
class Connector {
public:
    virtual ~Connector() = default;

    virtual const ConnectionProfile& profile() const = 0;

    /// All user tables ordered by name. Throws empty_schema when there are none.
    virtual std::vector<TableMeta> introspect() = 0;

    /// Never throws for SQL errors (they land in outcome.error); a broken
    /// connection throws connection_error.
    virtual ExecutionOutcome execute_timed(std::string_view sql) = 0;

    /// Fetches rows; throws sql_error on failure.
    virtual ResultSet query(std::string_view sql) = 0;

    /// Throws name_collision if the name is taken, sql_error on engine errors.
    virtual void create_view(const ViewDef& view) = 0;

    virtual bool has_view(std::string_view name) = 0;
};

/// Opens a connection. Throws connection_error when the source cannot be opened.
std::unique_ptr<Connector> connect(const ConnectionProfile& profile, MillisClock clock = {});

/// Builds (or rebuilds) a database file from a creation script of DDL + inserts.
void load_fixture_script(const std::string& script_path, const std::string& database_path);

}  // namespace dpcc
