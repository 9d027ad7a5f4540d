#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpcc {

enum class ErrorCode {
    dangling_reference,
    duplicate_identifier,
    unknown_question,
    version_gap,
    invalid_value,
    parse_error,
    unresolved_identifier,
    pattern_mismatch,
    duplicate_metric,
    unknown_metric,
    missing_value,
    duplicate_tool,
    parameter_bounds,
    no_eligible_question,
    no_parent_available,
    no_shared_pattern,
    connection_error,
    empty_schema,
    name_collision,
    sql_error,
    empty_artifacts,
    busy,
    no_pending_approval,
    unknown_iteration,
    invalid_transition,
    validation,
    not_connected,
    not_found,
    conflict,
    io_error,
    chain_corrupt,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries a machine-readable code; the
/// control API maps codes to HTTP statuses.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dpcc
