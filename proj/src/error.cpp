#include "dpcc/error.hpp"
#include "dpcc/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

namespace dpcc {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::dangling_reference: return "dangling_reference";
        case ErrorCode::duplicate_identifier: return "duplicate_identifier";
        case ErrorCode::unknown_question: return "unknown_question";
        case ErrorCode::version_gap: return "version_gap";
        case ErrorCode::invalid_value: return "invalid_value";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::unresolved_identifier: return "unresolved_identifier";
        case ErrorCode::pattern_mismatch: return "pattern_mismatch";
        case ErrorCode::duplicate_metric: return "duplicate_metric";
        case ErrorCode::unknown_metric: return "unknown_metric";
        case ErrorCode::missing_value: return "missing_value";
        case ErrorCode::duplicate_tool: return "duplicate_tool";
        case ErrorCode::parameter_bounds: return "parameter_bounds";
        case ErrorCode::no_eligible_question: return "no_eligible_question";
        case ErrorCode::no_parent_available: return "no_parent_available";
        case ErrorCode::no_shared_pattern: return "no_shared_pattern";
        case ErrorCode::connection_error: return "connection_error";
        case ErrorCode::empty_schema: return "empty_schema";
        case ErrorCode::name_collision: return "name_collision";
        case ErrorCode::sql_error: return "sql_error";
        case ErrorCode::empty_artifacts: return "empty_artifacts";
        case ErrorCode::busy: return "busy";
        case ErrorCode::no_pending_approval: return "no_pending_approval";
        case ErrorCode::unknown_iteration: return "unknown_iteration";
        case ErrorCode::invalid_transition: return "invalid_transition";
        case ErrorCode::validation: return "validation";
        case ErrorCode::not_connected: return "not_connected";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::conflict: return "conflict";
        case ErrorCode::io_error: return "io_error";
        case ErrorCode::chain_corrupt: return "chain_corrupt";
    }
    return "unknown";
}

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
        throw std::runtime_error("sha256: digest computation failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0f]);
    }
    return out;
}

}  // namespace dpcc
