#pragma once

#include "dpcc/state.hpp"
#include "dpcc/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dpcc {

/// A named file-like artifact, e.g. "sql/q0001/v2.sql".
struct Artifact {
    std::string name;
    std::string content;

    friend bool operator==(const Artifact&, const Artifact&) = default;
};

struct Payload {
    std::string name;
    std::string digest;  // SHA-256 of content
    std::string content;
};

struct Commit {
    std::string commit_id;
    std::optional<std::string> parent_id;
    std::string author;
    std::int64_t timestamp_ms = 0;
    std::string message;
    std::vector<Payload> payloads;
};

/// Hash of (parent, author, timestamp, message, payload names and digests).
std::string compute_commit_id(const Commit& commit);

void to_json(nlohmann::json& j, const Commit& c);  // header only: no payload contents

/// Files a batch of applied events produces in the worktree layout:
/// questions/<id>.txt, sql/<id>/v<N>.sql, views/<name>.sql,
/// topics/assignments.txt and contract.json. `after` is the state the
/// events led to.
std::vector<Artifact> artifacts_for(std::span<const StateEvent> events, const DataProductState& after);

/// Append-only content-addressed commit log kept in a directory:
///   objects/<digest>     payload bytes
///   commits.jsonl        one commit header per line, oldest first
///   journal.jsonl        run journal records
class VersionStore {
public:
    using Clock = std::function<std::int64_t()>;

    /// Opens (creating if needed) a store and loads its history.
    explicit VersionStore(std::filesystem::path directory, Clock clock = {});

    /// Throws empty_artifacts for an empty list, validation for duplicate names.
    std::string commit(const std::vector<Artifact>& artifacts, const std::string& author, const std::string& message);

    /// Re-reads everything from disk: every commit id must recompute, every
    /// parent resolve to the preceding commit, every payload match its digest.
    bool verify_chain() const;

    std::vector<Commit> commits() const;
    std::optional<std::string> head() const;
    std::size_t size() const;

    /// Writes the head tree (all artifacts folded oldest → newest).
    void export_worktree(const std::filesystem::path& directory) const;

    /// Same tree, but materialized by writing each commit's files in turn.
    void replay_export(const std::filesystem::path& directory) const;

    void append_journal(const nlohmann::json& record);
    std::vector<nlohmann::json> journal() const;

    const std::filesystem::path& directory() const { return dir_; }

private:
    void load();

    std::filesystem::path dir_;
    Clock clock_;
    mutable std::mutex mu_;
    std::vector<Commit> commits_;
};

/// True when both directory trees hold the same relative paths with
/// byte-identical contents.
bool trees_equal(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace dpcc
