#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <string_view>
#include <vector>

namespace dpcc {

enum class ApiEventKind { MetricUpdated, ProposalPending, IterationCompleted, RunTerminated, CommitCreated };

std::string_view to_string(ApiEventKind kind);

struct ApiEvent {
    std::int64_t sequence = 0;
    ApiEventKind kind = ApiEventKind::MetricUpdated;
    nlohmann::json payload;
};

void to_json(nlohmann::json& j, const ApiEvent& e);

/// Sequence-numbered broadcast log with a bounded backlog. Subscribers poll
/// with `since`, so a reconnecting client resumes where it stopped.
class EventBus {
public:
    explicit EventBus(std::size_t capacity = 20000) : capacity_(capacity) {}

    std::int64_t publish(ApiEventKind kind, nlohmann::json payload);

    /// Events with sequence > since, oldest first, at most `limit`.
    std::vector<ApiEvent> since(std::int64_t since, std::size_t limit = 1000) const;

    /// Blocks until an event newer than `since` exists or the timeout passes.
    bool wait(std::int64_t since, std::chrono::milliseconds timeout) const;

    std::int64_t last_sequence() const;

private:
    std::size_t capacity_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::deque<ApiEvent> events_;
    std::int64_t next_ = 1;
};

}  // namespace dpcc
