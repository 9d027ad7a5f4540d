#include "dpcc/event_bus.hpp"

namespace dpcc {

std::string_view to_string(ApiEventKind kind) {
    switch (kind) {
        case ApiEventKind::MetricUpdated: return "MetricUpdated";
        case ApiEventKind::ProposalPending: return "ProposalPending";
        case ApiEventKind::IterationCompleted: return "IterationCompleted";
        case ApiEventKind::RunTerminated: return "RunTerminated";
        case ApiEventKind::CommitCreated: return "CommitCreated";
    }
    return "?";
}

void to_json(nlohmann::json& j, const ApiEvent& e) {
    j = {{"sequence", e.sequence}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
}

std::int64_t EventBus::publish(ApiEventKind kind, nlohmann::json payload) {
    std::int64_t seq;
    {
        std::lock_guard lock(mu_);
        seq = next_++;
        events_.push_back({seq, kind, std::move(payload)});
        while (events_.size() > capacity_) events_.pop_front();
    }
    cv_.notify_all();
    return seq;
}

std::vector<ApiEvent> EventBus::since(std::int64_t since, std::size_t limit) const {
    std::lock_guard lock(mu_);
    std::vector<ApiEvent> out;
    for (const auto& e : events_) {
        if (e.sequence <= since) continue;
        out.push_back(e);
        if (out.size() >= limit) break;
    }
    return out;
}

bool EventBus::wait(std::int64_t since, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return next_ - 1 > since; });
}

std::int64_t EventBus::last_sequence() const {
    std::lock_guard lock(mu_);
    return next_ - 1;
}

}  // namespace dpcc
