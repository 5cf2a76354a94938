#pragma once

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace comodel::agent {

enum class EventKind {
    plan_created,
    step_started,
    step_finished,
    tool_error,
    critique,
    human_input,
    metrics_snapshot,
    phase_change,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view text);

struct Event {
    std::uint64_t seq = 0;
    std::string timestamp;
    EventKind kind = EventKind::phase_change;
    nlohmann::json payload;
};

nlohmann::json to_json(const Event& event);
Event event_from_json(const nlohmann::json& doc);

/// Returns an RFC 3339 UTC timestamp. Tests inject fixed clocks.
using Clock = std::function<std::string()>;
std::string system_timestamp();

/// Append-only event log. seq runs 0, 1, 2, ... in append order.
class Transcript {
public:
    explicit Transcript(Clock clock = system_timestamp) : clock_(std::move(clock)) {}

    const Event& append(EventKind kind, nlohmann::json payload);
    const std::vector<Event>& events() const { return events_; }
    std::size_t size() const { return events_.size(); }

    /// One event per line, LF-terminated.
    std::string to_jsonl() const;
    /// SHA-256 over the events with timestamps left out.
    std::string hash() const;

    /// Throws std::invalid_argument on malformed lines or a broken seq sequence.
    static Transcript from_jsonl(std::string_view text);

private:
    Clock clock_;
    std::vector<Event> events_;
};

/// Parses JSON-Lines into raw documents (blank lines skipped). Throws std::invalid_argument.
std::vector<nlohmann::json> parse_jsonl(std::string_view text);

}  // namespace comodel::agent
