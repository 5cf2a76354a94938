#include "comodel/transcript.hpp"

#include "comodel/digest.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <stdexcept>

namespace comodel::agent {
namespace {

using json = nlohmann::json;

constexpr std::array<std::pair<EventKind, std::string_view>, 8> kNames = {{
    {EventKind::plan_created, "plan_created"},
    {EventKind::step_started, "step_started"},
    {EventKind::step_finished, "step_finished"},
    {EventKind::tool_error, "tool_error"},
    {EventKind::critique, "critique"},
    {EventKind::human_input, "human_input"},
    {EventKind::metrics_snapshot, "metrics_snapshot"},
    {EventKind::phase_change, "phase_change"},
}};

}  // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kNames) {
        if (k == kind) return name;
    }
    return "?";
}

EventKind event_kind_from_string(std::string_view text) {
    for (const auto& [k, name] : kNames) {
        if (name == text) return k;
    }
    throw std::invalid_argument("unknown event kind '" + std::string(text) + "'");
}

json to_json(const Event& e) {
    return {{"seq", e.seq}, {"timestamp", e.timestamp}, {"kind", std::string(to_string(e.kind))}, {"payload", e.payload}};
}

Event event_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("seq") || !doc["seq"].is_number_unsigned() || !doc.contains("kind") ||
        !doc["kind"].is_string() || !doc.contains("payload")) {
        throw std::invalid_argument("event must carry seq, kind and payload");
    }
    Event e;
    e.seq = doc["seq"].get<std::uint64_t>();
    e.timestamp = doc.value("timestamp", "");
    e.kind = event_kind_from_string(doc["kind"].get<std::string>());
    e.payload = doc["payload"];
    return e;
}

std::string system_timestamp() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

const Event& Transcript::append(EventKind kind, json payload) {
    Event e;
    e.seq = events_.size();
    e.timestamp = clock_ ? clock_() : "";
    e.kind = kind;
    e.payload = std::move(payload);
    events_.push_back(std::move(e));
    return events_.back();
}

std::string Transcript::to_jsonl() const {
    std::string out;
    for (const auto& e : events_) out += to_json(e).dump() + "\n";
    return out;
}

std::string Transcript::hash() const {
    std::string text;
    for (const auto& e : events_) {
        json doc = to_json(e);
        doc.erase("timestamp");
        text += doc.dump() + "\n";
    }
    return sha256_hex(text);
}

std::vector<json> parse_jsonl(std::string_view text) {
    std::vector<json> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        json doc = json::parse(line.begin(), line.end(), nullptr, false);
        if (doc.is_discarded()) throw std::invalid_argument("line " + std::to_string(line_no) + " is not JSON");
        out.push_back(std::move(doc));
    }
    return out;
}

Transcript Transcript::from_jsonl(std::string_view text) {
    Transcript t(nullptr);
    for (const auto& doc : parse_jsonl(text)) {
        Event e = event_from_json(doc);
        if (e.seq != t.events_.size()) throw std::invalid_argument("transcript seq is not contiguous from 0");
        t.events_.push_back(std::move(e));
    }
    return t;
}

}  // namespace comodel::agent
