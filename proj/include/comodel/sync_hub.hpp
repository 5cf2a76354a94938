#pragma once

#include "comodel/orchestrator.hpp"
#include "comodel/scene_host.hpp"
#include "comodel/tool_protocol.hpp"

#include <json.hpp>

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace comodel::sync {

inline constexpr std::size_t kDefaultQueueLimit = 1024;

using ClientId = std::uint64_t;

/// Transport-agnostic fan-out of scene state to connected clients.
///
/// Every client gets a snapshot on connect and then one scene_delta per engine revision, in
/// revision order. Outbound frames wait in a bounded per-client queue that the transport drains;
/// a client whose queue is full is sent error{resync} followed by a fresh snapshot.
/// Frames are {"seq", "kind", "payload"} documents; inbound frames are {"kind", "payload"}.
class SyncHub {
public:
    /// Invoked (possibly from the mutating thread) when a client's queue becomes non-empty.
    using Wake = std::function<void()>;

    SyncHub(SceneHost& host, tools::ToolServer& tools, std::size_t queue_limit = kDefaultQueueLimit);
    ~SyncHub();

    SyncHub(const SyncHub&) = delete;
    SyncHub& operator=(const SyncHub&) = delete;

    ClientId connect(Wake wake = {});
    void disconnect(ClientId id);

    /// Next queued frame for the client, if any.
    std::optional<std::string> pop(ClientId id);
    std::vector<std::string> drain(ClientId id);

    /// Applies one inbound frame. Errors go to the sender only.
    void on_client_message(ClientId id, std::string_view text);

    /// Sends an agent_event frame to every client.
    void broadcast_agent_event(const nlohmann::json& event);

    /// Target for human_feedback messages; nullptr detaches.
    void attach_session(agent::HumanInputChannel* inbox);

    std::size_t client_count() const;

private:
    struct Client {
        std::uint64_t next_seq = 0;
        std::deque<std::string> queue;
        Wake wake;
    };

    void on_mutation(const Scene& scene, std::uint64_t revision, std::string_view changed);
    // Callers hold mutex_.
    void enqueue_locked(Client& c, std::string_view kind, const nlohmann::json& payload);
    void resync_locked(Client& c, const Scene& scene);
    void send_to(ClientId id, std::string_view kind, const nlohmann::json& payload);
    void send_snapshot(ClientId id);
    void error_to(ClientId id, const std::string& code, const std::string& message);

    SceneHost& host_;
    tools::ToolServer& tools_;
    std::size_t limit_;
    SceneHost::ListenerId listener_ = 0;

    mutable std::mutex mutex_;
    std::map<ClientId, Client> clients_;
    ClientId next_id_ = 1;
    agent::HumanInputChannel* inbox_ = nullptr;
};

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Client-side replica built from snapshot and delta frames.
class SceneMirror {
public:
    /// Throws ProtocolError on a seq regression or a revision gap.
    void apply(std::string_view frame);
    void apply(const std::string& frame) { apply(std::string_view(frame)); }
    void apply(const nlohmann::json& frame);

    const Scene& scene() const { return scene_; }
    std::optional<std::uint64_t> last_seq() const { return last_seq_; }
    bool has_snapshot() const { return has_snapshot_; }

private:
    Scene scene_;
    std::optional<std::uint64_t> last_seq_;
    bool has_snapshot_ = false;
};

}  // namespace comodel::sync
