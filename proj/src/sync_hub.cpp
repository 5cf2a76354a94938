#include "comodel/sync_hub.hpp"

#include <algorithm>

namespace comodel::sync {
namespace {

using json = nlohmann::json;

struct BadMessage {
    std::string message;
};

[[noreturn]] void bad(const std::string& message) { throw BadMessage{message}; }

void only_keys(const json& doc, std::initializer_list<std::string_view> allowed, const char* where) {
    for (const auto& [key, _] : doc.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || a == key;
        if (!ok) bad(std::string("unexpected key '") + key + "' in " + where);
    }
}

Vec3 vec3(const json& v, const std::string& what) {
    if (!v.is_array() || v.size() != 3) bad(what + " must be an array of 3 numbers");
    for (const auto& c : v) {
        if (!c.is_number()) bad(what + " must be an array of 3 numbers");
    }
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

SyncHub::SyncHub(SceneHost& host, tools::ToolServer& tools, std::size_t queue_limit)
    : host_(host), tools_(tools), limit_(std::max<std::size_t>(queue_limit, 2)) {
    listener_ = host_.subscribe(
        [this](const Scene& scene, std::uint64_t revision, std::string_view changed) { on_mutation(scene, revision, changed); });
}

SyncHub::~SyncHub() { host_.unsubscribe(listener_); }

void SyncHub::enqueue_locked(Client& c, std::string_view kind, const json& payload) {
    const json frame = {{"seq", c.next_seq++}, {"kind", kind}, {"payload", payload}};
    const bool was_empty = c.queue.empty();
    c.queue.push_back(frame.dump());
    if (was_empty && c.wake) c.wake();
}

void SyncHub::resync_locked(Client& c, const Scene& scene) {
    c.queue.clear();
    enqueue_locked(c, "error", {{"code", "resync"}, {"message", "outbound queue overflow; a fresh snapshot follows"}});
    enqueue_locked(c, "scene_snapshot", snapshot(scene));
}

void SyncHub::on_mutation(const Scene& scene, std::uint64_t revision, std::string_view changed) {
    json docs = json::array();
    if (const SceneObject* obj = scene.find(changed)) docs.push_back(object_document(*obj));
    const json payload = {{"revision", revision}, {"changed", docs}};
    std::lock_guard lock(mutex_);
    for (auto& [_, c] : clients_) {
        if (c.queue.size() >= limit_) resync_locked(c, scene);
        else enqueue_locked(c, "scene_delta", payload);
    }
}

ClientId SyncHub::connect(Wake wake) {
    // Under the scene lock, so no mutation lands between the snapshot and the first delta.
    return host_.exclusive([&](const Scene& scene) {
        std::lock_guard lock(mutex_);
        const ClientId id = next_id_++;
        Client& c = clients_[id];
        c.wake = std::move(wake);
        enqueue_locked(c, "scene_snapshot", snapshot(scene));
        return id;
    });
}

void SyncHub::disconnect(ClientId id) {
    std::lock_guard lock(mutex_);
    clients_.erase(id);
}

std::optional<std::string> SyncHub::pop(ClientId id) {
    std::lock_guard lock(mutex_);
    const auto it = clients_.find(id);
    if (it == clients_.end() || it->second.queue.empty()) return std::nullopt;
    std::string frame = std::move(it->second.queue.front());
    it->second.queue.pop_front();
    return frame;
}

std::vector<std::string> SyncHub::drain(ClientId id) {
    std::vector<std::string> out;
    while (auto f = pop(id)) out.push_back(std::move(*f));
    return out;
}

std::size_t SyncHub::client_count() const {
    std::lock_guard lock(mutex_);
    return clients_.size();
}

void SyncHub::attach_session(agent::HumanInputChannel* inbox) {
    std::lock_guard lock(mutex_);
    inbox_ = inbox;
}

void SyncHub::send_to(ClientId id, std::string_view kind, const json& payload) {
    std::lock_guard lock(mutex_);
    const auto it = clients_.find(id);
    if (it == clients_.end()) return;
    // Replies are paced by the client's own requests, so they may run past the bound.
    enqueue_locked(it->second, kind, payload);
}

void SyncHub::send_snapshot(ClientId id) {
    host_.exclusive([&](const Scene& scene) {
        std::lock_guard lock(mutex_);
        const auto it = clients_.find(id);
        if (it != clients_.end()) enqueue_locked(it->second, "scene_snapshot", snapshot(scene));
    });
}

void SyncHub::error_to(ClientId id, const std::string& code, const std::string& message) {
    send_to(id, "error", {{"code", code}, {"message", message}});
}

void SyncHub::broadcast_agent_event(const json& event) {
    std::vector<ClientId> overflowing;
    {
        std::lock_guard lock(mutex_);
        for (auto& [id, c] : clients_) {
            if (c.queue.size() >= limit_) overflowing.push_back(id);
            else enqueue_locked(c, "agent_event", event);
        }
    }
    if (overflowing.empty()) return;
    host_.exclusive([&](const Scene& scene) {
        std::lock_guard lock(mutex_);
        for (ClientId id : overflowing) {
            const auto it = clients_.find(id);
            if (it != clients_.end()) resync_locked(it->second, scene);
        }
    });
}

void SyncHub::on_client_message(ClientId id, std::string_view text) {
    try {
        const json msg = json::parse(text.begin(), text.end(), nullptr, false);
        if (msg.is_discarded()) bad("frame is not JSON");
        if (!msg.is_object()) bad("frame must be a JSON object");
        if (msg.contains("seq")) bad("client frames must not carry seq");
        only_keys(msg, {"kind", "payload"}, "frame");
        if (!msg.contains("kind") || !msg["kind"].is_string()) bad("frame needs a string kind");
        const std::string kind = msg["kind"].get<std::string>();
        const json payload = msg.value("payload", json::object());
        if (!payload.is_object()) bad("payload must be an object");

        if (kind == "request_snapshot") {
            only_keys(payload, {}, "request_snapshot");
            send_snapshot(id);
        } else if (kind == "edit_object") {
            only_keys(payload, {"name", "transform", "material"}, "edit_object");
            if (!payload.contains("name") || !payload["name"].is_string()) bad("edit_object needs a string name");
            if (!payload.contains("transform") && !payload.contains("material")) {
                bad("edit_object needs transform and/or material");
            }
            const std::string name = payload["name"].get<std::string>();
            std::optional<Vec3> translation, rotation, scale;
            if (payload.contains("transform")) {
                const json& t = payload["transform"];
                if (!t.is_object()) bad("transform must be an object");
                only_keys(t, {"translation", "rotation_euler", "scale"}, "transform");
                if (t.contains("translation")) translation = vec3(t["translation"], "translation");
                if (t.contains("rotation_euler")) rotation = vec3(t["rotation_euler"], "rotation_euler");
                if (t.contains("scale")) scale = vec3(t["scale"], "scale");
            }
            std::optional<MaterialSpec> material;
            if (payload.contains("material")) {
                const json& m = payload["material"];
                if (!m.is_object()) bad("material must be an object");
                only_keys(m, {"base_color", "name"}, "material");
                if (!m.contains("base_color")) bad("material needs base_color");
                MaterialSpec spec;
                spec.base_color = vec3(m["base_color"], "base_color");
                if (m.contains("name")) {
                    if (!m["name"].is_string()) bad("material name must be a string");
                    spec.name = m["name"].get<std::string>();
                }
                material = spec;
            }

            std::optional<std::pair<std::string, std::string>> failure;
            std::uint64_t revision = 0;
            host_.mutate([&](Scene& scene, const ChangeSink& sink) {
                const SceneObject* current = scene.find(name);
                if (!current) {
                    failure = {"unknown_object", "no object named '" + name + "'"};
                    return;
                }
                const PrimitiveSpec primitive = current->primitive;
                // Clients see stored documents, so a hidden object's x may arrive already shifted.
                Transform t = visible_transform(*current);
                if (translation) {
                    t.translation = *translation;
                    if (current->hidden && t.translation.x() >= kHideShift) t.translation.x() -= kHideShift;
                }
                if (rotation) t.rotation_euler = *rotation;
                if (scale) t.scale = *scale;
                try {
                    upsert_object(scene, name, primitive, t, material);
                    sink(scene, name);
                    revision = scene.revision;
                } catch (const SceneError& e) {
                    failure = {std::string(to_string(e.code())), e.what()};
                }
            });
            if (failure) return error_to(id, failure->first, failure->second);
            send_to(id, "ack", {{"kind", "edit_object"}, {"revision", revision}});
        } else if (kind == "human_feedback") {
            only_keys(payload, {"text", "decision"}, "human_feedback");
            agent::HumanInput in;
            if (payload.contains("text")) {
                if (!payload["text"].is_string()) bad("text must be a string");
                in.text = payload["text"].get<std::string>();
            }
            if (payload.contains("decision")) {
                const json& d = payload["decision"];
                if (d == "approve") in.kind = agent::HumanKind::approve;
                else if (d == "stop") in.kind = agent::HumanKind::stop;
                else bad("decision must be \"approve\" or \"stop\"");
            } else if (in.text.find_first_not_of(" \t\r\n") == std::string::npos) {
                bad("feedback text must be nonempty");
            }
            agent::HumanInputChannel* inbox = nullptr;
            {
                std::lock_guard lock(mutex_);
                inbox = inbox_;
            }
            if (!inbox) return error_to(id, "no_session", "no agent session is attached");
            inbox->push(std::move(in));
            send_to(id, "ack", {{"kind", "human_feedback"}});
        } else if (kind == "set_toolsets") {
            only_keys(payload, {"enabled"}, "set_toolsets");
            if (!payload.contains("enabled")) bad("set_toolsets needs enabled");
            tools::ToolsetConfig config;
            try {
                config = tools::toolset_config_from_json(payload["enabled"]);
            } catch (const tools::ConfigError& e) {
                return error_to(id, "invalid_config", e.what());
            }
            tools_.set_config(config);
            send_to(id, "ack", {{"kind", "set_toolsets"}, {"enabled", tools::to_json(config)}});
        } else {
            bad("unknown message kind '" + kind + "'");
        }
    } catch (const BadMessage& e) {
        error_to(id, "bad_message", e.message);
    }
}

// ---------------------------------------------------------------------------------------------

void SceneMirror::apply(std::string_view frame) {
    const json doc = json::parse(frame.begin(), frame.end(), nullptr, false);
    if (doc.is_discarded()) throw ProtocolError("frame is not JSON");
    apply(doc);
}

void SceneMirror::apply(const json& frame) {
    const std::uint64_t seq = frame.at("seq").get<std::uint64_t>();
    if (last_seq_ && seq <= *last_seq_) throw ProtocolError("seq went backwards");
    last_seq_ = seq;
    const std::string kind = frame.at("kind").get<std::string>();
    const json& payload = frame.at("payload");
    if (kind == "scene_snapshot") {
        scene_ = restore(payload);
        has_snapshot_ = true;
    } else if (kind == "scene_delta") {
        if (!has_snapshot_) throw ProtocolError("delta before snapshot");
        const std::uint64_t revision = payload.at("revision").get<std::uint64_t>();
        if (revision != scene_.revision + 1) {
            throw ProtocolError("revision gap: have " + std::to_string(scene_.revision) + ", got " + std::to_string(revision));
        }
        for (const auto& doc : payload.at("changed")) {
            SceneObject obj = object_from_document(doc);
            scene_.objects[obj.name] = std::move(obj);
        }
        scene_.revision = revision;
    }
}

}  // namespace comodel::sync
