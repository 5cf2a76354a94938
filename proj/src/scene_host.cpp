#include "comodel/scene_host.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>

namespace comodel {

Scene SceneHost::snapshot() const {
    std::shared_lock lock(mutex_);
    return scene_;
}

std::uint64_t SceneHost::revision() const {
    std::shared_lock lock(mutex_);
    return scene_.revision;
}

SceneHost::ListenerId SceneHost::subscribe(Listener listener) {
    std::unique_lock lock(mutex_);
    const ListenerId id = next_id_++;
    listeners_.emplace_back(id, std::move(listener));
    return id;
}

void SceneHost::unsubscribe(ListenerId id) {
    std::unique_lock lock(mutex_);
    std::erase_if(listeners_, [id](const auto& entry) { return entry.first == id; });
}

void SceneHost::notify_locked(const Scene& scene, std::string_view changed) {
    for (const auto& [_, listener] : listeners_) listener(scene, scene.revision, changed);
}

void SceneHost::verify_notifications(std::uint64_t revisions, std::uint64_t notifications) {
    if (revisions != notifications) {
        std::fprintf(stderr, "SceneHost: %llu revisions but %llu change notifications\n",
                     static_cast<unsigned long long>(revisions), static_cast<unsigned long long>(notifications));
        assert(false && "mutation did not report every revision");
    }
}

}  // namespace comodel
