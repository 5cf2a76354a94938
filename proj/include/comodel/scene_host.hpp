#pragma once

#include "comodel/scene.hpp"

#include <cstdint>
#include <functional>
#include <mutex>
#include <shared_mutex>
#include <string_view>
#include <vector>

namespace comodel {

/// Reports one engine mutation: the scene right after it, and the object it touched.
using ChangeSink = std::function<void(const Scene&, std::string_view changed)>;

/// Single-writer owner of a Scene.
///
/// All mutation goes through mutate(), which runs its callback under an exclusive lock, so
/// concurrent writers are serialized in lock-acquisition order. The callback receives a
/// ChangeSink that it must invoke once per successful engine operation; subscribers see the
/// notifications in revision order, while the lock is still held. Reads take a shared lock.
class SceneHost {
public:
    using Listener = std::function<void(const Scene&, std::uint64_t revision, std::string_view changed)>;
    using ListenerId = std::uint64_t;

    SceneHost() = default;
    explicit SceneHost(Scene initial) : scene_(std::move(initial)) {}

    SceneHost(const SceneHost&) = delete;
    SceneHost& operator=(const SceneHost&) = delete;

    template <class F>
    decltype(auto) mutate(F&& fn) {
        std::unique_lock lock(mutex_);
        const std::uint64_t before = scene_.revision;
        std::uint64_t notified = 0;
        ChangeSink sink = [&](const Scene& s, std::string_view changed) {
            ++notified;
            notify_locked(s, changed);
        };
        struct Check {
            const Scene& scene;
            const std::uint64_t& before;
            const std::uint64_t& notified;
            ~Check() { verify_notifications(scene.revision - before, notified); }
        } check{scene_, before, notified};
        return std::forward<F>(fn)(scene_, sink);
    }

    template <class F>
    decltype(auto) read(F&& fn) const {
        std::shared_lock lock(mutex_);
        return std::forward<F>(fn)(scene_);
    }

    Scene snapshot() const;
    std::uint64_t revision() const;

    ListenerId subscribe(Listener listener);
    void unsubscribe(ListenerId id);

    /// Runs `fn` under the exclusive lock without mutating, e.g. to register a client and take its
    /// initial snapshot atomically with respect to the mutation stream.
    template <class F>
    decltype(auto) exclusive(F&& fn) {
        std::unique_lock lock(mutex_);
        return std::forward<F>(fn)(static_cast<const Scene&>(scene_));
    }

private:
    void notify_locked(const Scene& scene, std::string_view changed);
    static void verify_notifications(std::uint64_t revisions, std::uint64_t notifications);

    mutable std::shared_mutex mutex_;
    Scene scene_;
    std::vector<std::pair<ListenerId, Listener>> listeners_;
    ListenerId next_id_ = 1;
};

}  // namespace comodel
