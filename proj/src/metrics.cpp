#include "comodel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace comodel::metrics {
namespace {

bool close(const Vec3& a, const Vec3& b) { return ((a - b).cwiseAbs().array() <= kMatchTolerance).all(); }

double pair_credit(const SceneObject& a, const SceneObject& b, const SimilarityWeights& w) {
    double p = 0.0;
    if (a.primitive == b.primitive) p += w.primitive;
    if (close(a.transform.translation, b.transform.translation) &&
        close(a.transform.rotation_euler, b.transform.rotation_euler) && close(a.transform.scale, b.transform.scale)) {
        p += w.transform;
    }
    if (close(a.material.base_color, b.material.base_color)) p += w.material;
    return p;
}

}  // namespace

int geometry_count(const Scene& scene) {
    int n = 0;
    for (const auto& [_, obj] : scene.objects) n += obj.hidden ? 0 : 1;
    return n;
}

long long vertex_count(const Scene& scene) {
    return static_cast<long long>(get_scene_info(scene).total_vertex_count);
}

double scene_similarity(const Scene& a, const Scene& b, const SimilarityWeights& weights) {
    const int va = geometry_count(a);
    const int vb = geometry_count(b);
    if (va == 0 && vb == 0) return 1.0;

    // Walk a's names in sorted order; the sum is the same term sequence whichever side is first.
    double sum = 0.0;
    for (const auto& [name, oa] : a.objects) {
        if (oa.hidden) continue;
        const SceneObject* ob = b.find(name);
        if (!ob || ob->hidden) continue;
        sum += pair_credit(oa, *ob, weights);
    }
    return std::clamp(sum * 2.0 / (va + vb), 0.0, 1.0);
}

std::vector<MetricsSnapshot> iteration_report(const std::vector<nlohmann::json>& events,
                                              const std::optional<SimilarityWeights>& weights) {
    std::vector<MetricsSnapshot> rows;
    std::optional<Scene> previous;
    for (const auto& e : events) {
        if (e.value("kind", "") != "metrics_snapshot") continue;
        const auto& p = e.at("payload");
        MetricsSnapshot row;
        row.iteration = p.at("iteration").get<int>();
        row.geometry_count = p.at("geometry_count").get<int>();
        row.vertex_count = p.at("vertex_count").get<long long>();
        if (weights) {
            Scene current = restore(p.at("scene"));
            if (previous) row.similarity_to_previous = scene_similarity(*previous, current, *weights);
            previous = std::move(current);
        } else if (p.contains("similarity_to_previous") && p["similarity_to_previous"].is_number()) {
            row.similarity_to_previous = p["similarity_to_previous"].get<double>();
        }
        rows.push_back(row);
    }
    if (rows.empty()) throw NoMetricsEvents();
    return rows;
}

std::string to_csv(const std::vector<MetricsSnapshot>& rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.iteration) + "," + std::to_string(r.geometry_count) + "," +
               std::to_string(r.vertex_count) + ",";
        if (r.similarity_to_previous) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", *r.similarity_to_previous);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace comodel::metrics
