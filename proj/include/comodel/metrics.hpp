#pragma once

#include "comodel/scene.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace comodel::metrics {

/// Per-pair credit for primitive, transform and material agreement. Must sum to 1.
struct SimilarityWeights {
    double primitive = 0.5;
    double transform = 0.3;
    double material = 0.2;
};

inline constexpr double kMatchTolerance = 1e-6;

/// Visible objects only; hidden objects count as removed.
int geometry_count(const Scene& scene);
long long vertex_count(const Scene& scene);

/// Name-matched similarity of the visible objects of two scenes, in [0, 1]. Two empty scenes give 1.
double scene_similarity(const Scene& a, const Scene& b, const SimilarityWeights& weights = {});

struct MetricsSnapshot {
    int iteration = 0;
    int geometry_count = 0;
    long long vertex_count = 0;
    std::optional<double> similarity_to_previous;
};

class NoMetricsEvents : public std::runtime_error {
public:
    NoMetricsEvents() : std::runtime_error("transcript contains no metrics_snapshot events") {}
};

/// Rows from the metrics_snapshot events of a transcript (JSON-Lines text or parsed events).
/// With non-default weights, similarities are recomputed from the scene snapshots the events carry.
std::vector<MetricsSnapshot> iteration_report(const std::vector<nlohmann::json>& events,
                                              const std::optional<SimilarityWeights>& weights = std::nullopt);

inline constexpr const char* kCsvHeader = "iteration,geometry_count,vertex_count,similarity_to_previous";

std::string to_csv(const std::vector<MetricsSnapshot>& rows);

}  // namespace comodel::metrics
