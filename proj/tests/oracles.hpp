#pragma once

// Independent reference computations used by the unit tests and the acceptance runner.
// Nothing here calls into the code under test except to build inputs.

#include "comodel/mesh.hpp"
#include "comodel/scene.hpp"

#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline std::string data_path(const std::string& name) { return std::string(COMODEL_TEST_DATA) + "/" + name; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Closed-form vertex counts, written out independently of the mesh generator.
struct VertexFormula {
    long long operator()(const comodel::Cube&) const { return 8; }
    long long operator()(const comodel::Plane&) const { return 4; }
    long long operator()(const comodel::UvSphere& s) const { return 1LL * s.segments * (s.rings - 1) + 2; }
    long long operator()(const comodel::IcoSphere& s) const {
        long long p = 1;
        for (int i = 0; i < s.subdivisions; ++i) p *= 4;
        return 10 * p + 2;
    }
    long long operator()(const comodel::Cylinder& s) const { return 2LL * s.segments; }
    long long operator()(const comodel::Cone& s) const { return s.segments + 1LL; }
    long long operator()(const comodel::Torus& s) const { return 1LL * s.major_segments * s.minor_segments; }
};

inline long long expected_vertices(const comodel::PrimitiveSpec& spec) {
    const long long one = std::visit(VertexFormula{}, spec.shape);
    return spec.array ? one * spec.array->count : one;
}

/// V - E + F with E counted as distinct undirected index pairs along face boundaries.
inline long long euler_characteristic(const comodel::Mesh& mesh) {
    std::set<std::pair<int, int>> edges;
    for (const auto& f : mesh.faces) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            int a = f[i], b = f[(i + 1) % f.size()];
            if (a > b) std::swap(a, b);
            edges.insert({a, b});
        }
    }
    return static_cast<long long>(mesh.vertex_count()) - static_cast<long long>(edges.size()) +
           static_cast<long long>(mesh.faces.size());
}

/// Number of distinct vertex indices that some face actually uses.
inline std::size_t referenced_vertices(const comodel::Mesh& mesh) {
    std::set<int> used;
    for (const auto& f : mesh.faces) used.insert(f.begin(), f.end());
    return used.size();
}

/// Every index in range and no face repeating a vertex.
inline bool faces_well_formed(const comodel::Mesh& mesh) {
    for (const auto& f : mesh.faces) {
        if (f.size() < 3) return false;
        std::set<int> seen;
        for (int i : f) {
            if (i < 0 || i >= static_cast<int>(mesh.vertex_count())) return false;
            if (!seen.insert(i).second) return false;
        }
    }
    return true;
}

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline comodel::Vec3 random_vec(Rng& rng, double lo, double hi) {
    return {uniform_real(rng, lo, hi), uniform_real(rng, lo, hi), uniform_real(rng, lo, hi)};
}

/// Random in-bounds shape of the given kind index (0..6 in primitive_kinds order: see kind_of).
inline comodel::PrimitiveShape random_shape(Rng& rng, int kind) {
    switch (kind) {
        case 0: return comodel::Cube{uniform_real(rng, 0.01, 10)};
        case 1: return comodel::Plane{uniform_real(rng, 0.01, 10)};
        case 2: return comodel::UvSphere{uniform_int(rng, 3, 64), uniform_int(rng, 3, 48), uniform_real(rng, 0.01, 5)};
        case 3: return comodel::IcoSphere{uniform_int(rng, 0, 5), uniform_real(rng, 0.01, 5)};
        case 4: return comodel::Cylinder{uniform_int(rng, 3, 96), uniform_real(rng, 0.01, 5), uniform_real(rng, 0.01, 5)};
        case 5: return comodel::Cone{uniform_int(rng, 3, 96), uniform_real(rng, 0.01, 5), uniform_real(rng, 0.01, 5)};
        default: {
            const double major = uniform_real(rng, 0.1, 5);
            return comodel::Torus{uniform_int(rng, 3, 64), uniform_int(rng, 3, 32), major,
                                  uniform_real(rng, 0.01, 0.99) * major};
        }
    }
}

inline constexpr int kKindCount = 7;

inline comodel::PrimitiveSpec random_spec(Rng& rng, bool allow_array = true) {
    comodel::PrimitiveSpec spec;
    spec.shape = random_shape(rng, uniform_int(rng, 0, kKindCount - 1));
    if (allow_array && uniform_int(rng, 0, 3) == 0) {
        spec.array = comodel::ArrayModifier{uniform_int(rng, 1, 5), random_vec(rng, -2, 2)};
    }
    return spec;
}

inline comodel::Transform random_transform(Rng& rng) {
    comodel::Transform t;
    t.translation = random_vec(rng, -20, 20);
    t.rotation_euler = random_vec(rng, -3.2, 3.2);
    t.scale = random_vec(rng, 0.1, 3);
    return t;
}

inline comodel::MaterialSpec random_material(Rng& rng) {
    comodel::MaterialSpec m;
    m.base_color = random_vec(rng, 0, 1);
    if (uniform_int(rng, 0, 1) == 0) m.name = "mat_" + std::to_string(uniform_int(rng, 0, 99));
    return m;
}

/// Builds a scene through the engine's own mutation API with names drawn from a small pool.
inline comodel::Scene random_scene(Rng& rng, int max_objects = 8, const std::string& prefix = "Obj") {
    comodel::Scene s;
    const int n = uniform_int(rng, 0, max_objects);
    for (int i = 0; i < n; ++i) {
        const std::string name = prefix + "_" + std::to_string(uniform_int(rng, 0, max_objects));
        comodel::upsert_object(s, name, random_spec(rng), random_transform(rng), random_material(rng));
        if (uniform_int(rng, 0, 4) == 0) comodel::hide_object(s, name);
    }
    return s;
}

}  // namespace oracle
