#include "comodel/mesh.hpp"

#include "comodel/errors.hpp"

#include <array>
#include <cmath>
#include <map>
#include <utility>

namespace comodel {
namespace {

struct ParamSlot {
    std::string_view key;
    std::variant<int*, double*> slot;
};

std::vector<ParamSlot> slots(PrimitiveShape& shape) {
    return std::visit(
        [](auto& s) -> std::vector<ParamSlot> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Cube> || std::is_same_v<T, Plane>) {
                return {{"size", &s.size}};
            } else if constexpr (std::is_same_v<T, UvSphere>) {
                return {{"segments", &s.segments}, {"rings", &s.rings}, {"radius", &s.radius}};
            } else if constexpr (std::is_same_v<T, IcoSphere>) {
                return {{"subdivisions", &s.subdivisions}, {"radius", &s.radius}};
            } else if constexpr (std::is_same_v<T, Cylinder> || std::is_same_v<T, Cone>) {
                return {{"segments", &s.segments}, {"radius", &s.radius}, {"depth", &s.depth}};
            } else {
                return {{"major_segments", &s.major_segments},
                        {"minor_segments", &s.minor_segments},
                        {"major_radius", &s.major_radius},
                        {"minor_radius", &s.minor_radius}};
            }
        },
        shape);
}

[[noreturn]] void bad_params(const std::string& message) {
    throw SceneError(SceneErrc::invalid_primitive_params, message);
}

void require(bool ok, const std::string& message) {
    if (!ok) bad_params(message);
}

void require_positive(double v, std::string_view key) {
    require(std::isfinite(v) && v > 0.0, std::string(key) + " must be > 0");
}

constexpr double kMaxVerticesPerObject = 4'000'000;

// Upper estimate, in floating point so absurd parameters cannot overflow.
double vertex_budget(const PrimitiveSpec& spec) {
    const double base = std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, UvSphere>) return double(s.segments) * s.rings;
            else if constexpr (std::is_same_v<T, IcoSphere>) return 10.0 * std::pow(4.0, s.subdivisions) + 2;
            else if constexpr (std::is_same_v<T, Cylinder> || std::is_same_v<T, Cone>) return 2.0 * s.segments;
            else if constexpr (std::is_same_v<T, Torus>) return double(s.major_segments) * s.minor_segments;
            else return 8.0;
        },
        spec.shape);
    return base * (spec.array ? spec.array->count : 1);
}

void require_segments(int v, std::string_view key) {
    require(v >= 3, std::string(key) + " must be >= 3");
}

// Ring of `n` points of radius r at height z, counter-clockwise seen from +Z.
void emit_ring(std::vector<Vec3>& out, int n, double r, double z) {
    for (int j = 0; j < n; ++j) {
        const double phi = 2.0 * kPi * j / n;
        out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    }
}

struct Builder {
    std::vector<Vec3> verts;
    std::vector<std::vector<int>> faces;

    Mesh finish() && {
        Mesh m;
        m.vertices.resize(3, static_cast<Eigen::Index>(verts.size()));
        for (std::size_t i = 0; i < verts.size(); ++i) m.vertices.col(static_cast<Eigen::Index>(i)) = verts[i];
        m.faces = std::move(faces);
        return m;
    }
};

Mesh build(const Cube& c) {
    const double h = c.size / 2.0;
    Builder b;
    b.verts = {{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
               {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}};
    b.faces = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4}, {2, 3, 7, 6}, {1, 2, 6, 5}, {3, 0, 4, 7}};
    return std::move(b).finish();
}

Mesh build(const Plane& p) {
    const double h = p.size / 2.0;
    Builder b;
    b.verts = {{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}};
    b.faces = {{0, 1, 2, 3}};
    return std::move(b).finish();
}

Mesh build(const UvSphere& s) {
    const int S = s.segments;
    const int R = s.rings;
    Builder b;
    b.verts.emplace_back(0.0, 0.0, s.radius);
    for (int i = 1; i < R; ++i) {
        const double theta = kPi * i / R;
        emit_ring(b.verts, S, s.radius * std::sin(theta), s.radius * std::cos(theta));
    }
    b.verts.emplace_back(0.0, 0.0, -s.radius);
    const int bottom = static_cast<int>(b.verts.size()) - 1;
    auto ring = [S](int i, int j) { return 1 + (i - 1) * S + (j % S); };

    for (int j = 0; j < S; ++j) b.faces.push_back({0, ring(1, j), ring(1, j + 1)});
    for (int i = 1; i < R - 1; ++i) {
        for (int j = 0; j < S; ++j) {
            b.faces.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1), ring(i, j + 1)});
        }
    }
    for (int j = 0; j < S; ++j) b.faces.push_back({bottom, ring(R - 1, j + 1), ring(R - 1, j)});
    return std::move(b).finish();
}

Mesh build(const IcoSphere& s) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Builder b;
    b.verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
               {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : b.verts) v.normalize();
    std::vector<std::array<int, 3>> tris = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

    for (int level = 0; level < s.subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoints;
        auto midpoint = [&](int a, int c) {
            const auto key = std::minmax(a, c);
            if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
            b.verts.push_back((b.verts[a] + b.verts[c]).normalized());
            const int idx = static_cast<int>(b.verts.size()) - 1;
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& [v0, v1, v2] : tris) {
            const int a = midpoint(v0, v1);
            const int c = midpoint(v1, v2);
            const int d = midpoint(v2, v0);
            next.push_back({v0, a, d});
            next.push_back({v1, c, a});
            next.push_back({v2, d, c});
            next.push_back({a, c, d});
        }
        tris = std::move(next);
    }
    for (auto& v : b.verts) v *= s.radius;
    b.faces.reserve(tris.size());
    for (const auto& [v0, v1, v2] : tris) b.faces.push_back({v0, v1, v2});
    return std::move(b).finish();
}

// Caps are single n-gons without a center vertex.
Mesh build(const Cylinder& c) {
    const int S = c.segments;
    Builder b;
    emit_ring(b.verts, S, c.radius, -c.depth / 2.0);
    emit_ring(b.verts, S, c.radius, c.depth / 2.0);
    for (int j = 0; j < S; ++j) {
        const int k = (j + 1) % S;
        b.faces.push_back({j, k, S + k, S + j});
    }
    std::vector<int> top(S), base(S);
    for (int j = 0; j < S; ++j) {
        top[j] = S + j;
        base[j] = S - 1 - j;
    }
    b.faces.push_back(std::move(top));
    b.faces.push_back(std::move(base));
    return std::move(b).finish();
}

Mesh build(const Cone& c) {
    const int S = c.segments;
    Builder b;
    emit_ring(b.verts, S, c.radius, -c.depth / 2.0);
    b.verts.emplace_back(0.0, 0.0, c.depth / 2.0);
    for (int j = 0; j < S; ++j) b.faces.push_back({j, (j + 1) % S, S});
    std::vector<int> base(S);
    for (int j = 0; j < S; ++j) base[j] = S - 1 - j;
    b.faces.push_back(std::move(base));
    return std::move(b).finish();
}

Mesh build(const Torus& t) {
    const int P = t.major_segments;
    const int Q = t.minor_segments;
    Builder b;
    for (int i = 0; i < P; ++i) {
        const double u = 2.0 * kPi * i / P;
        for (int j = 0; j < Q; ++j) {
            const double v = 2.0 * kPi * j / Q;
            const double w = t.major_radius + t.minor_radius * std::cos(v);
            b.verts.emplace_back(w * std::cos(u), w * std::sin(u), t.minor_radius * std::sin(v));
        }
    }
    auto idx = [P, Q](int i, int j) { return (i % P) * Q + (j % Q); };
    for (int i = 0; i < P; ++i) {
        for (int j = 0; j < Q; ++j) {
            b.faces.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)});
        }
    }
    return std::move(b).finish();
}

}  // namespace

std::string_view kind_name(const PrimitiveShape& shape) {
    static constexpr std::array<std::string_view, 7> names = {
        "cube", "plane", "uv_sphere", "ico_sphere", "cylinder", "cone", "torus"};
    return names[shape.index()];
}

const std::vector<std::string_view>& primitive_kinds() {
    static const std::vector<std::string_view> kinds = {
        "cube", "plane", "uv_sphere", "ico_sphere", "cylinder", "cone", "torus"};
    return kinds;
}

std::optional<PrimitiveShape> shape_for_kind(std::string_view kind) {
    if (kind == "cube") return Cube{};
    if (kind == "plane") return Plane{};
    if (kind == "uv_sphere") return UvSphere{};
    if (kind == "ico_sphere") return IcoSphere{};
    if (kind == "cylinder") return Cylinder{};
    if (kind == "cone") return Cone{};
    if (kind == "torus") return Torus{};
    return std::nullopt;
}

std::vector<ShapeParam> shape_params(const PrimitiveShape& shape) {
    PrimitiveShape copy = shape;
    std::vector<ShapeParam> out;
    for (const auto& s : slots(copy)) {
        if (const auto* ip = std::get_if<int*>(&s.slot)) {
            out.push_back({s.key, static_cast<double>(**ip), true});
        } else {
            out.push_back({s.key, *std::get<double*>(s.slot), false});
        }
    }
    return out;
}

bool has_param(const PrimitiveShape& shape, std::string_view key) {
    for (const auto& p : shape_params(shape)) {
        if (p.key == key) return true;
    }
    return false;
}

void set_param(PrimitiveShape& shape, std::string_view key, double value) {
    for (const auto& s : slots(shape)) {
        if (s.key != key) continue;
        if (auto* const* ip = std::get_if<int*>(&s.slot)) {
            if (!std::isfinite(value) || std::trunc(value) != value || std::abs(value) > 1e9) {
                bad_params(std::string(key) + " must be an integer");
            }
            **ip = static_cast<int>(value);
        } else {
            *std::get<double*>(s.slot) = value;
        }
        return;
    }
    bad_params(std::string(kind_name(shape)) + " has no parameter '" + std::string(key) + "'");
}

void validate(const PrimitiveSpec& spec) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Cube> || std::is_same_v<T, Plane>) {
                require_positive(s.size, "size");
            } else if constexpr (std::is_same_v<T, UvSphere>) {
                require_segments(s.segments, "segments");
                require_segments(s.rings, "rings");
                require_positive(s.radius, "radius");
            } else if constexpr (std::is_same_v<T, IcoSphere>) {
                require(s.subdivisions >= 0 && s.subdivisions <= 5, "subdivisions must be in 0..5");
                require_positive(s.radius, "radius");
            } else if constexpr (std::is_same_v<T, Cylinder> || std::is_same_v<T, Cone>) {
                require_segments(s.segments, "segments");
                require_positive(s.radius, "radius");
                require_positive(s.depth, "depth");
            } else {
                require_segments(s.major_segments, "major_segments");
                require_segments(s.minor_segments, "minor_segments");
                require_positive(s.major_radius, "major_radius");
                require_positive(s.minor_radius, "minor_radius");
                require(s.minor_radius < s.major_radius, "minor_radius must be < major_radius");
            }
        },
        spec.shape);
    if (spec.array) {
        require(spec.array->count >= 1, "array count must be >= 1");
        require(spec.array->offset.allFinite(), "array offset must be finite");
    }
    require(vertex_budget(spec) <= kMaxVerticesPerObject, "primitive exceeds the per-object vertex budget");
}

Mesh generate_mesh(const PrimitiveSpec& spec) {
    validate(spec);
    Mesh base = std::visit([](const auto& s) { return build(s); }, spec.shape);
    if (!spec.array || spec.array->count == 1) return base;

    const int copies = spec.array->count;
    const Eigen::Index n = base.vertices.cols();
    Mesh out;
    out.vertices.resize(3, n * copies);
    out.faces.reserve(base.faces.size() * static_cast<std::size_t>(copies));
    for (int i = 0; i < copies; ++i) {
        out.vertices.middleCols(i * n, n) = base.vertices.colwise() + spec.array->offset * double(i);
        for (const auto& f : base.faces) {
            auto& g = out.faces.emplace_back(f);
            for (int& v : g) v += static_cast<int>(i * n);
        }
    }
    return out;
}

}  // namespace comodel
