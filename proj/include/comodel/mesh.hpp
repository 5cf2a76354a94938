#pragma once

#include "comodel/geometry.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace comodel {

// Low-poly primitives. Defaults follow the usual modeling-tool defaults.
struct Cube {
    double size = 2.0;
    bool operator==(const Cube&) const = default;
};
struct Plane {
    double size = 2.0;
    bool operator==(const Plane&) const = default;
};
struct UvSphere {
    int segments = 32;
    int rings = 16;
    double radius = 1.0;
    bool operator==(const UvSphere&) const = default;
};
struct IcoSphere {
    int subdivisions = 2;
    double radius = 1.0;
    bool operator==(const IcoSphere&) const = default;
};
struct Cylinder {
    int segments = 32;
    double radius = 1.0;
    double depth = 2.0;
    bool operator==(const Cylinder&) const = default;
};
struct Cone {
    int segments = 32;
    double radius = 1.0;
    double depth = 2.0;
    bool operator==(const Cone&) const = default;
};
struct Torus {
    int major_segments = 48;
    int minor_segments = 12;
    double major_radius = 1.0;
    double minor_radius = 0.25;
    bool operator==(const Torus&) const = default;
};

using PrimitiveShape = std::variant<Cube, Plane, UvSphere, IcoSphere, Cylinder, Cone, Torus>;

/// Linear array modifier: `count` copies, copy i shifted by i * offset in object space.
struct ArrayModifier {
    int count = 1;
    Vec3 offset = Vec3::Zero();
    bool operator==(const ArrayModifier& other) const {
        return count == other.count && offset == other.offset;
    }
};

struct PrimitiveSpec {
    PrimitiveShape shape = Cube{};
    std::optional<ArrayModifier> array;
    bool operator==(const PrimitiveSpec&) const = default;
};

std::string_view kind_name(const PrimitiveShape& shape);
/// Default-constructed shape for a kind name ("cube", "uv_sphere", ...); nullopt if unknown.
std::optional<PrimitiveShape> shape_for_kind(std::string_view kind);
const std::vector<std::string_view>& primitive_kinds();

/// One named numeric parameter of a shape. Integer parameters carry `is_integer`.
struct ShapeParam {
    std::string_view key;
    double value;
    bool is_integer;
};
std::vector<ShapeParam> shape_params(const PrimitiveShape& shape);
/// True when the shape has a parameter called `key`.
bool has_param(const PrimitiveShape& shape, std::string_view key);
/// Sets a parameter. Throws SceneError(invalid_primitive_params) for unknown keys or
/// non-integral values of integer parameters; range checks happen in validate().
void set_param(PrimitiveShape& shape, std::string_view key, double value);

/// Throws SceneError(invalid_primitive_params) naming the violated bound.
void validate(const PrimitiveSpec& spec);

/// Polygon mesh in object space. Faces list vertex indices counter-clockwise seen from outside.
struct Mesh {
    Points3 vertices;
    std::vector<std::vector<int>> faces;

    std::size_t vertex_count() const { return static_cast<std::size_t>(vertices.cols()); }
};

Mesh generate_mesh(const PrimitiveSpec& spec);

}  // namespace comodel
