#pragma once

#include "comodel/errors.hpp"
#include "comodel/geometry.hpp"
#include "comodel/mesh.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace comodel {

struct MaterialSpec {
    Vec3 base_color = Vec3::Constant(0.8);
    std::string name;

    bool operator==(const MaterialSpec& other) const {
        return base_color == other.base_color && name == other.name;
    }
};

struct SceneObject {
    std::string name;
    PrimitiveSpec primitive;
    Transform transform;
    MaterialSpec material;
    bool hidden = false;

    bool operator==(const SceneObject&) const = default;
};

/// Hiding moves x up by exactly this amount and showing moves it back. Shown objects must keep
/// x below it.
inline constexpr double kHideShift = 1000.0;

/// The authoritative modeling state. Objects are keyed (and iterated) by name.
struct Scene {
    std::map<std::string, SceneObject, std::less<>> objects;
    std::uint64_t revision = 0;

    bool operator==(const Scene&) const = default;

    const SceneObject* find(std::string_view name) const;
};

bool is_valid_name(std::string_view name);

// Mutations. Each successful call increments scene.revision by exactly one; nothing is ever removed.

/// Creates `name` or replaces its primitive/transform (and material when given) in place.
/// The transform is given as if the object were shown. The hidden flag is preserved, and a hidden
/// object is stored shifted by kHideShift.
const SceneObject& upsert_object(Scene& scene, std::string_view name, const PrimitiveSpec& primitive,
                                 const Transform& transform,
                                 const std::optional<MaterialSpec>& material = std::nullopt);
/// Moves the object out of view (x += 1000 unless already hidden) and flags it hidden.
const SceneObject& hide_object(Scene& scene, std::string_view name);
/// Reverses hide_object.
const SceneObject& show_object(Scene& scene, std::string_view name);
/// The object's transform as if it were shown.
Transform visible_transform(const SceneObject& object);

Box3 world_bounds(const SceneObject& object);
Points3 world_vertices(const SceneObject& object, const Mesh& mesh);

struct ObjectInfo {
    SceneObject object;
    std::size_t vertex_count = 0;
    Box3 world_bounds;
};

struct ObjectSummary {
    std::string name;
    std::string primitive_kind;
    bool hidden = false;
};

struct SceneInfo {
    std::uint64_t revision = 0;
    std::vector<ObjectSummary> object_summaries;
    std::size_t visible_count = 0;
    /// Vertices of visible objects only (array copies included).
    std::size_t total_vertex_count = 0;
};

ObjectInfo get_object_info(const Scene& scene, std::string_view name);
SceneInfo get_scene_info(const Scene& scene);

nlohmann::json to_json(const ObjectInfo& info);
nlohmann::json to_json(const SceneInfo& info);

// Canonical documents: alphabetical keys, objects sorted by name, shortest round-trip reals.

nlohmann::json object_document(const SceneObject& object);
SceneObject object_from_document(const nlohmann::json& doc);
nlohmann::json primitive_document(const PrimitiveSpec& primitive);
PrimitiveSpec primitive_from_document(const nlohmann::json& doc);
nlohmann::json transform_document(const Transform& transform);
Transform transform_from_document(const nlohmann::json& doc);
nlohmann::json material_document(const MaterialSpec& material);
MaterialSpec material_from_document(const nlohmann::json& doc);
nlohmann::json vec_document(const Vec3& v);
Vec3 vec_from_document(const nlohmann::json& doc);

nlohmann::json snapshot(const Scene& scene);
std::string snapshot_text(const Scene& scene);
/// Throws SceneError(malformed_document) on anything that is not a valid snapshot.
Scene restore(const nlohmann::json& doc);
Scene restore(std::string_view text);

/// Wavefront OBJ text of the visible objects in world space: one "o" group per object, no normals.
std::string to_obj(const Scene& scene);

void validate(const Transform& transform);
void validate(const MaterialSpec& material);

}  // namespace comodel
