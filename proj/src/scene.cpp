#include "comodel/scene.hpp"

#include <algorithm>
#include <cmath>

namespace comodel {
namespace {

using json = nlohmann::json;

SceneObject& require_object(Scene& scene, std::string_view name) {
    auto it = scene.objects.find(name);
    if (it == scene.objects.end()) {
        throw SceneError(SceneErrc::unknown_object, "unknown object '" + std::string(name) + "'");
    }
    return it->second;
}

[[noreturn]] void malformed(const std::string& what) {
    throw SceneError(SceneErrc::malformed_document, "malformed document: " + what);
}

const json& field(const json& doc, const char* key) {
    if (!doc.is_object()) malformed(std::string("expected object holding '") + key + "'");
    auto it = doc.find(key);
    if (it == doc.end()) malformed(std::string("missing key '") + key + "'");
    return *it;
}

double real_field(const json& v, const char* what) {
    if (!v.is_number()) malformed(std::string(what) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) malformed(std::string(what) + " must be finite");
    return d;
}

void reject_unknown_keys(const json& doc, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, _] : doc.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            malformed("unexpected key '" + key + "'");
        }
    }
}

// Malformed-document wrapper for engine validators used during restore.
template <class F>
void as_document_error(F&& check) {
    try {
        check();
    } catch (const SceneError& e) {
        malformed(e.what());
    }
}

}  // namespace

std::string_view to_string(SceneErrc code) {
    switch (code) {
        case SceneErrc::invalid_name: return "invalid_name";
        case SceneErrc::invalid_primitive_params: return "invalid_primitive_params";
        case SceneErrc::invalid_transform: return "invalid_transform";
        case SceneErrc::invalid_material: return "invalid_material";
        case SceneErrc::unknown_object: return "unknown_object";
        case SceneErrc::malformed_document: return "malformed_document";
    }
    return "unknown";
}

const SceneObject* Scene::find(std::string_view name) const {
    auto it = objects.find(name);
    return it == objects.end() ? nullptr : &it->second;
}

bool is_valid_name(std::string_view name) {
    if (name.empty()) return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
}

void validate(const Transform& t) {
    if (!t.translation.allFinite() || !t.rotation_euler.allFinite() || !t.scale.allFinite()) {
        throw SceneError(SceneErrc::invalid_transform, "transform components must be finite");
    }
    if ((t.scale.array() <= 0.0).any()) {
        throw SceneError(SceneErrc::invalid_transform, "scale components must be > 0");
    }
}

void validate(const MaterialSpec& m) {
    if (!m.base_color.allFinite() || (m.base_color.array() < 0.0).any() || (m.base_color.array() > 1.0).any()) {
        throw SceneError(SceneErrc::invalid_material, "base_color channels must be in [0,1]");
    }
}

const SceneObject& upsert_object(Scene& scene, std::string_view name, const PrimitiveSpec& primitive,
                                 const Transform& transform, const std::optional<MaterialSpec>& material) {
    if (!is_valid_name(name)) {
        throw SceneError(SceneErrc::invalid_name,
                         "invalid object name '" + std::string(name) + "' (letters, digits, underscore)");
    }
    validate(primitive);
    validate(transform);
    if (material) validate(*material);

    auto it = scene.objects.find(name);
    const bool hidden = it != scene.objects.end() && it->second.hidden;
    if (transform.translation.x() >= kHideShift) {
        throw SceneError(SceneErrc::invalid_transform, "x >= 1000 is reserved for hidden objects");
    }
    Transform placed = transform;
    if (hidden) placed.translation.x() += kHideShift;

    if (it == scene.objects.end()) {
        SceneObject obj;
        obj.name = std::string(name);
        it = scene.objects.emplace(obj.name, std::move(obj)).first;
    }
    SceneObject& obj = it->second;
    obj.primitive = primitive;
    obj.transform = placed;
    if (material) obj.material = *material;
    ++scene.revision;
    return obj;
}

Transform visible_transform(const SceneObject& object) {
    Transform t = object.transform;
    if (object.hidden) t.translation.x() -= kHideShift;
    return t;
}

const SceneObject& hide_object(Scene& scene, std::string_view name) {
    SceneObject& obj = require_object(scene, name);
    if (!obj.hidden) obj.transform.translation.x() += kHideShift;
    obj.hidden = true;
    ++scene.revision;
    return obj;
}

const SceneObject& show_object(Scene& scene, std::string_view name) {
    SceneObject& obj = require_object(scene, name);
    if (obj.hidden) obj.transform.translation.x() -= kHideShift;
    obj.hidden = false;
    ++scene.revision;
    return obj;
}

Points3 world_vertices(const SceneObject& object, const Mesh& mesh) {
    return transform_points(object.transform, mesh.vertices);
}

Box3 world_bounds(const SceneObject& object) {
    return bounds_of(world_vertices(object, generate_mesh(object.primitive)));
}

ObjectInfo get_object_info(const Scene& scene, std::string_view name) {
    const SceneObject* obj = scene.find(name);
    if (!obj) throw SceneError(SceneErrc::unknown_object, "unknown object '" + std::string(name) + "'");
    const Mesh mesh = generate_mesh(obj->primitive);
    return {*obj, mesh.vertex_count(), bounds_of(world_vertices(*obj, mesh))};
}

SceneInfo get_scene_info(const Scene& scene) {
    SceneInfo info;
    info.revision = scene.revision;
    for (const auto& [name, obj] : scene.objects) {
        info.object_summaries.push_back({name, std::string(kind_name(obj.primitive.shape)), obj.hidden});
        if (!obj.hidden) {
            ++info.visible_count;
            info.total_vertex_count += generate_mesh(obj.primitive).vertex_count();
        }
    }
    return info;
}

json to_json(const ObjectInfo& info) {
    json doc = object_document(info.object);
    doc["vertex_count"] = info.vertex_count;
    doc["world_bounds"] = {{"min", vec_document(info.world_bounds.min())},
                           {"max", vec_document(info.world_bounds.max())}};
    return doc;
}

json to_json(const SceneInfo& info) {
    json summaries = json::array();
    for (const auto& s : info.object_summaries) {
        summaries.push_back({{"name", s.name}, {"primitive_kind", s.primitive_kind}, {"hidden", s.hidden}});
    }
    return {{"revision", info.revision},
            {"object_summaries", std::move(summaries)},
            {"visible_count", info.visible_count},
            {"total_vertex_count", info.total_vertex_count}};
}

json vec_document(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_document(const json& doc) {
    if (!doc.is_array() || doc.size() != 3) malformed("vector must be an array of 3 numbers");
    return {real_field(doc[0], "vector component"), real_field(doc[1], "vector component"),
            real_field(doc[2], "vector component")};
}

json primitive_document(const PrimitiveSpec& primitive) {
    json doc = {{"kind", std::string(kind_name(primitive.shape))}};
    for (const auto& p : shape_params(primitive.shape)) {
        if (p.is_integer) {
            doc[std::string(p.key)] = static_cast<int>(p.value);
        } else {
            doc[std::string(p.key)] = p.value;
        }
    }
    if (primitive.array) {
        doc["array"] = {{"count", primitive.array->count}, {"offset", vec_document(primitive.array->offset)}};
    }
    return doc;
}

PrimitiveSpec primitive_from_document(const json& doc) {
    const json& kind = field(doc, "kind");
    if (!kind.is_string()) malformed("primitive kind must be a string");
    auto shape = shape_for_kind(kind.get<std::string>());
    if (!shape) malformed("unknown primitive kind '" + kind.get<std::string>() + "'");

    PrimitiveSpec spec;
    spec.shape = *shape;
    for (const auto& p : shape_params(spec.shape)) {
        const json& v = field(doc, std::string(p.key).c_str());
        if (p.is_integer && !v.is_number_integer()) malformed(std::string(p.key) + " must be an integer");
        const double value = real_field(v, std::string(p.key).c_str());
        as_document_error([&] { set_param(spec.shape, p.key, value); });
    }
    for (const auto& [key, _] : doc.items()) {
        if (key != "kind" && key != "array" && !has_param(spec.shape, key)) malformed("unexpected key '" + key + "'");
    }
    if (auto it = doc.find("array"); it != doc.end()) {
        reject_unknown_keys(*it, {"count", "offset"});
        const json& count = field(*it, "count");
        if (!count.is_number_integer()) malformed("array count must be an integer");
        spec.array = ArrayModifier{count.get<int>(), vec_from_document(field(*it, "offset"))};
    }
    as_document_error([&] { validate(spec); });
    return spec;
}

json transform_document(const Transform& t) {
    return {{"translation", vec_document(t.translation)},
            {"rotation_euler", vec_document(t.rotation_euler)},
            {"scale", vec_document(t.scale)}};
}

Transform transform_from_document(const json& doc) {
    reject_unknown_keys(doc, {"translation", "rotation_euler", "scale"});
    Transform t;
    t.translation = vec_from_document(field(doc, "translation"));
    t.rotation_euler = vec_from_document(field(doc, "rotation_euler"));
    t.scale = vec_from_document(field(doc, "scale"));
    as_document_error([&] { validate(t); });
    return t;
}

json material_document(const MaterialSpec& m) {
    json doc = {{"base_color", vec_document(m.base_color)}};
    if (!m.name.empty()) doc["name"] = m.name;
    return doc;
}

MaterialSpec material_from_document(const json& doc) {
    reject_unknown_keys(doc, {"base_color", "name"});
    MaterialSpec m;
    m.base_color = vec_from_document(field(doc, "base_color"));
    if (auto it = doc.find("name"); it != doc.end()) {
        if (!it->is_string()) malformed("material name must be a string");
        m.name = it->get<std::string>();
    }
    as_document_error([&] { validate(m); });
    return m;
}

json object_document(const SceneObject& obj) {
    return {{"name", obj.name},
            {"primitive", primitive_document(obj.primitive)},
            {"transform", transform_document(obj.transform)},
            {"material", material_document(obj.material)},
            {"hidden", obj.hidden}};
}

SceneObject object_from_document(const json& doc) {
    reject_unknown_keys(doc, {"name", "primitive", "transform", "material", "hidden"});
    SceneObject obj;
    const json& name = field(doc, "name");
    if (!name.is_string() || !is_valid_name(name.get<std::string>())) malformed("invalid object name");
    obj.name = name.get<std::string>();
    obj.primitive = primitive_from_document(field(doc, "primitive"));
    obj.transform = transform_from_document(field(doc, "transform"));
    obj.material = material_from_document(field(doc, "material"));
    const json& hidden = field(doc, "hidden");
    if (!hidden.is_boolean()) malformed("hidden must be a boolean");
    obj.hidden = hidden.get<bool>();
    if (visible_transform(obj).translation.x() >= kHideShift) {
        malformed("object '" + obj.name + "': translation x is outside the range for its hidden flag");
    }
    return obj;
}

json snapshot(const Scene& scene) {
    json objects = json::array();
    for (const auto& [_, obj] : scene.objects) objects.push_back(object_document(obj));
    return {{"revision", scene.revision}, {"objects", std::move(objects)}};
}

std::string snapshot_text(const Scene& scene) { return snapshot(scene).dump(); }

Scene restore(const json& doc) {
    if (!doc.is_object()) malformed("snapshot must be an object");
    reject_unknown_keys(doc, {"revision", "objects"});
    const json& revision = field(doc, "revision");
    if (!revision.is_number_unsigned()) malformed("revision must be a non-negative integer");
    const json& objects = field(doc, "objects");
    if (!objects.is_array()) malformed("objects must be an array");

    Scene scene;
    scene.revision = revision.get<std::uint64_t>();
    for (const json& o : objects) {
        SceneObject obj = object_from_document(o);
        const std::string key = obj.name;
        if (!scene.objects.emplace(key, std::move(obj)).second) malformed("duplicate object '" + key + "'");
    }
    return scene;
}

Scene restore(std::string_view text) {
    json doc = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) malformed("not valid JSON");
    return restore(doc);
}

std::string to_obj(const Scene& scene) {
    std::string out;
    std::size_t base = 1;
    for (const auto& [name, obj] : scene.objects) {
        if (obj.hidden) continue;
        const Mesh mesh = generate_mesh(obj.primitive);
        const Points3 world = world_vertices(obj, mesh);
        out += "o " + name + "\n";
        for (Eigen::Index i = 0; i < world.cols(); ++i) {
            out += "v " + format_real(world(0, i)) + " " + format_real(world(1, i)) + " " + format_real(world(2, i)) + "\n";
        }
        for (const auto& face : mesh.faces) {
            out += "f";
            for (int v : face) out += " " + std::to_string(base + v);
            out += "\n";
        }
        base += static_cast<std::size_t>(world.cols());
    }
    return out;
}

}  // namespace comodel
