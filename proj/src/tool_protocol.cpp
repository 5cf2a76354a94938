#include "comodel/tool_protocol.hpp"

#include "comodel/digest.hpp"
#include "comodel/dsl.hpp"
#include "comodel/render.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace comodel::tools {
namespace {

using json = nlohmann::json;

std::vector<ParamSpec> primitive_params() {
    std::vector<ParamSpec> p = {{"name", ParamType::string, true}, {"kind", ParamType::string, true}};
    for (const char* key : {"size", "segments", "rings", "subdivisions", "radius", "depth", "major_segments",
                            "minor_segments", "major_radius", "minor_radius"}) {
        p.push_back({key, ParamType::number, false});
    }
    p.push_back({"location", ParamType::vec3, false});
    p.push_back({"rotation", ParamType::vec3, false});
    p.push_back({"scale", ParamType::vec3, false});
    p.push_back({"color", ParamType::vec3, false});
    p.push_back({"label", ParamType::string, false});
    p.push_back({"array_count", ParamType::number, false});
    p.push_back({"array_offset", ParamType::vec3, false});
    return p;
}

std::vector<ToolDescriptor> build_registry() {
    std::vector<ToolDescriptor> r = {
        {"create_primitive",
         "Create a primitive object, or replace the one with the same name. kind: cube, plane, uv_sphere, "
         "ico_sphere, cylinder, cone, torus. rotation is in degrees.",
         primitive_params(), Toolset::modeling},
        {"duplicate_object", "Copy an object under a new name, shifted by offset.",
         {{"name", ParamType::string, true}, {"new_name", ParamType::string, true}, {"offset", ParamType::vec3, true}},
         Toolset::modeling},
        {"execute_command", "Run a modeling command script (one statement per line).",
         {{"code", ParamType::code, true}}, Toolset::modeling},
        {"hide_object", "Hide an object by moving it out of view (objects are never deleted).",
         {{"name", ParamType::string, true}}, Toolset::refinement},
        {"set_material", "Set an object's flat base color (RGB in [0,1]).",
         {{"name", ParamType::string, true}, {"color", ParamType::vec3, true}, {"label", ParamType::string, false}},
         Toolset::refinement},
        {"transform_object", "Set an object's location, rotation (degrees) and/or scale.",
         {{"name", ParamType::string, true},
          {"location", ParamType::vec3, false},
          {"rotation", ParamType::vec3, false},
          {"scale", ParamType::vec3, false}},
         Toolset::refinement},
        {"get_object_info", "Describe one object: primitive, transform, material, vertex count, world bounds.",
         {{"name", ParamType::string, true}}, Toolset::inspection},
        {"get_scene_info", "Summarize the scene: revision, objects, visible count, vertex count.", {},
         Toolset::inspection},
        {"get_viewport_screenshot", "Render the scene from the default three-quarter view.",
         {{"width", ParamType::number, false}, {"height", ParamType::number, false}}, Toolset::inspection},
    };
    std::sort(r.begin(), r.end(), [](const ToolDescriptor& a, const ToolDescriptor& b) {
        return std::tie(a.toolset, a.name) < std::tie(b.toolset, b.name);
    });
    return r;
}

struct CallFailure {
    std::string code;
    std::string message;
    json payload;
};

[[noreturn]] void reject(std::string code, std::string message) {
    throw CallFailure{std::move(code), std::move(message), json()};
}

bool type_matches(const json& v, ParamType type) {
    switch (type) {
        case ParamType::number: return v.is_number() && std::isfinite(v.get<double>());
        case ParamType::string:
        case ParamType::code: return v.is_string();
        case ParamType::boolean: return v.is_boolean();
        case ParamType::vec3:
            return v.is_array() && v.size() == 3 &&
                   std::all_of(v.begin(), v.end(), [](const json& c) { return c.is_number() && std::isfinite(c.get<double>()); });
    }
    return false;
}

void check_schema(const ToolDescriptor& tool, const json& params) {
    if (!params.is_object()) reject("invalid_params", "arguments must be an object");
    for (const auto& [key, value] : params.items()) {
        auto it = std::find_if(tool.params_schema.begin(), tool.params_schema.end(),
                               [&](const ParamSpec& p) { return p.key == key; });
        if (it == tool.params_schema.end()) reject("invalid_params", "unknown parameter '" + key + "'");
        if (!type_matches(value, it->type)) {
            reject("invalid_params", "parameter '" + key + "' must be of type " + std::string(to_string(it->type)));
        }
    }
    for (const auto& p : tool.params_schema) {
        if (p.required && !params.contains(p.key)) reject("invalid_params", "missing required parameter '" + p.key + "'");
    }
}

dsl::ArgValue arg_value(const json& v) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return v.get<std::string>();
    return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

// Maps a mutating tool call onto one command statement.
dsl::Statement to_statement(const std::string& tool, const json& params) {
    static const std::map<std::string, std::string, std::less<>> verb = {
        {"create_primitive", "create"}, {"transform_object", "modify"}, {"set_material", "material"},
        {"hide_object", "hide"},        {"duplicate_object", "duplicate"}};
    static const std::map<std::string, std::string, std::less<>> rename = {{"location", "at"}, {"rotation", "rotate"}};

    dsl::Statement st;
    st.verb = verb.at(tool);
    if (params.contains("name")) st.args.push_back({"name", arg_value(params["name"])});
    for (const auto& [key, value] : params.items()) {
        if (key == "name") continue;
        auto r = rename.find(key);
        st.args.push_back({r == rename.end() ? key : r->second, arg_value(value)});
    }
    return st;
}

json mutation(SceneHost& host, const dsl::Statement& st, const std::string& name_key) {
    const dsl::Script script{{st}, {{}}};
    const dsl::ExecReport report = dsl::execute(host, script);
    if (report.failed_at) reject(report.failed_at->second.code, report.failed_at->second.message);
    std::string name;
    if (const auto* v = st.find(name_key)) {
        if (const auto* s = std::get_if<std::string>(v)) name = *s;
    }
    return {{"name", name}, {"revision", report.revision_after}};
}

int dimension(const json& params, const char* key) {
    if (!params.contains(key)) return kDefaultScreenshotSize;
    const double d = params[key].get<double>();
    if (std::trunc(d) != d || d < kMinImageSize || d > kMaxImageSize) {
        reject("invalid_params", std::string("parameter '") + key + "' must be an integer in [16, 4096]");
    }
    return static_cast<int>(d);
}

json dispatch(SceneHost& host, const std::string& tool, const json& params) {
    if (tool == "get_scene_info") return host.read([](const Scene& s) { return to_json(get_scene_info(s)); });
    if (tool == "get_object_info") {
        const std::string name = params["name"].get<std::string>();
        return host.read([&](const Scene& s) { return to_json(get_object_info(s, name)); });
    }
    if (tool == "get_viewport_screenshot") {
        const int w = dimension(params, "width");
        const int h = dimension(params, "height");
        const Scene copy = host.snapshot();
        const std::string ppm = encode_ppm(render(copy, default_camera(copy), w, h));
        return {{"width", w},
                {"height", h},
                {"format", "ppm"},
                {"data_base64", base64_encode(ppm)},
                {"content_hash", sha256_hex(ppm)},
                {"revision", copy.revision}};
    }
    if (tool == "execute_command") {
        dsl::Script script;
        try {
            script = dsl::parse(params["code"].get<std::string>());
        } catch (const dsl::ParseError& e) {
            reject("parse_error", e.what());
        }
        const dsl::ExecReport report = dsl::execute(host, script);
        json payload = to_json(report);
        if (report.failed_at) {
            throw CallFailure{report.failed_at->second.code, report.failed_at->second.message, std::move(payload)};
        }
        return payload;
    }
    const std::string name_key = tool == "duplicate_object" ? "new_name" : "name";
    return mutation(host, to_statement(tool, params), name_key);
}

}  // namespace

std::string_view to_string(Toolset t) {
    switch (t) {
        case Toolset::modeling: return "modeling";
        case Toolset::refinement: return "refinement";
        case Toolset::inspection: return "inspection";
    }
    return "";
}

std::optional<Toolset> toolset_from_string(std::string_view name) {
    if (name == "modeling") return Toolset::modeling;
    if (name == "refinement") return Toolset::refinement;
    if (name == "inspection") return Toolset::inspection;
    return std::nullopt;
}

std::string_view to_string(ParamType t) {
    switch (t) {
        case ParamType::number: return "number";
        case ParamType::string: return "string";
        case ParamType::vec3: return "vec3";
        case ParamType::boolean: return "bool";
        case ParamType::code: return "code";
    }
    return "";
}

ToolsetConfig ToolsetConfig::with(std::set<Toolset> enabled) {
    if (!enabled.count(Toolset::inspection)) throw ConfigError("the inspection toolset cannot be disabled");
    ToolsetConfig c;
    c.enabled = std::move(enabled);
    return c;
}

json to_json(const ToolsetConfig& config) {
    json out = json::array();
    for (Toolset t : config.enabled) out.push_back(std::string(to_string(t)));
    return out;
}

ToolsetConfig toolset_config_from_json(const json& doc) {
    if (!doc.is_array()) throw ConfigError("toolsets must be an array of names");
    std::set<Toolset> enabled;
    for (const auto& v : doc) {
        if (!v.is_string()) throw ConfigError("toolset names must be strings");
        auto t = toolset_from_string(v.get<std::string>());
        if (!t) throw ConfigError("unknown toolset '" + v.get<std::string>() + "'");
        enabled.insert(*t);
    }
    return ToolsetConfig::with(std::move(enabled));
}

const std::vector<ToolDescriptor>& registry() {
    static const std::vector<ToolDescriptor> r = build_registry();
    return r;
}

const ToolDescriptor* find_tool(std::string_view name) {
    for (const auto& t : registry()) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

std::vector<ToolDescriptor> list_tools(const ToolsetConfig& config) {
    std::vector<ToolDescriptor> out;
    for (const auto& t : registry()) {
        if (config.allows(t.toolset)) out.push_back(t);
    }
    return out;
}

json to_json(const ToolDescriptor& tool) {
    json params = json::array();
    for (const auto& p : tool.params_schema) {
        params.push_back({{"key", p.key}, {"type", std::string(to_string(p.type))}, {"required", p.required}});
    }
    return {{"name", tool.name},
            {"description", tool.description},
            {"params_schema", std::move(params)},
            {"toolset", std::string(to_string(tool.toolset))}};
}

json to_json(const ToolResult& r) {
    json doc = {{"id", r.id}, {"status", r.ok ? "ok" : "error"}, {"payload", r.payload}};
    if (r.error) doc["error"] = {{"code", r.error->code}, {"message", r.error->message}};
    return doc;
}

ToolResult tool_result_from_json(const json& doc) {
    ToolResult r;
    r.id = doc.at("id").get<std::string>();
    r.ok = doc.at("status").get<std::string>() == "ok";
    r.payload = doc.value("payload", json());
    if (auto it = doc.find("error"); it != doc.end()) {
        r.error = ToolError{it->at("code").get<std::string>(), it->at("message").get<std::string>()};
    }
    return r;
}

std::string describe_tools(const std::vector<ToolDescriptor>& tools) {
    std::string out;
    for (const auto& t : tools) {
        out += "- " + t.name + " [" + std::string(to_string(t.toolset)) + "]: " + t.description + "\n";
        if (t.params_schema.empty()) {
            out += "    params: none\n";
            continue;
        }
        out += "    params:";
        for (const auto& p : t.params_schema) {
            out += " " + p.key + ":" + std::string(to_string(p.type)) + (p.required ? "(required)" : "");
        }
        out += "\n";
    }
    return out;
}

ToolResult call_tool(SceneHost& host, const ToolCall& call, const ToolsetConfig& config) {
    ToolResult result;
    result.id = call.id;
    try {
        const ToolDescriptor* tool = find_tool(call.tool);
        if (!tool) reject("unknown_tool", "unknown tool '" + call.tool + "'");
        if (!config.allows(tool->toolset)) {
            reject("tool_disabled", "tool '" + call.tool + "' belongs to disabled toolset '" +
                                        std::string(to_string(tool->toolset)) + "'");
        }
        const json params = call.params.is_null() ? json::object() : call.params;
        check_schema(*tool, params);
        result.payload = dispatch(host, call.tool, params);
        result.ok = true;
    } catch (const CallFailure& f) {
        result.payload = f.payload;
        result.error = ToolError{f.code, f.message};
    } catch (const SceneError& e) {
        result.error = ToolError{std::string(to_string(e.code())), e.what()};
    } catch (const std::exception& e) {
        result.error = ToolError{"internal_error", e.what()};
    }
    return result;
}

ToolResult ToolServer::call(const ToolCall& c) const { return call_tool(host_, c, config()); }

std::vector<ToolDescriptor> ToolServer::list() const { return list_tools(config()); }

ToolsetConfig ToolServer::config() const {
    std::lock_guard lock(mutex_);
    return config_;
}

void ToolServer::set_config(ToolsetConfig config) {
    if (!config.allows(Toolset::inspection)) throw ConfigError("the inspection toolset cannot be disabled");
    std::lock_guard lock(mutex_);
    config_ = std::move(config);
}

}  // namespace comodel::tools
