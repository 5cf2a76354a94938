#include "comodel/llm.hpp"

#include "comodel/digest.hpp"
#include "comodel/geometry.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace comodel::llm {
namespace {

using json = nlohmann::json;

std::string lf_only(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            out += '\n';
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        } else {
            out += text[i];
        }
    }
    return out;
}

std::string_view type_name(FieldType t) {
    switch (t) {
        case FieldType::string: return "string";
        case FieldType::number: return "number";
        case FieldType::boolean: return "boolean";
        case FieldType::object: return "object";
        case FieldType::string_list: return "string_list";
        case FieldType::object_list: return "object_list";
    }
    return "?";
}

json field_schema(const SchemaField& f) {
    switch (f.type) {
        case FieldType::string: return {{"type", "string"}};
        case FieldType::number: {
            json s = {{"type", "number"}};
            if (f.range) {
                s["minimum"] = f.range->first;
                s["maximum"] = f.range->second;
            }
            return s;
        }
        case FieldType::boolean: return {{"type", "boolean"}};
        case FieldType::object: return {{"type", "object"}};
        case FieldType::string_list: return {{"type", "array"}, {"items", {{"type", "string"}}}};
        case FieldType::object_list: {
            json props = json::object();
            json required = json::array();
            for (const auto& sub : f.item_fields) {
                props[sub.key] = field_schema(sub);
                if (sub.required) required.push_back(sub.key);
            }
            return {{"type", "array"},
                    {"items", {{"type", "object"}, {"properties", props}, {"required", required}}}};
        }
    }
    return json::object();
}

[[noreturn]] void violation(const std::string& key, const std::string& what) {
    throw ProviderError(ProviderError::Kind::schema_violation, key, "schema violation at '" + key + "': " + what);
}

void validate_field(const json& value, const SchemaField& f, const std::string& path) {
    auto expect = [&](bool ok) {
        if (!ok) violation(path, "expected " + std::string(type_name(f.type)));
    };
    switch (f.type) {
        case FieldType::string: expect(value.is_string()); break;
        case FieldType::number:
            expect(value.is_number());
            if (f.range) {
                const double v = value.get<double>();
                if (v < f.range->first || v > f.range->second) violation(path, "out of range");
            }
            break;
        case FieldType::boolean: expect(value.is_boolean()); break;
        case FieldType::object: expect(value.is_object()); break;
        case FieldType::string_list:
            expect(value.is_array());
            for (std::size_t i = 0; i < value.size(); ++i) {
                if (!value[i].is_string()) violation(path + "[" + std::to_string(i) + "]", "expected string");
            }
            break;
        case FieldType::object_list:
            expect(value.is_array());
            for (std::size_t i = 0; i < value.size(); ++i) {
                const std::string item_path = path + "[" + std::to_string(i) + "]";
                if (!value[i].is_object()) violation(item_path, "expected object");
                for (const auto& sub : f.item_fields) {
                    const std::string sub_path = item_path + "." + sub.key;
                    if (!value[i].contains(sub.key)) {
                        if (sub.required) violation(sub_path, "missing");
                        continue;
                    }
                    validate_field(value[i][sub.key], sub, sub_path);
                }
            }
            break;
    }
}

// First balanced {...} block, skipping braces inside string literals.
std::optional<std::string_view> first_object(std::string_view text) {
    for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) return text.substr(start, i - start + 1);
        }
        return std::nullopt;  // unbalanced from here on
    }
    return std::nullopt;
}

std::filesystem::path fixture_path(const std::filesystem::path& dir, const std::string& hash) {
    return dir / (hash + ".json");
}

}  // namespace

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "?";
}

std::string_view to_string(ProviderError::Kind kind) {
    switch (kind) {
        case ProviderError::Kind::unreachable: return "provider_unreachable";
        case ProviderError::Kind::fixture_miss: return "fixture_miss";
        case ProviderError::Kind::schema_violation: return "schema_violation";
    }
    return "?";
}

const FunctionSchema& create_plan_schema() {
    static const FunctionSchema schema{
        "create_plan",
        {
            {"steps",
             FieldType::object_list,
             true,
             {{"tool", FieldType::string, true, {}, {}},
              {"parameters", FieldType::object, true, {}, {}},
              {"description", FieldType::string, true, {}, {}}},
             {}},
            {"success_criteria", FieldType::string_list, true, {}, {}},
        },
        "Create a step-by-step modeling plan with success criteria",
    };
    return schema;
}

const FunctionSchema& analyze_result_schema() {
    static const FunctionSchema schema{
        "analyze_result",
        {
            {"criteria",
             FieldType::object_list,
             true,
             {{"text", FieldType::string, true, {}, {}}, {"met", FieldType::boolean, true, {}, {}}},
             {}},
            {"score", FieldType::number, true, {}, std::pair{0.0, 1.0}},
            {"issues", FieldType::string_list, true, {}, {}},
            {"needs_iteration", FieldType::boolean, true, {}, {}},
        },
        "Analyze the modeling result against the success criteria",
    };
    return schema;
}

json json_schema(const FunctionSchema& schema) {
    json props = json::object();
    json required = json::array();
    for (const auto& f : schema.fields) {
        props[f.key] = field_schema(f);
        if (f.required) required.push_back(f.key);
    }
    return {{"name", schema.name},
            {"description", schema.description},
            {"parameters", {{"type", "object"}, {"properties", props}, {"required", required}}}};
}

json to_json(const Completion& c) {
    json doc = {{"content", c.message.content}, {"function_call", nullptr}};
    if (c.call) doc["function_call"] = {{"name", c.call->function}, {"arguments", c.call->arguments}};
    return doc;
}

Completion completion_from_json(const json& doc) {
    Completion c;
    c.message.content = doc.value("content", "");
    if (doc.contains("function_call") && doc["function_call"].is_object()) {
        const auto& fc = doc["function_call"];
        c.call = StructuredCall{fc.at("name").get<std::string>(), fc.value("arguments", json::object())};
    }
    return c;
}

std::string canonical_request(const CompletionRequest& request) {
    std::string out;
    for (const auto& m : request.messages) {
        out += "<|";
        out += to_string(m.role);
        out += "|>\n";
        out += lf_only(m.content);
        out += '\n';
    }
    out += "<|function|>\n";
    out += request.required_function ? json_schema(*request.required_function).dump() : "none";
    out += "\n<|temperature|>\n" + format_real(request.temperature) + "\n";
    return out;
}

std::string request_hash(const CompletionRequest& request) { return sha256_hex(canonical_request(request)); }

void validate_arguments(const json& arguments, const FunctionSchema& schema) {
    if (!arguments.is_object()) violation("$", "arguments must be an object");
    for (const auto& f : schema.fields) {
        if (!arguments.contains(f.key)) {
            if (f.required) violation(f.key, "missing");
            continue;
        }
        validate_field(arguments[f.key], f, f.key);
    }
}

StructuredCall extract_structured(const Completion& response, const FunctionSchema& schema) {
    if (response.call && response.call->function == schema.name) {
        validate_arguments(response.call->arguments, schema);
        return *response.call;
    }
    const auto block = first_object(response.message.content);
    if (!block) violation("$", "no JSON object in response");
    json doc = json::parse(block->begin(), block->end(), nullptr, false);
    if (doc.is_discarded()) violation("$", "embedded JSON object does not parse");
    validate_arguments(doc, schema);
    return StructuredCall{schema.name, std::move(doc)};
}

// ---------------------------------------------------------------------------------------------

HttpSettings HttpSettings::from_env() {
    HttpSettings s;
    if (const char* v = std::getenv("LLM_BASE_URL"); v && *v) s.base_url = v;
    if (const char* v = std::getenv("LLM_MODEL"); v && *v) s.model = v;
    if (const char* v = std::getenv("LLM_API_KEY"); v && *v) s.api_key = v;
    return s;
}

json HttpProvider::request_body(const CompletionRequest& request) const {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    json body = {{"model", settings_.model}, {"messages", messages}, {"temperature", request.temperature}};
    if (request.required_function) {
        body["tools"] = json::array({{{"type", "function"}, {"function", json_schema(*request.required_function)}}});
        body["tool_choice"] = {{"type", "function"}, {"function", {{"name", request.required_function->name}}}};
    }
    return body;
}

Completion HttpProvider::complete(const CompletionRequest& request) {
    const auto scheme_end = settings_.base_url.find("://");
    const auto path_start =
        settings_.base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string origin = settings_.base_url.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? "" : settings_.base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(origin);
    client.set_connection_timeout(settings_.timeout_seconds);
    client.set_read_timeout(settings_.timeout_seconds);
    httplib::Headers headers;
    if (!settings_.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings_.api_key);

    const auto res = client.Post(prefix + "/chat/completions", headers, request_body(request).dump(), "application/json");
    if (!res) {
        throw ProviderError(ProviderError::Kind::unreachable, origin,
                            "provider unreachable at " + origin + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw ProviderError(ProviderError::Kind::unreachable, origin,
                            "provider returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
    }
    const json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()) {
        throw ProviderError(ProviderError::Kind::unreachable, origin, "provider returned a malformed body");
    }
    const json& msg = doc["choices"][0].value("message", json::object());
    Completion c;
    if (msg.contains("content") && msg["content"].is_string()) c.message.content = msg["content"].get<std::string>();
    if (msg.contains("tool_calls") && msg["tool_calls"].is_array() && !msg["tool_calls"].empty()) {
        const json& fn = msg["tool_calls"][0].value("function", json::object());
        const std::string raw = fn.value("arguments", "{}");
        json args = json::parse(raw, nullptr, false);
        if (args.is_discarded()) {
            // Leave it to extract_structured to report; keep the raw text visible.
            c.message.content += raw;
        } else {
            c.call = StructuredCall{fn.value("name", ""), std::move(args)};
        }
    }
    return c;
}

Completion ReplayProvider::complete(const CompletionRequest& request) {
    const std::string hash = request_hash(request);
    std::ifstream in(fixture_path(dir_, hash));
    if (!in) throw ProviderError(ProviderError::Kind::fixture_miss, hash, "no replay fixture for request " + hash);
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("completion")) {
        throw ProviderError(ProviderError::Kind::fixture_miss, hash, "replay fixture " + hash + " is unreadable");
    }
    return completion_from_json(doc["completion"]);
}

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner, std::filesystem::path fixtures)
    : inner_(std::move(inner)), dir_(std::move(fixtures)) {
    std::filesystem::create_directories(dir_);
}

Completion RecordingProvider::complete(const CompletionRequest& request) {
    Completion c = inner_->complete(request);
    const std::string hash = request_hash(request);
    const json doc = {{"request_hash", hash}, {"request", canonical_request(request)}, {"completion", to_json(c)}};
    std::ofstream out(fixture_path(dir_, hash), std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
    return c;
}

std::shared_ptr<Provider> make_provider(const ProviderConfig& config) {
    std::shared_ptr<Provider> p;
    if (config.kind == "scripted") {
        p = std::make_shared<ScriptedProvider>(config.scripted);
    } else if (config.kind == "replay") {
        p = std::make_shared<ReplayProvider>(config.fixtures_dir);
    } else if (config.kind == "http") {
        HttpSettings s = HttpSettings::from_env();
        if (!config.model.empty()) s.model = config.model;
        if (!config.base_url.empty()) s.base_url = config.base_url;
        p = std::make_shared<HttpProvider>(s);
    } else {
        throw std::invalid_argument("unknown provider kind '" + config.kind + "'");
    }
    if (!config.record_dir.empty()) p = std::make_shared<RecordingProvider>(p, config.record_dir);
    return p;
}

}  // namespace comodel::llm
