#pragma once

#include "comodel/scene_host.hpp"

#include <json.hpp>

#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace comodel::tools {

enum class Toolset { modeling, refinement, inspection };
enum class ParamType { number, string, vec3, boolean, code };

std::string_view to_string(Toolset toolset);
std::optional<Toolset> toolset_from_string(std::string_view name);
std::string_view to_string(ParamType type);

struct ParamSpec {
    std::string key;
    ParamType type;
    bool required = false;
};

struct ToolDescriptor {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params_schema;
    Toolset toolset;
};

struct ToolCall {
    std::string id;
    std::string tool;
    nlohmann::json params = nlohmann::json::object();
};

struct ToolError {
    std::string code;
    std::string message;
};

struct ToolResult {
    std::string id;
    bool ok = false;
    nlohmann::json payload;
    std::optional<ToolError> error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Enabled toolsets. Inspection is always on; configs without it are rejected.
struct ToolsetConfig {
    std::set<Toolset> enabled = {Toolset::modeling, Toolset::refinement, Toolset::inspection};

    /// Throws ConfigError if inspection is missing.
    static ToolsetConfig with(std::set<Toolset> enabled);
    bool allows(Toolset t) const { return enabled.count(t) != 0; }
    bool operator==(const ToolsetConfig&) const = default;
};

nlohmann::json to_json(const ToolsetConfig& config);
/// Accepts an array of toolset names. Throws ConfigError.
ToolsetConfig toolset_config_from_json(const nlohmann::json& doc);

/// Every tool, ordered by toolset and then name.
const std::vector<ToolDescriptor>& registry();
const ToolDescriptor* find_tool(std::string_view name);
std::vector<ToolDescriptor> list_tools(const ToolsetConfig& config);

nlohmann::json to_json(const ToolDescriptor& tool);
nlohmann::json to_json(const ToolResult& result);
ToolResult tool_result_from_json(const nlohmann::json& doc);

/// Multi-line listing used to tell agents which tools exist and what they take.
std::string describe_tools(const std::vector<ToolDescriptor>& tools);

inline constexpr int kDefaultScreenshotSize = 256;

/// Total: every failure comes back as a structured error result.
ToolResult call_tool(SceneHost& host, const ToolCall& call, const ToolsetConfig& config);

/// A scene host plus its live toolset configuration.
class ToolServer {
public:
    explicit ToolServer(SceneHost& host, ToolsetConfig config = {}) : host_(host), config_(std::move(config)) {}

    ToolResult call(const ToolCall& call) const;
    std::vector<ToolDescriptor> list() const;

    ToolsetConfig config() const;
    void set_config(ToolsetConfig config);

    SceneHost& host() const { return host_; }

private:
    SceneHost& host_;
    mutable std::mutex mutex_;
    ToolsetConfig config_;
};

}  // namespace comodel::tools
