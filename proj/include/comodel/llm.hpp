#pragma once

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace comodel::llm {

enum class Role { system, user, assistant };
std::string_view to_string(Role role);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

enum class FieldType { string, number, boolean, object, string_list, object_list };

struct SchemaField {
    std::string key;
    FieldType type = FieldType::string;
    bool required = true;
    std::vector<SchemaField> item_fields;          // for object_list
    std::optional<std::pair<double, double>> range;  // for number
};

/// Structured output the agents must produce ("function call").
struct FunctionSchema {
    std::string name;
    std::vector<SchemaField> fields;
    std::string description;
};

/// {steps: [{tool, parameters, description}], success_criteria: [string]}
const FunctionSchema& create_plan_schema();
/// {criteria: [{text, met}], score: [0,1], issues: [string], needs_iteration: bool}
const FunctionSchema& analyze_result_schema();

/// JSON-Schema rendering used for live function-calling APIs.
nlohmann::json json_schema(const FunctionSchema& schema);

struct CompletionRequest {
    std::vector<ChatMessage> messages;
    std::optional<FunctionSchema> required_function;
    double temperature = 0.0;
    std::string provider_hint;
};

struct StructuredCall {
    std::string function;
    nlohmann::json arguments;
};

/// Assistant reply, optionally with a native function call.
struct Completion {
    ChatMessage message{Role::assistant, ""};
    std::optional<StructuredCall> call;
};

nlohmann::json to_json(const Completion& completion);
Completion completion_from_json(const nlohmann::json& doc);

class ProviderError : public std::runtime_error {
public:
    enum class Kind { unreachable, fixture_miss, schema_violation };

    ProviderError(Kind kind, std::string detail, const std::string& message)
        : std::runtime_error(message), kind_(kind), detail_(std::move(detail)) {}

    Kind kind() const noexcept { return kind_; }
    /// Request hash for fixture misses, offending key for schema violations.
    const std::string& detail() const noexcept { return detail_; }

private:
    Kind kind_;
    std::string detail_;
};

std::string_view to_string(ProviderError::Kind kind);

/// Role-tagged messages, sorted-key schema JSON, LF newlines. The fixture key is its SHA-256.
std::string canonical_request(const CompletionRequest& request);
std::string request_hash(const CompletionRequest& request);

/// Throws ProviderError(schema_violation) naming the first missing or mistyped key.
void validate_arguments(const nlohmann::json& arguments, const FunctionSchema& schema);

/// Accepts a native call to `schema.name`, else the first balanced {...} block in the text.
StructuredCall extract_structured(const Completion& response, const FunctionSchema& schema);

class Provider {
public:
    virtual ~Provider() = default;
    virtual Completion complete(const CompletionRequest& request) = 0;
    virtual std::string name() const = 0;
};

struct HttpSettings {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4.1";
    std::string api_key;
    int timeout_seconds = 120;

    /// LLM_BASE_URL, LLM_MODEL, LLM_API_KEY override the defaults when set.
    static HttpSettings from_env();
};

/// Chat-completions over HTTP(S) with bearer auth.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpSettings settings) : settings_(std::move(settings)) {}

    Completion complete(const CompletionRequest& request) override;
    std::string name() const override { return "http"; }

    /// Body posted to {base_url}/chat/completions.
    nlohmann::json request_body(const CompletionRequest& request) const;

private:
    HttpSettings settings_;
};

/// Returns recorded completions keyed by request hash; a miss is an error, never a fallback.
class ReplayProvider : public Provider {
public:
    explicit ReplayProvider(std::filesystem::path fixtures) : dir_(std::move(fixtures)) {}

    Completion complete(const CompletionRequest& request) override;
    std::string name() const override { return "replay"; }

private:
    std::filesystem::path dir_;
};

/// Forwards to another provider and writes every exchange as a replay fixture.
class RecordingProvider : public Provider {
public:
    RecordingProvider(std::shared_ptr<Provider> inner, std::filesystem::path fixtures);

    Completion complete(const CompletionRequest& request) override;
    std::string name() const override { return inner_->name(); }

private:
    std::shared_ptr<Provider> inner_;
    std::filesystem::path dir_;
};

/// Knobs for the rule-based stand-in model.
struct ScriptedOptions {
    /// 1-based critic calls on which the first criterion is reported unmet with `forced_issue`.
    std::set<int> fail_critiques;
    std::string forced_issue = "The legs look too thin for the tabletop; make the legs thicker.";
    /// Adds a step that targets a misspelled object, to exercise the actor's retry path.
    bool faulty_step = false;
};

/// Deterministic rule engine that plans, critiques and writes command scripts for the fixture
/// tasks (cake, table, car) and a generic single-object fallback. Needs no recordings.
class ScriptedProvider : public Provider {
public:
    explicit ScriptedProvider(ScriptedOptions options = {}) : options_(std::move(options)) {}

    Completion complete(const CompletionRequest& request) override;
    std::string name() const override { return "scripted"; }

private:
    Completion plan(const CompletionRequest& request);
    Completion critique(const CompletionRequest& request);
    Completion synthesize(const CompletionRequest& request);

    ScriptedOptions options_;
    std::mutex mutex_;
    int critic_calls_ = 0;
};

struct ProviderConfig {
    std::string kind = "scripted";  // scripted | replay | http
    std::string model;
    std::string base_url;
    std::filesystem::path fixtures_dir;
    std::filesystem::path record_dir;  // when set, wraps the provider in a RecordingProvider
    ScriptedOptions scripted;
};

std::shared_ptr<Provider> make_provider(const ProviderConfig& config);

// ---------------------------------------------------------------------------------------------
// Prompt templates

enum class AgentRole { planner, actor, critic };

class MissingContextKey : public std::runtime_error {
public:
    explicit MissingContextKey(const std::string& key)
        : std::runtime_error("prompt context is missing key '" + key + "'"), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Expands the role's template. Required context keys:
///   planner: tools_description, revision_context, scene_summary, iteration_count, user_request, human_feedback
///   actor:   tools, current_step
///   critic:  user_request, success_criteria, execution_summary, screenshot_hash
/// `human_feedback` is an array of strings; `success_criteria` an array of strings.
std::vector<ChatMessage> render_prompt(AgentRole role, const nlohmann::json& context);

/// Messages asking for a command script that performs `action`, appended to the actor prompt.
std::vector<ChatMessage> synthesis_prompt(const std::vector<ChatMessage>& actor_prompt, const std::string& action);

/// Strips markdown fences and surrounding blank lines from generated command text; the result ends
/// with a single newline unless empty.
std::string clean_generated_code(std::string_view text);

inline constexpr std::string_view kSynthesisAsk = "Write a command script to accomplish this action: ";
inline constexpr std::string_view kSceneInfoMarker = "Scene info: ";

}  // namespace comodel::llm
