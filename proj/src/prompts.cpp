#include "comodel/llm.hpp"

namespace comodel::llm {
namespace {

using json = nlohmann::json;

const json& require(const json& ctx, const std::string& key) {
    if (!ctx.is_object() || !ctx.contains(key)) throw MissingContextKey(key);
    return ctx[key];
}

std::string text_of(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    return v.dump(2);
}

std::vector<std::string> lines_of(const json& v) {
    std::vector<std::string> out;
    if (v.is_array()) {
        for (const auto& item : v) out.push_back(text_of(item));
    } else if (v.is_string() && !v.get<std::string>().empty()) {
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::vector<ChatMessage> planner(const json& ctx) {
    const std::string tools = text_of(require(ctx, "tools_description"));
    const std::string revision = text_of(require(ctx, "revision_context"));
    const std::string scene = text_of(require(ctx, "scene_summary"));
    const json& iteration_value = require(ctx, "iteration_count");
    const std::string request = text_of(require(ctx, "user_request"));
    const auto feedback = lines_of(require(ctx, "human_feedback"));
    const long iteration = iteration_value.is_number() ? iteration_value.get<long>() : 0;

    // Critique first, labeled human block last so it has the final word.
    std::string revision_context;
    if (!revision.empty()) revision_context += "REVISION CONTEXT (critique of the previous attempt):\n" + revision + "\n";
    if (!feedback.empty()) {
        if (!revision_context.empty()) revision_context += '\n';
        revision_context += "HUMAN FEEDBACK (takes priority over the critique):\n";
        for (const auto& f : feedback) revision_context += "- " + f + "\n";
    }

    std::string sys =
        "You are a 3D modeling planning agent. Create step-by-step plans for low-poly 3D modeling.\n"
        "\n"
        "AVAILABLE MODELING TOOLS (USE ONLY THESE):\n" +
        tools +
        "\n"
        "\n" +
        revision_context +
        "\n"
        "IMPORTANT RULES:\n"
        "1) Use ONLY the tools listed above. Do NOT invent tool names.\n"
        "2) Respect required parameters shown for each tool.\n"
        "3) To run several modeling commands at once, use `execute_command` and put a COMPLETE command script "
        "in parameters.code (no prose, no markdown fences, no placeholders).\n"
        "- One statement per line: `verb key=value ...`; verbs are create, modify, material, transform, hide, "
        "show, duplicate.\n"
        "- Give created objects explicit names so later steps (e.g., get_object_info) can reference them.\n"
        "4) Always end with a `get_viewport_screenshot` step to verify results.\n"
        "\n"
        "You MUST call the create_plan function with a detailed plan.\n";

    if (iteration > 0) {
        sys +=
            "\n"
            "WHEN ITERATING:\n"
            "- Assume the scene already contains the previous attempt.\n"
            "- Do NOT recreate objects that already exist; modify them instead.\n"
            "- First call get_scene_info / get_object_info to discover existing objects.\n"
            "- Use deterministic names and reuse them across iterations.\n"
            "- Only create missing parts that the critique called out.\n"
            "- End with get_viewport_screenshot.\n";
    }
    sys +=
        "\n"
        "NAMING:\n"
        "- Derive object names from semantic roles (e.g., 'Main_Body', 'Left_Wheel', 'Window_Panel').\n"
        "- Reuse these names across iterations; only create missing parts.\n"
        "- Never clear or reset the scene.\n";

    std::string user = "Request: " + request + "\n\nIteration: " + std::to_string(iteration) +
                       "\n\nCurrent scene:\n" + scene + "\n";
    return {{Role::system, sys}, {Role::user, user}};
}

std::vector<ChatMessage> actor(const json& ctx) {
    const std::string tools = text_of(require(ctx, "tools"));
    const std::string step = text_of(require(ctx, "current_step"));
    std::string sys =
        "You are a 3D modeling automation agent executing a specific plan.\n"
        "You have access to modeling tools. Follow the plan exactly.\n"
        "\n"
        "For each step:\n"
        "1. Use the specified tool with the given parameters\n"
        "2. Verify the action completed successfully\n"
        "3. Report the result\n"
        "\n"
        "Available tools: " +
        tools +
        "\n"
        "\n"
        "Current plan step: " +
        step + "\n";
    return {{Role::system, sys}, {Role::user, "Execute the current plan step."}};
}

std::vector<ChatMessage> critic(const json& ctx) {
    const std::string request = text_of(require(ctx, "user_request"));
    const auto criteria = lines_of(require(ctx, "success_criteria"));
    const std::string summary = text_of(require(ctx, "execution_summary"));
    const std::string shot = text_of(require(ctx, "screenshot_hash"));

    const std::string sys =
        "You are a 3D modeling critique expert. Analyze the viewport screenshot and execution results.\n"
        "Consider the original plan's success criteria and provide constructive feedback.\n"
        "\n"
        "You MUST call the analyze_result function with your analysis.";

    std::string user = "Original Request: " + request + "\n\nSuccess Criteria:\n";
    for (const auto& c : criteria) user += "- " + c + "\n";
    user += "\nExecution Summary:\n" + summary + "\n\nScreenshot (sha256): " + shot +
            "\n"
            "\n"
            "Please analyze the screenshot and provide feedback on:\n"
            "1. Whether the success criteria were met\n"
            "2. Quality of the 3D model/scene\n"
            "3. Any issues or improvements needed\n"
            "4. Whether another iteration is needed\n";
    return {{Role::system, sys}, {Role::user, user}};
}

}  // namespace

std::vector<ChatMessage> render_prompt(AgentRole role, const json& context) {
    switch (role) {
        case AgentRole::planner: return planner(context);
        case AgentRole::actor: return actor(context);
        case AgentRole::critic: return critic(context);
    }
    throw std::invalid_argument("unknown agent role");
}

std::vector<ChatMessage> synthesis_prompt(const std::vector<ChatMessage>& actor_prompt, const std::string& action) {
    std::vector<ChatMessage> out;
    if (!actor_prompt.empty()) out.push_back(actor_prompt.front());
    out.push_back(
        {Role::system,
         "Return ONLY an executable command script (no markdown fences, no comments, no prose). "
         "One statement per line: `verb key=value ...` using create, modify, material, transform, hide, show, "
         "duplicate. "
         "NEVER clear or reset the scene. "
         "NEVER delete objects; to take something out of view, use hide. "
         "Be IDEMPOTENT: create on an existing name updates that object. "
         "Use explicit names; reuse them. "
         "When adjusting size, use scale consistently and keep transforms sane. "
         "If the action modifies an object that does not exist, emit modify anyway so the failure is reported."});
    out.push_back({Role::user, std::string(kSynthesisAsk) + action});
    return out;
}

std::string clean_generated_code(std::string_view text) {
    std::string out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto first = line.find_first_not_of(" \t");
        const bool fence = first != std::string_view::npos && line.substr(first, 3) == "```";
        if (!fence) {
            out += line;
            out += '\n';
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    const auto begin = out.find_first_not_of(" \t\n");
    if (begin == std::string::npos) return "";
    const auto end = out.find_last_not_of(" \t\n");
    return out.substr(begin, end - begin + 1) + "\n";
}

}  // namespace comodel::llm
