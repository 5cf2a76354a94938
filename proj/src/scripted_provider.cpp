#include "comodel/llm.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

namespace comodel::llm {
namespace {

using json = nlohmann::json;

enum class Task { cake, table, car, generic };

struct Part {
    std::string name;
    json shape;  // kind + params
    std::array<double, 3> location{0, 0, 0};
    std::array<double, 3> rotation{0, 0, 0};
    std::array<double, 3> scale{1, 1, 1};
    std::array<double, 3> color{0.8, 0.8, 0.8};
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

Task classify(std::string_view request) {
    const std::string r = lower(request);
    if (contains(r, "cake")) return Task::cake;
    if (contains(r, "table")) return Task::table;
    if (std::regex_search(r, std::regex(R"(\bcar\b)"))) return Task::car;
    return Task::generic;
}

json vec(const std::array<double, 3>& v) { return json::array({v[0], v[1], v[2]}); }

json create_step(const Part& p, const std::string& description) {
    json params = p.shape;
    params["name"] = p.name;
    params["location"] = vec(p.location);
    params["rotation"] = vec(p.rotation);
    params["scale"] = vec(p.scale);
    params["color"] = vec(p.color);
    return {{"tool", "create_primitive"}, {"parameters", params}, {"description", description}};
}

json step(const std::string& tool, json params, const std::string& description) {
    return {{"tool", tool}, {"parameters", std::move(params)}, {"description", description}};
}

json screenshot_step() { return step("get_viewport_screenshot", json::object(), "Capture the viewport to verify the result"); }

std::vector<Part> table_parts(bool round_top, bool thick_legs) {
    std::vector<Part> parts;
    Part top{"Table_Top", {{"kind", "cube"}, {"size", 2.0}}, {0, 0, 0.95}, {0, 0, 0}, {1, 1, 0.05}, {0.55, 0.38, 0.22}};
    if (round_top) {
        top.shape = {{"kind", "cylinder"}, {"segments", 32}, {"radius", 1.0}, {"depth", 0.1}};
        top.scale = {1, 1, 1};
    }
    parts.push_back(top);
    const double r = thick_legs ? 0.09 : 0.06;
    const double xy[4][2] = {{0.85, 0.85}, {-0.85, 0.85}, {-0.85, -0.85}, {0.85, -0.85}};
    for (int i = 0; i < 4; ++i) {
        parts.push_back({"Leg_" + std::to_string(i + 1),
                         {{"kind", "cylinder"}, {"segments", 32}, {"radius", r}, {"depth", 0.9}},
                         {xy[i][0], xy[i][1], 0.45},
                         {0, 0, 0},
                         {1, 1, 1},
                         {0.45, 0.3, 0.18}});
    }
    return parts;
}

std::vector<Part> cake_layers() {
    return {
        {"Cake_Base", {{"kind", "cylinder"}, {"segments", 16}, {"radius", 1.0}, {"depth", 0.5}}, {0, 0, 0.25}, {0, 0, 0}, {1, 1, 1}, {0.95, 0.85, 0.7}},
        {"Cake_Middle", {{"kind", "cylinder"}, {"segments", 16}, {"radius", 0.75}, {"depth", 0.4}}, {0, 0, 0.7}, {0, 0, 0}, {1, 1, 1}, {0.98, 0.7, 0.8}},
        {"Cake_Top", {{"kind", "cylinder"}, {"segments", 16}, {"radius", 0.5}, {"depth", 0.3}}, {0, 0, 1.05}, {0, 0, 0}, {1, 1, 1}, {0.95, 0.95, 0.95}},
    };
}

const char* kCandleScript =
    "create name=Candle_1 kind=cylinder segments=8 radius=0.04 depth=0.3 at=(0.25,0,1.35) color=(0.9,0.2,0.2)\n"
    "duplicate name=Candle_1 new_name=Candle_2 offset=(-0.5,0,0)\n"
    "duplicate name=Candle_1 new_name=Candle_3 offset=(-0.25,0.25,0)\n"
    "duplicate name=Candle_1 new_name=Candle_4 offset=(-0.25,-0.25,0)\n";

std::vector<Part> car_parts() {
    std::vector<Part> parts = {
        {"Car_Body", {{"kind", "cube"}, {"size", 2.0}}, {0, 0, 0.65}, {0, 0, 0}, {1.6, 0.8, 0.35}, {0.7, 0.1, 0.1}},
        {"Car_Cabin", {{"kind", "cube"}, {"size", 2.0}}, {-0.2, 0, 1.3}, {0, 0, 0}, {0.8, 0.7, 0.3}, {0.75, 0.8, 0.85}},
    };
    const std::pair<const char*, std::array<double, 2>> wheels[] = {
        {"Wheel_FL", {1.0, 0.85}}, {"Wheel_FR", {1.0, -0.85}}, {"Wheel_RL", {-1.0, 0.85}}, {"Wheel_RR", {-1.0, -0.85}}};
    for (const auto& [name, xy] : wheels) {
        parts.push_back({name,
                         {{"kind", "cylinder"}, {"segments", 16}, {"radius", 0.35}, {"depth", 0.25}},
                         {xy[0], xy[1], 0.35},
                         {90, 0, 0},
                         {1, 1, 1},
                         {0.1, 0.1, 0.1}});
    }
    return parts;
}

const char* kHeadlightScript =
    "create name=Headlight_L kind=uv_sphere segments=8 rings=6 radius=0.1 at=(1.6,0.5,0.7) color=(1,0.95,0.6)\n"
    "duplicate name=Headlight_L new_name=Headlight_R offset=(0,-1,0)\n";

Part generic_part() {
    return {"Main_Body", {{"kind", "cube"}, {"size", 2.0}}, {0, 0, 1}, {0, 0, 0}, {1, 1, 1}, {0.8, 0.8, 0.8}};
}

std::vector<std::string> criteria_for(Task task, bool round_top) {
    switch (task) {
        case Task::table:
            return {std::string("Object Table_Top is a visible ") + (round_top ? "cylinder" : "cube"),
                    "Objects Leg_1, Leg_2, Leg_3, Leg_4 are visible", "Scene has exactly 5 visible objects"};
        case Task::cake:
            return {"Objects Cake_Base, Cake_Middle, Cake_Top are visible",
                    "Objects Candle_1, Candle_2, Candle_3, Candle_4 are visible", "Scene has exactly 7 visible objects"};
        case Task::car:
            return {"Objects Car_Body, Car_Cabin are visible", "Objects Wheel_FL, Wheel_FR, Wheel_RL, Wheel_RR are visible",
                    "Objects Headlight_L, Headlight_R are visible", "Scene has exactly 8 visible objects"};
        case Task::generic: return {"Object Main_Body is a visible cube"};
    }
    return {};
}

std::vector<std::string> all_names(Task task) {
    switch (task) {
        case Task::table: return {"Table_Top", "Leg_1", "Leg_2", "Leg_3", "Leg_4"};
        case Task::cake: return {"Cake_Base", "Cake_Middle", "Cake_Top", "Candle_1", "Candle_2", "Candle_3", "Candle_4"};
        case Task::car:
            return {"Car_Body", "Car_Cabin", "Wheel_FL", "Wheel_FR", "Wheel_RL", "Wheel_RR", "Headlight_L", "Headlight_R"};
        case Task::generic: return {"Main_Body"};
    }
    return {};
}

// Steps that build the whole object from scratch, without the closing screenshot.
std::vector<json> build_steps(Task task, bool round_top, bool thick_legs) {
    std::vector<json> steps;
    switch (task) {
        case Task::table:
            for (const auto& p : table_parts(round_top, thick_legs)) {
                steps.push_back(create_step(p, p.name == "Table_Top" ? "Create the tabletop" : "Create table leg " + p.name));
            }
            break;
        case Task::cake:
            for (const auto& p : cake_layers()) steps.push_back(create_step(p, "Create cake layer " + p.name));
            steps.push_back(step("execute_command", {{"code", kCandleScript}}, "Place four candles on the top layer"));
            break;
        case Task::car:
            for (const auto& p : car_parts()) steps.push_back(create_step(p, "Create " + p.name));
            steps.push_back(step("execute_command", {{"code", kHeadlightScript}}, "Add both headlights"));
            break;
        case Task::generic: {
            const Part p = generic_part();
            steps.push_back(create_step(p, "Create the main body"));
            break;
        }
    }
    return steps;
}

std::string section(std::string_view text, std::string_view start, std::string_view end) {
    const auto a = text.find(start);
    if (a == std::string_view::npos) return "";
    const auto from = a + start.size();
    const auto b = end.empty() ? std::string_view::npos : text.find(end, from);
    return std::string(text.substr(from, b == std::string_view::npos ? std::string_view::npos : b - from));
}

std::string line_after(std::string_view text, std::string_view marker) {
    const auto a = text.find(marker);
    if (a == std::string_view::npos) return "";
    const auto from = a + marker.size();
    const auto nl = text.find('\n', from);
    return std::string(text.substr(from, nl == std::string_view::npos ? std::string_view::npos : nl - from));
}

struct SceneView {
    std::map<std::string, std::pair<std::string, bool>> objects;  // name -> (kind, hidden)
    int visible = 0;
};

SceneView parse_scene(const std::string& text) {
    SceneView v;
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return v;
    for (const auto& s : doc.value("object_summaries", json::array())) {
        v.objects[s.value("name", "")] = {s.value("primitive_kind", ""), s.value("hidden", false)};
    }
    v.visible = doc.value("visible_count", 0);
    return v;
}

Completion function_call(const std::string& name, json args) {
    Completion c;
    c.call = StructuredCall{name, std::move(args)};
    return c;
}

std::string system_text(const CompletionRequest& r) {
    std::string out;
    for (const auto& m : r.messages) {
        if (m.role == Role::system) out += m.content + "\n";
    }
    return out;
}

std::string last_user(const CompletionRequest& r) {
    for (auto it = r.messages.rbegin(); it != r.messages.rend(); ++it) {
        if (it->role == Role::user) return it->content;
    }
    return "";
}

}  // namespace

Completion ScriptedProvider::complete(const CompletionRequest& request) {
    const std::string sys = system_text(request);
    if (contains(sys, "planning agent")) return plan(request);
    if (contains(sys, "critique expert")) return critique(request);
    if (last_user(request).rfind(kSynthesisAsk, 0) == 0) return synthesize(request);
    Completion c;
    c.message.content = "Step acknowledged.";
    return c;
}

Completion ScriptedProvider::plan(const CompletionRequest& request) {
    const std::string sys = system_text(request);
    const std::string user = last_user(request);
    const Task task = classify(line_after(user, "Request: "));
    const SceneView scene = parse_scene(section(user, "Current scene:\n", ""));
    const bool iterating = contains(sys, "WHEN ITERATING");
    // Everything the critique and the human said for this round.
    const std::string feedback = lower(section(sys, "REVISION CONTEXT", "IMPORTANT RULES") +
                                       section(sys, "HUMAN FEEDBACK", "IMPORTANT RULES"));

    const auto top = scene.objects.find("Table_Top");
    const bool was_round = top != scene.objects.end() && top->second.first == "cylinder";
    const bool round_top = task == Task::table && (was_round || contains(feedback, "round"));
    const bool thick_legs = task == Task::table && contains(feedback, "thick");

    std::vector<json> steps;
    if (!iterating) {
        steps = build_steps(task, round_top, thick_legs);
    } else {
        steps.push_back(step("get_scene_info", json::object(), "Inspect the objects from the previous attempt"));
        bool changed = false;
        if (task == Task::table && (contains(feedback, "round") || thick_legs)) {
            for (const auto& p : table_parts(round_top, thick_legs)) {
                const bool is_top = p.name == "Table_Top";
                if ((is_top && contains(feedback, "round")) || (!is_top && thick_legs)) {
                    steps.push_back(create_step(p, "Update " + p.name + " as requested"));
                    changed = true;
                }
            }
        }
        if (contains(feedback, "wood") || contains(feedback, "color") || contains(feedback, "colour")) {
            const bool wood = contains(feedback, "wood");
            for (const auto& name : all_names(task)) {
                if (!scene.objects.count(name)) continue;
                json params = {{"name", name}, {"color", json::array({0.52, 0.37, 0.26})}};
                if (wood) params["label"] = "wood";
                steps.push_back(step("set_material", params, "Recolor " + name));
                changed = true;
            }
        }
        // Rebuild only the parts that are missing or hidden.
        bool missing = false;
        for (const auto& name : all_names(task)) {
            const auto it = scene.objects.find(name);
            missing = missing || it == scene.objects.end() || it->second.second;
        }
        if (missing || !changed) {
            for (auto& s : build_steps(task, round_top, thick_legs)) {
                const auto& params = s["parameters"];
                if (s["tool"] == "create_primitive") {
                    const auto it = scene.objects.find(params["name"].get<std::string>());
                    if (it != scene.objects.end() && !it->second.second && changed) continue;
                }
                steps.push_back(std::move(s));
            }
        }
        std::string show;
        for (const auto& name : all_names(task)) {
            const auto it = scene.objects.find(name);
            if (it != scene.objects.end() && it->second.second) show += "show name=" + name + "\n";
        }
        if (!show.empty()) steps.push_back(step("execute_command", {{"code", show}}, "Bring hidden parts back into view"));
    }
    if (options_.faulty_step && !iterating) {
        steps.push_back(step("transform_object", {{"name", "Table_Tops"}, {"location", json::array({0, 0, 0.95})}},
                             "Re-center the tabletop"));
    }
    steps.push_back(screenshot_step());

    return function_call("create_plan", {{"steps", steps}, {"success_criteria", criteria_for(task, round_top)}});
}

Completion ScriptedProvider::critique(const CompletionRequest& request) {
    int call_number = 0;
    {
        std::lock_guard lock(mutex_);
        call_number = ++critic_calls_;
    }
    const std::string user = last_user(request);
    std::vector<std::string> criteria;
    std::istringstream lines(section(user, "Success Criteria:\n", "\nExecution Summary:"));
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("- ", 0) == 0) criteria.push_back(line.substr(2));
    }
    const SceneView scene = parse_scene(line_after(user, kSceneInfoMarker));
    auto visible = [&](const std::string& name) {
        const auto it = scene.objects.find(name);
        return it != scene.objects.end() && !it->second.second;
    };

    static const std::regex one(R"(^Object (\w+) is a visible (\w+)$)");
    static const std::regex many(R"(^Objects (.+) are visible$)");
    static const std::regex count(R"(^Scene has exactly (\d+) visible objects$)");

    json results = json::array();
    json issues = json::array();
    int met_count = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const std::string& text = criteria[i];
        std::smatch m;
        bool met = true;
        if (std::regex_match(text, m, one)) {
            met = visible(m[1]) && scene.objects.at(m[1]).first == m[2].str();
        } else if (std::regex_match(text, m, many)) {
            std::istringstream names(m[1].str());
            for (std::string n; std::getline(names, n, ',');) {
                n.erase(0, n.find_first_not_of(' '));
                met = met && visible(n);
            }
        } else if (std::regex_match(text, m, count)) {
            met = scene.visible == std::stoi(m[1]);
        }
        if (i == 0 && options_.fail_critiques.count(call_number)) {
            met = false;
            issues.push_back(options_.forced_issue);
        } else if (!met) {
            issues.push_back("Criterion not met: " + text);
        }
        met_count += met ? 1 : 0;
        results.push_back({{"text", text}, {"met", met}});
    }
    const double score = criteria.empty() ? 1.0 : static_cast<double>(met_count) / criteria.size();
    return function_call("analyze_result", {{"criteria", results},
                                            {"score", score},
                                            {"issues", issues},
                                            {"needs_iteration", met_count != static_cast<int>(criteria.size())}});
}

Completion ScriptedProvider::synthesize(const CompletionRequest& request) {
    const std::string action = last_user(request).substr(kSynthesisAsk.size());
    const std::string a = lower(action);
    Completion c;
    if (contains(a, "table_tops") || contains(a, "tabletop")) {
        c.message.content = "```\nmodify name=Table_Top at=(0,0,0.95)\n```\n";
        return c;
    }
    std::string script;
    switch (classify(action)) {
        case Task::table: script = "create name=Table_Top kind=cube size=2 at=(0,0,0.95) scale=(1,1,0.05)\n"; break;
        case Task::cake: script = kCandleScript; break;
        case Task::car: script = kHeadlightScript; break;
        case Task::generic: script = "create name=Main_Body kind=cube size=2 at=(0,0,1)\n"; break;
    }
    c.message.content = script;
    return c;
}

}  // namespace comodel::llm
