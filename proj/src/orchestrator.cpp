#include "comodel/orchestrator.hpp"

#include "comodel/digest.hpp"
#include "comodel/metrics.hpp"
#include "comodel/render.hpp"

#include <algorithm>
#include <array>

namespace comodel::agent {
namespace {

using json = nlohmann::json;

constexpr std::string_view kScreenshotTool = "get_viewport_screenshot";

json messages_json(const std::vector<llm::ChatMessage>& messages) {
    json out = json::array();
    for (const auto& m : messages) out.push_back({{"role", llm::to_string(m.role)}, {"content", m.content}});
    return out;
}

std::string summarize(const tools::ToolResult& r) {
    if (!r.ok) return r.error ? r.error->code + ": " + r.error->message : "error";
    if (r.payload.contains("content_hash")) {
        return "screenshot " + std::to_string(r.payload.value("width", 0)) + "x" +
               std::to_string(r.payload.value("height", 0)) + " sha256 " + r.payload["content_hash"].get<std::string>();
    }
    std::string text = r.payload.dump();
    if (text.size() > 300) text = text.substr(0, 297) + "...";
    return text;
}

// What the transcript keeps of a call: enough to re-execute it, without image bytes.
json call_record(const std::string& tool, const json& arguments, const tools::ToolResult& r) {
    json rec = {{"tool", tool}, {"arguments", arguments}, {"ok", r.ok}};
    if (r.error) rec["error"] = {{"code", r.error->code}, {"message", r.error->message}};
    if (r.payload.is_object() && r.payload.contains("revision")) rec["revision"] = r.payload["revision"];
    return rec;
}

template <class Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::array<std::pair<Enum, std::string_view>, N>& names,
                const char* what) {
    for (const auto& [v, n] : names) {
        if (n == text) return v;
    }
    throw InvalidConfig(std::string("unknown ") + what + " '" + text + "'");
}

}  // namespace

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::planning: return "planning";
        case Phase::acting: return "acting";
        case Phase::critiquing: return "critiquing";
        case Phase::review: return "review";
        case Phase::done: return "done";
    }
    return "?";
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::success: return "success";
        case Outcome::iteration_cap: return "iteration_cap";
        case Outcome::human_stop: return "human_stop";
        case Outcome::aborted: return "aborted";
        case Outcome::in_progress: return "in_progress";
    }
    return "?";
}

std::string_view to_string(ReviewMode m) { return m == ReviewMode::gated ? "gated" : "autonomous"; }

std::string_view to_string(StepStatus s) {
    switch (s) {
        case StepStatus::pending: return "pending";
        case StepStatus::running: return "running";
        case StepStatus::ok: return "ok";
        case StepStatus::failed: return "failed";
    }
    return "?";
}

std::string_view to_string(HumanKind k) {
    switch (k) {
        case HumanKind::feedback: return "feedback";
        case HumanKind::approve: return "approve";
        case HumanKind::stop: return "stop";
    }
    return "?";
}

bool Critique::all_met() const {
    for (const auto& c : criteria) {
        if (!c.met) return false;
    }
    return true;
}

json to_json(const PlanStep& s) {
    return {{"index", s.index},
            {"tool", s.tool},
            {"parameters", s.parameters},
            {"description", s.description},
            {"status", std::string(to_string(s.status))},
            {"result_summary", s.result_summary}};
}

json to_json(const Plan& p) {
    json steps = json::array();
    for (const auto& s : p.steps) steps.push_back(to_json(s));
    return {{"steps", steps}, {"success_criteria", p.success_criteria}, {"revision_of_plan", p.revision_of_plan}};
}

json to_json(const Critique& c) {
    json criteria = json::array();
    for (const auto& r : c.criteria) criteria.push_back({{"text", r.text}, {"met", r.met}});
    return {{"criteria", criteria}, {"score", c.score}, {"issues", c.issues}, {"needs_iteration", c.needs_iteration}};
}

SessionFile session_file_from_json(const json& doc) {
    if (!doc.is_object()) throw InvalidConfig("session config must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
        if (key != "task" && key != "max_iterations" && key != "review_mode" && key != "provider" && key != "toolsets") {
            throw InvalidConfig("unknown session config key '" + key + "'");
        }
    }
    SessionFile f;
    try {
        f.task = doc.value("task", "");
        f.config.max_iterations = doc.value("max_iterations", 5);
        static constexpr std::array<std::pair<ReviewMode, std::string_view>, 2> modes = {
            {{ReviewMode::autonomous, "autonomous"}, {ReviewMode::gated, "gated"}}};
        f.config.review_mode = parse_enum(doc.value("review_mode", "autonomous"), modes, "review_mode");
        if (doc.contains("provider")) {
            const json& p = doc["provider"];
            if (!p.is_object()) throw InvalidConfig("provider must be an object");
            f.config.provider.kind = p.value("kind", "scripted");
            f.config.provider.model = p.value("model", "");
            f.config.provider.base_url = p.value("base_url", "");
            f.config.provider.fixtures_dir = p.value("fixtures_dir", "");
        }
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("session config: ") + e.what());
    }
    if (doc.contains("toolsets")) {
        try {
            f.toolsets = tools::toolset_config_from_json(doc["toolsets"]);
        } catch (const tools::ConfigError& e) {
            throw InvalidConfig(e.what());
        }
    }
    return f;
}

// ---------------------------------------------------------------------------------------------

void HumanInputChannel::push(HumanInput input) {
    {
        std::lock_guard lock(mutex_);
        queue_.push_back(std::move(input));
    }
    cv_.notify_all();
}

std::optional<HumanInput> HumanInputChannel::try_pop() {
    std::lock_guard lock(mutex_);
    if (queue_.empty()) return std::nullopt;
    HumanInput in = std::move(queue_.front());
    queue_.pop_front();
    return in;
}

std::optional<HumanInput> HumanInputChannel::wait_pop() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    HumanInput in = std::move(queue_.front());
    queue_.pop_front();
    return in;
}

void HumanInputChannel::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

// ---------------------------------------------------------------------------------------------

Session::Session(std::string task, SessionConfig config, std::shared_ptr<llm::Provider> provider,
                 tools::ToolServer& tools, Clock clock)
    : task_(std::move(task)),
      config_(std::move(config)),
      provider_(std::move(provider)),
      tools_(tools),
      transcript_(std::move(clock)) {
    if (task_.find_first_not_of(" \t\r\n") == std::string::npos) throw InvalidConfig("task must be nonempty");
    if (config_.max_iterations < 1) throw InvalidConfig("max_iterations must be >= 1");
    if (config_.screenshot_size < kMinImageSize || config_.screenshot_size > kMaxImageSize) {
        throw InvalidConfig("screenshot_size out of range");
    }
    if (!provider_) throw InvalidConfig("no provider");
    board_.tool_config = tools_.config();
    emit(EventKind::phase_change, {{"from", nullptr}, {"to", "planning"}, {"iteration", iteration_},
                                   {"task", task_}, {"max_iterations", config_.max_iterations},
                                   {"review_mode", std::string(to_string(config_.review_mode))},
                                   {"toolsets", tools::to_json(board_.tool_config)}});
}

const Event& Session::emit(EventKind kind, json payload) {
    const Event& e = transcript_.append(kind, std::move(payload));
    if (observer_) observer_(e);
    return e;
}

const Event& Session::change_phase(Phase to, json extra) {
    json payload = {{"from", std::string(to_string(phase_))}, {"to", std::string(to_string(to))}, {"iteration", iteration_}};
    for (auto& [k, v] : extra.items()) payload[k] = v;
    phase_ = to;
    return emit(EventKind::phase_change, std::move(payload));
}

const Event& Session::finish(Outcome outcome, json extra) {
    outcome_ = outcome;
    board_.review_pending = false;
    extra["outcome"] = std::string(to_string(outcome));
    extra["final_snapshot"] = snapshot(tools_.host().snapshot());
    return change_phase(Phase::done, std::move(extra));
}

void Session::record_human(const HumanInput& input) {
    emit(EventKind::human_input,
         {{"kind", std::string(to_string(input.kind))}, {"text", input.text}, {"phase", std::string(to_string(phase_))}});
}

void Session::incorporate_human(const HumanInput& input) {
    if (phase_ == Phase::done) throw IllegalPhase("session is done");
    if (input.kind == HumanKind::feedback) {
        if (input.text.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw std::invalid_argument("feedback text must be nonempty");
        }
        record_human(input);
        board_.human_feedback_queue.push_back(input.text);
        if (phase_ == Phase::review) review_decision_ = input;
        else if (phase_ != Phase::planning) board_.force_replan = true;
        return;
    }
    if (phase_ != Phase::review) {
        throw IllegalPhase(std::string(to_string(input.kind)) + " is only accepted during review, not " +
                           std::string(to_string(phase_)));
    }
    record_human(input);
    review_decision_ = input;
}

void Session::drain_inbox() {
    while (auto in = inbox_.try_pop()) {
        try {
            incorporate_human(*in);
        } catch (const std::exception& e) {
            // Asynchronous senders cannot be answered; keep the rejection on record.
            emit(EventKind::human_input, {{"kind", std::string(to_string(in->kind))},
                                          {"text", in->text},
                                          {"phase", std::string(to_string(phase_))},
                                          {"rejected", e.what()}});
        }
    }
}

const Event& Session::step() {
    if (phase_ == Phase::done) throw IllegalPhase("session is done");
    drain_inbox();
    try {
        switch (phase_) {
            case Phase::planning: return do_planning();
            case Phase::acting: return do_acting();
            case Phase::critiquing: return do_critiquing();
            case Phase::review: return do_review();
            case Phase::done: break;
        }
    } catch (const llm::ProviderError& e) {
        return finish(Outcome::aborted, {{"error",
                                          {{"kind", std::string(llm::to_string(e.kind()))},
                                           {"detail", e.detail()},
                                           {"message", e.what()}}}});
    }
    throw IllegalPhase("session is done");
}

const Transcript& Session::run_to_completion() {
    while (phase_ != Phase::done) step();
    return transcript_;
}

tools::ToolResult Session::call(const std::string& tool, const json& params, const std::string& id) {
    ++tool_calls_;
    board_.tool_config = tools_.config();
    return tools_.call(tools::ToolCall{id, tool, params});
}

json Session::scene_info() {
    const auto r = call("get_scene_info", json::object(), "it" + std::to_string(iteration_) + "-info");
    return r.ok ? r.payload : json::object();
}

llm::StructuredCall Session::ask_structured(std::vector<llm::ChatMessage> messages, const llm::FunctionSchema& schema,
                                            const std::function<void(const llm::StructuredCall&)>& check) {
    for (int attempt = 0;; ++attempt) {
        llm::CompletionRequest req;
        req.messages = messages;
        req.required_function = schema;
        const llm::Completion reply = provider_->complete(req);
        try {
            llm::StructuredCall sc = llm::extract_structured(reply, schema);
            check(sc);
            return sc;
        } catch (const llm::ProviderError& e) {
            if (e.kind() != llm::ProviderError::Kind::schema_violation || attempt > 0) throw;
            messages.push_back({llm::Role::system, "Your previous reply did not satisfy the " + schema.name +
                                                       " function (" + e.what() + "). Call " + schema.name +
                                                       " again with arguments that match its schema."});
        }
    }
}

std::string Session::revision_context() const {
    if (!board_.last_critique) return "";
    const Critique& c = *board_.last_critique;
    std::string out = "Critique of iteration " + std::to_string(iteration_ - 1) + " (score " + format_real(c.score) + "):\n";
    bool any_unmet = false;
    for (const auto& r : c.criteria) {
        if (r.met) continue;
        if (!any_unmet) out += "Unmet criteria:\n";
        any_unmet = true;
        out += "- " + r.text + "\n";
    }
    if (!c.issues.empty()) {
        out += "Issues:\n";
        for (const auto& i : c.issues) out += "- " + i + "\n";
    }
    return out;
}

const Event& Session::do_planning() {
    const json info = scene_info();
    board_.scene_summary = info;
    const json ctx = {{"tools_description", tools::describe_tools(tools_.list())},
                      {"revision_context", revision_context()},
                      {"scene_summary", info.dump(2)},
                      {"iteration_count", iteration_ - 1},
                      {"user_request", task_},
                      {"human_feedback", board_.human_feedback_queue}};
    const auto messages = llm::render_prompt(llm::AgentRole::planner, ctx);

    const auto sc = ask_structured(messages, llm::create_plan_schema(), [](const llm::StructuredCall& call) {
        if (call.arguments["success_criteria"].empty()) {
            throw llm::ProviderError(llm::ProviderError::Kind::schema_violation, "success_criteria",
                                     "success_criteria must not be empty");
        }
    });

    Plan plan;
    plan.revision_of_plan = plans_created_++;
    for (const auto& s : sc.arguments["steps"]) {
        PlanStep ps;
        ps.index = static_cast<int>(plan.steps.size());
        ps.tool = s["tool"].get<std::string>();
        ps.parameters = s["parameters"];
        ps.description = s["description"].get<std::string>();
        plan.steps.push_back(std::move(ps));
    }
    for (const auto& c : sc.arguments["success_criteria"]) plan.success_criteria.push_back(c.get<std::string>());

    const bool normalized = plan.steps.empty() || plan.steps.back().tool != kScreenshotTool;
    if (normalized) {
        PlanStep shot;
        shot.index = static_cast<int>(plan.steps.size());
        shot.tool = kScreenshotTool;
        shot.description = "Capture the viewport to verify the result";
        plan.steps.push_back(std::move(shot));
    }
    plan_ = plan;

    json payload = {{"iteration", iteration_},
                    {"plan", to_json(plan)},
                    {"human_feedback", board_.human_feedback_queue},
                    {"prompt", messages_json(messages)}};
    if (normalized) payload["normalization"] = "appended get_viewport_screenshot as the final step";
    emit(EventKind::plan_created, std::move(payload));

    board_.human_feedback_queue.clear();
    board_.force_replan = false;
    return change_phase(Phase::acting);
}

const Event& Session::do_acting() {
    auto& steps = plan_->steps;
    auto next = std::find_if(steps.begin(), steps.end(), [](const PlanStep& s) { return s.status == StepStatus::pending; });
    if (next == steps.end()) return change_phase(Phase::critiquing);

    PlanStep& s = *next;
    s.status = StepStatus::running;
    emit(EventKind::step_started,
         {{"iteration", iteration_}, {"index", s.index}, {"tool", s.tool}, {"parameters", s.parameters},
          {"description", s.description}});

    const std::string id = "it" + std::to_string(iteration_) + "-s" + std::to_string(s.index);
    json calls = json::array();
    bool fallback_used = false;
    std::optional<tools::ToolResult> result;
    std::string failure;

    const bool empty_code = s.tool == "execute_command" &&
                            (!s.parameters.contains("code") || !s.parameters["code"].is_string() ||
                             s.parameters["code"].get<std::string>().find_first_not_of(" \t\r\n") == std::string::npos);
    if (empty_code) {
        failure = "execute_command step has no code";
    } else {
        result = call(s.tool, s.parameters, id);
        calls.push_back(call_record(s.tool, s.parameters, *result));
        if (!result->ok) {
            failure = summarize(*result);
            emit(EventKind::tool_error, {{"iteration", iteration_},
                                         {"index", s.index},
                                         {"tool", s.tool},
                                         {"code", result->error->code},
                                         {"message", result->error->message},
                                         {"retry", true}});
        }
    }

    if (!failure.empty()) {
        // One retry: ask for a command script that performs the step.
        fallback_used = true;
        const auto actor = llm::render_prompt(llm::AgentRole::actor, {{"tools", tools::describe_tools(tools_.list())},
                                                                      {"current_step", to_json(s).dump()}});
        const std::string action = s.description + "\nPlanned call: " + s.tool + " " + s.parameters.dump() +
                                   "\nProblem: " + failure + "\nTask: " + task_;
        llm::CompletionRequest req;
        req.messages = llm::synthesis_prompt(actor, action);
        const llm::Completion reply = provider_->complete(req);
        const std::string code = llm::clean_generated_code(reply.message.content);
        if (code.empty()) {
            result.reset();
            failure = "command synthesis returned no commands";
        } else {
            const json params = {{"code", code}};
            result = call("execute_command", params, id + "-retry");
            calls.push_back(call_record("execute_command", params, *result));
            if (!result->ok) {
                failure = summarize(*result);
                emit(EventKind::tool_error, {{"iteration", iteration_},
                                             {"index", s.index},
                                             {"tool", "execute_command"},
                                             {"code", result->error->code},
                                             {"message", result->error->message},
                                             {"retry", false}});
            }
        }
    }

    const bool ok = result && result->ok;
    s.status = ok ? StepStatus::ok : StepStatus::failed;
    s.result_summary = ok ? (fallback_used ? "recovered by command script: " : "") + summarize(*result) : failure;
    emit(EventKind::step_finished, {{"iteration", iteration_},
                                    {"index", s.index},
                                    {"tool", s.tool},
                                    {"status", std::string(to_string(s.status))},
                                    {"result_summary", s.result_summary},
                                    {"fallback_used", fallback_used},
                                    {"calls", calls}});

    const bool more = std::any_of(steps.begin(), steps.end(), [](const PlanStep& p) { return p.status == StepStatus::pending; });
    if (more) return transcript_.events().back();
    return change_phase(Phase::critiquing);
}

const Event& Session::do_critiquing() {
    const std::string id = "it" + std::to_string(iteration_) + "-critic";
    const auto shot = call(std::string(kScreenshotTool),
                           {{"width", config_.screenshot_size}, {"height", config_.screenshot_size}}, id);
    std::string shot_hash = "unavailable";
    if (shot.ok) {
        shot_hash = shot.payload["content_hash"].get<std::string>();
        screenshots_[iteration_] = base64_decode(shot.payload["data_base64"].get<std::string>());
    }
    const json info = scene_info();
    board_.scene_summary = info;

    std::string summary;
    for (const auto& s : plan_->steps) {
        summary += "Step " + std::to_string(s.index) + " [" + std::string(to_string(s.status)) + "] " + s.tool + ": " +
                   s.description + " -> " + s.result_summary + "\n";
    }
    summary += std::string(llm::kSceneInfoMarker) + info.dump() + "\n";

    const json ctx = {{"user_request", task_},
                      {"success_criteria", plan_->success_criteria},
                      {"execution_summary", summary},
                      {"screenshot_hash", shot_hash}};
    const auto messages = llm::render_prompt(llm::AgentRole::critic, ctx);
    const std::size_t expected = plan_->success_criteria.size();
    const auto sc = ask_structured(messages, llm::analyze_result_schema(), [&](const llm::StructuredCall& call) {
        if (call.arguments["criteria"].size() != expected) {
            throw llm::ProviderError(llm::ProviderError::Kind::schema_violation, "criteria",
                                     "expected one entry per success criterion (" + std::to_string(expected) + ")");
        }
    });

    Critique c;
    for (std::size_t i = 0; i < expected; ++i) {
        // Entries are matched to the plan's criteria by position; the plan's wording is kept.
        c.criteria.push_back({plan_->success_criteria[i], sc.arguments["criteria"][i]["met"].get<bool>()});
    }
    c.score = sc.arguments["score"].get<double>();
    for (const auto& i : sc.arguments["issues"]) c.issues.push_back(i.get<std::string>());
    c.needs_iteration = sc.arguments["needs_iteration"].get<bool>();
    board_.last_critique = c;

    emit(EventKind::critique, {{"iteration", iteration_},
                               {"critique", to_json(c)},
                               {"screenshot_hash", shot_hash},
                               {"prompt", messages_json(messages)}});

    const Scene scene = tools_.host().snapshot();
    json similarity = nullptr;
    if (previous_scene_) similarity = metrics::scene_similarity(*previous_scene_, scene);
    emit(EventKind::metrics_snapshot, {{"iteration", iteration_},
                                       {"geometry_count", metrics::geometry_count(scene)},
                                       {"vertex_count", metrics::vertex_count(scene)},
                                       {"similarity_to_previous", similarity},
                                       {"scene", snapshot(scene)}});
    previous_scene_ = scene;

    const bool replan_requested = board_.force_replan || !board_.human_feedback_queue.empty();
    if (c.all_met() && !c.needs_iteration && !replan_requested) return finish(Outcome::success);
    if (iteration_ >= config_.max_iterations) return finish(Outcome::iteration_cap);
    if (config_.review_mode == ReviewMode::gated) {
        board_.review_pending = true;
        return change_phase(Phase::review);
    }
    ++iteration_;
    return change_phase(Phase::planning);
}

const Event& Session::do_review() {
    while (!review_decision_) {
        auto in = inbox_.wait_pop();
        if (!in) in = HumanInput{HumanKind::stop, "input channel closed"};
        try {
            incorporate_human(*in);
        } catch (const std::exception& e) {
            emit(EventKind::human_input, {{"kind", std::string(to_string(in->kind))},
                                          {"text", in->text},
                                          {"phase", std::string(to_string(phase_))},
                                          {"rejected", e.what()}});
        }
    }
    const HumanInput decision = *review_decision_;
    review_decision_.reset();
    if (decision.kind == HumanKind::stop) return finish(Outcome::human_stop);
    board_.review_pending = false;
    ++iteration_;
    return change_phase(Phase::planning);
}

std::unique_ptr<Session> start_session(const std::string& task, const SessionConfig& config, tools::ToolServer& tools,
                                       Clock clock) {
    std::shared_ptr<llm::Provider> provider;
    try {
        provider = llm::make_provider(config.provider);
    } catch (const std::invalid_argument& e) {
        throw InvalidConfig(e.what());
    }
    return std::make_unique<Session>(task, config, std::move(provider), tools, std::move(clock));
}

}  // namespace comodel::agent
