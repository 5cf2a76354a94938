#pragma once

#include "comodel/llm.hpp"
#include "comodel/scene.hpp"
#include "comodel/tool_protocol.hpp"
#include "comodel/transcript.hpp"

#include <json.hpp>

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace comodel::agent {

enum class Phase { planning, acting, critiquing, review, done };
enum class Outcome { success, iteration_cap, human_stop, aborted, in_progress };
enum class ReviewMode { autonomous, gated };
enum class StepStatus { pending, running, ok, failed };

std::string_view to_string(Phase p);
std::string_view to_string(Outcome o);
std::string_view to_string(ReviewMode m);
std::string_view to_string(StepStatus s);

struct PlanStep {
    int index = 0;
    std::string tool;
    nlohmann::json parameters = nlohmann::json::object();
    std::string description;
    StepStatus status = StepStatus::pending;
    std::string result_summary;
};

struct Plan {
    std::vector<PlanStep> steps;
    std::vector<std::string> success_criteria;
    int revision_of_plan = 0;
};

struct CriterionResult {
    std::string text;
    bool met = false;
};

struct Critique {
    std::vector<CriterionResult> criteria;
    double score = 0.0;
    std::vector<std::string> issues;
    bool needs_iteration = false;

    bool all_met() const;
};

nlohmann::json to_json(const PlanStep& step);
nlohmann::json to_json(const Plan& plan);
nlohmann::json to_json(const Critique& critique);

enum class HumanKind { feedback, approve, stop };
std::string_view to_string(HumanKind k);

struct HumanInput {
    HumanKind kind = HumanKind::feedback;
    std::string text;
};

class InvalidConfig : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IllegalPhase : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct SessionConfig {
    int max_iterations = 5;
    llm::ProviderConfig provider;
    ReviewMode review_mode = ReviewMode::autonomous;
    int screenshot_size = 256;
};

/// Session config file: {task, max_iterations, review_mode, provider: {kind, model, base_url, fixtures_dir}, toolsets}.
struct SessionFile {
    std::string task;
    SessionConfig config;
    std::optional<tools::ToolsetConfig> toolsets;
};
SessionFile session_file_from_json(const nlohmann::json& doc);

/// Thread-safe queue for human input arriving from other threads (UI, sync server).
class HumanInputChannel {
public:
    void push(HumanInput input);
    std::optional<HumanInput> try_pop();
    /// Blocks until an input arrives or the channel is closed (then returns nullopt).
    std::optional<HumanInput> wait_pop();
    void close();

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<HumanInput> queue_;
    bool closed_ = false;
};

/// Shared information board visible to all three roles.
struct Board {
    nlohmann::json scene_summary = nlohmann::json::object();
    std::optional<Critique> last_critique;
    std::vector<std::string> human_feedback_queue;
    tools::ToolsetConfig tool_config;
    bool review_pending = false;
    bool force_replan = false;
};

/// One planner, actor, critic loop over a scene reached through a ToolServer.
///
/// A session is driven from a single thread; human input from other threads goes through inbox().
class Session {
public:
    using Observer = std::function<void(const Event&)>;

    /// Throws InvalidConfig for an empty task or max_iterations < 1.
    Session(std::string task, SessionConfig config, std::shared_ptr<llm::Provider> provider,
            tools::ToolServer& tools, Clock clock = system_timestamp);

    /// Performs exactly one transition and returns the last event it appended.
    /// Throws IllegalPhase once the session is done.
    const Event& step();
    /// Steps until done and returns the transcript. Never blocks in autonomous mode.
    const Transcript& run_to_completion();

    /// Records input. Feedback is queued for the next planning pass; approve/stop are only
    /// legal in review. Throws IllegalPhase.
    void incorporate_human(const HumanInput& input);
    HumanInputChannel& inbox() { return inbox_; }

    /// Called after every appended event, on the session thread.
    void set_observer(Observer observer) { observer_ = std::move(observer); }

    const std::string& task() const { return task_; }
    const SessionConfig& config() const { return config_; }
    int iteration() const { return iteration_; }
    Phase phase() const { return phase_; }
    Outcome outcome() const { return outcome_; }
    const std::optional<Plan>& plan() const { return plan_; }
    const Board& board() const { return board_; }
    const Transcript& transcript() const { return transcript_; }
    /// PPM bytes of the critic's screenshot per iteration.
    const std::map<int, std::string>& screenshots() const { return screenshots_; }

private:
    const Event& emit(EventKind kind, nlohmann::json payload);
    const Event& change_phase(Phase to, nlohmann::json extra = nlohmann::json::object());
    const Event& finish(Outcome outcome, nlohmann::json extra = nlohmann::json::object());
    void drain_inbox();
    void record_human(const HumanInput& input);

    const Event& do_planning();
    const Event& do_acting();
    const Event& do_critiquing();
    const Event& do_review();

    tools::ToolResult call(const std::string& tool, const nlohmann::json& params, const std::string& id);
    llm::StructuredCall ask_structured(std::vector<llm::ChatMessage> messages, const llm::FunctionSchema& schema,
                                       const std::function<void(const llm::StructuredCall&)>& check);
    std::string revision_context() const;
    nlohmann::json scene_info();

    std::string task_;
    SessionConfig config_;
    std::shared_ptr<llm::Provider> provider_;
    tools::ToolServer& tools_;
    Transcript transcript_;
    Observer observer_;
    HumanInputChannel inbox_;

    int iteration_ = 1;
    Phase phase_ = Phase::planning;
    Outcome outcome_ = Outcome::in_progress;
    std::optional<Plan> plan_;
    Board board_;
    std::optional<HumanInput> review_decision_;
    std::optional<Scene> previous_scene_;
    std::map<int, std::string> screenshots_;
    int plans_created_ = 0;
    int tool_calls_ = 0;
};

/// Provider built from `config.provider`.
std::unique_ptr<Session> start_session(const std::string& task, const SessionConfig& config, tools::ToolServer& tools,
                                       Clock clock = system_timestamp);

}  // namespace comodel::agent
