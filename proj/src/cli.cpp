#include "comodel/cli.hpp"

#include "comodel/metrics.hpp"
#include "comodel/orchestrator.hpp"
#include "comodel/render.hpp"
#include "comodel/rpc_server.hpp"
#include "comodel/sync_server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace comodel::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Failure : std::runtime_error {
    Failure(int code, const std::string& message) : std::runtime_error(message), exit_code(code) {}
    int exit_code;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure(kExitFailure, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Failure(kExitFailure, "cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

Scene load_scene(const fs::path& path) { return restore(std::string_view(read_file(path))); }

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

metrics::SimilarityWeights parse_weights(const std::vector<double>& w) {
    if (w.size() != 3) throw Failure(kExitUsage, "--weights takes three numbers");
    if (std::abs(w[0] + w[1] + w[2] - 1.0) > 1e-9 || w[0] < 0 || w[1] < 0 || w[2] < 0) {
        throw Failure(kExitUsage, "--weights must be non-negative and sum to 1");
    }
    return {w[0], w[1], w[2]};
}

struct RunOptions {
    std::string task;
    std::string config_path;
    std::string provider = "scripted";
    std::string fixtures;
    std::string record;
    std::string model;
    std::string base_url;
    int max_iters = 5;
    std::string out_dir = "out";
    std::vector<std::string> toolsets;
    std::vector<int> fail_critiques;
    int screenshot_size = tools::kDefaultScreenshotSize;
    bool epoch_timestamps = false;
};

int do_run(const RunOptions& o, CLI::App& sub, std::ostream& out) {
    agent::SessionFile file;
    if (!o.config_path.empty()) {
        const json doc = json::parse(read_file(o.config_path), nullptr, false);
        if (doc.is_discarded()) throw Failure(kExitUsage, "session config is not valid JSON");
        try {
            file = agent::session_file_from_json(doc);
        } catch (const agent::InvalidConfig& e) {
            throw Failure(kExitUsage, e.what());
        }
    }
    // Flags given on the command line win over the config file.
    if (sub.count("--task") || file.task.empty()) file.task = o.task;
    if (sub.count("--max-iters") || o.config_path.empty()) file.config.max_iterations = o.max_iters;
    if (sub.count("--provider") || o.config_path.empty()) file.config.provider.kind = o.provider;
    if (!o.fixtures.empty()) file.config.provider.fixtures_dir = o.fixtures;
    if (!o.model.empty()) file.config.provider.model = o.model;
    if (!o.base_url.empty()) file.config.provider.base_url = o.base_url;
    file.config.provider.record_dir = o.record;
    file.config.provider.scripted.fail_critiques = {o.fail_critiques.begin(), o.fail_critiques.end()};
    file.config.screenshot_size = o.screenshot_size;
    if (file.config.review_mode == agent::ReviewMode::gated) {
        throw Failure(kExitUsage, "run is headless; gated review needs `serve`");
    }
    if (file.task.empty()) throw Failure(kExitUsage, "--task is required");
    if (file.config.provider.kind == "replay" && file.config.provider.fixtures_dir.empty()) {
        throw Failure(kExitUsage, "--provider replay needs --fixtures");
    }
    tools::ToolsetConfig toolsets = file.toolsets.value_or(tools::ToolsetConfig{});
    if (!o.toolsets.empty()) {
        try {
            toolsets = tools::toolset_config_from_json(o.toolsets);
        } catch (const tools::ConfigError& e) {
            throw Failure(kExitUsage, e.what());
        }
    }

    SceneHost host;
    tools::ToolServer server(host, toolsets);
    agent::Clock clock = agent::system_timestamp;
    if (o.epoch_timestamps) clock = [] { return std::string("1970-01-01T00:00:00.000Z"); };
    std::unique_ptr<agent::Session> session;
    try {
        session = agent::start_session(file.task, file.config, server, clock);
    } catch (const agent::InvalidConfig& e) {
        throw Failure(kExitUsage, e.what());
    }
    const auto& transcript = session->run_to_completion();

    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    write_file(dir / "transcript.jsonl", transcript.to_jsonl());
    write_file(dir / "scene.json", snapshot_text(host.snapshot()) + "\n");
    std::vector<json> events;
    for (const auto& e : transcript.events()) events.push_back(agent::to_json(e));
    try {
        write_file(dir / "metrics.csv", metrics::to_csv(metrics::iteration_report(events)));
    } catch (const metrics::NoMetricsEvents&) {
        write_file(dir / "metrics.csv", std::string(metrics::kCsvHeader) + "\n");
    }
    for (const auto& [iteration, ppm] : session->screenshots()) {
        write_file(dir / ("shot_iter" + std::to_string(iteration) + ".ppm"), ppm);
    }

    out << "outcome=" << agent::to_string(session->outcome()) << " iterations=" << session->iteration()
        << " transcript_hash=" << transcript.hash() << "\n";
    if (session->outcome() == agent::Outcome::aborted) {
        const json& last = transcript.events().back().payload;
        throw Failure(kExitFailure, "session aborted: " + last.value("error", json::object()).value("message", "unknown"));
    }
    return kExitOk;
}

int do_metrics(const std::string& a, const std::string& b, const std::string& transcript,
               const std::vector<double>& weights_flag, std::ostream& out) {
    const auto weights = weights_flag.empty() ? metrics::SimilarityWeights{} : parse_weights(weights_flag);
    if (!transcript.empty()) {
        std::vector<json> events;
        try {
            events = agent::parse_jsonl(read_file(transcript));
        } catch (const std::invalid_argument& e) {
            throw Failure(kExitFailure, e.what());
        }
        std::optional<metrics::SimilarityWeights> override;
        if (!weights_flag.empty()) override = weights;
        out << metrics::to_csv(metrics::iteration_report(events, override));
        return kExitOk;
    }
    if (a.empty() || b.empty()) throw Failure(kExitUsage, "metrics needs --a and --b, or --transcript");
    const Scene sa = load_scene(a);
    const Scene sb = load_scene(b);
    out << "geometry_count " << metrics::geometry_count(sa) << " " << metrics::geometry_count(sb) << "\n";
    out << "vertex_count " << metrics::vertex_count(sa) << " " << metrics::vertex_count(sb) << "\n";
    out << "similarity " << fixed6(metrics::scene_similarity(sa, sb, weights)) << "\n";
    return kExitOk;
}

int do_replay(const std::string& path, const std::string& out_scene, std::ostream& out) {
    std::vector<json> events;
    try {
        events = agent::parse_jsonl(read_file(path));
    } catch (const std::invalid_argument& e) {
        throw Failure(kExitFailure, e.what());
    }
    if (events.empty()) throw Failure(kExitFailure, "transcript is empty");

    SceneHost host;
    tools::ToolsetConfig toolsets;
    const json& first = events.front().value("payload", json::object());
    if (first.contains("toolsets")) toolsets = tools::toolset_config_from_json(first["toolsets"]);
    tools::ToolServer server(host, toolsets);

    std::optional<json> expected;
    int calls = 0;
    int mismatched = 0;
    for (const auto& e : events) {
        const std::string kind = e.value("kind", "");
        const json& p = e.value("payload", json::object());
        if (kind == "step_finished") {
            for (const auto& c : p.value("calls", json::array())) {
                const auto r = server.call({"replay-" + std::to_string(calls++), c.at("tool").get<std::string>(),
                                            c.value("arguments", json::object())});
                if (r.ok != c.value("ok", r.ok)) ++mismatched;
                if (c.contains("revision") && r.payload.value("revision", json()) != c["revision"]) ++mismatched;
            }
        } else if (kind == "phase_change" && p.value("to", "") == "done" && p.contains("final_snapshot")) {
            expected = p["final_snapshot"];
        }
    }
    if (!expected) throw Failure(kExitFailure, "transcript has no final snapshot (session did not finish)");
    const Scene actual = host.snapshot();
    if (!out_scene.empty()) write_file(out_scene, snapshot_text(actual) + "\n");
    const bool same = snapshot_text(actual) == expected->dump();
    if (!same || mismatched > 0) {
        throw Failure(kExitDivergence, "replay diverged: " +
                                           (same ? std::to_string(mismatched) + " call result(s) differ"
                                                 : "final snapshot differs at revision " + std::to_string(actual.revision)));
    }
    out << "replay ok: " << calls << " calls, revision " << actual.revision << "\n";
    return kExitOk;
}

int do_serve(const std::string& address, int port, int line_port, const std::string& task, const RunOptions& o,
             std::ostream& out) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    SceneHost host;
    tools::ToolServer server(host);
    rpc::Endpoint endpoint(server);
    sync::SyncHub hub(host, server);
    sync::WsServer ws(hub, endpoint);
    rpc::LineServer line(endpoint);

    const auto bound = ws.start(address, static_cast<unsigned short>(port));
    out << "sync: ws://" << address << ":" << bound << "/sync  rpc: ws://" << address << ":" << bound << "/rpc\n";
    if (line_port >= 0) {
        const auto lp = line.start(address, static_cast<unsigned short>(line_port));
        out << "rpc (line-delimited TCP): " << address << ":" << lp << "\n";
    }
    out.flush();

    std::unique_ptr<agent::Session> session;
    std::thread runner;
    if (!task.empty()) {
        agent::SessionConfig config;
        config.review_mode = agent::ReviewMode::gated;
        config.max_iterations = o.max_iters;
        config.provider.kind = o.provider;
        config.provider.fixtures_dir = o.fixtures;
        config.provider.model = o.model;
        config.provider.base_url = o.base_url;
        session = agent::start_session(task, config, server);
        session->set_observer([&hub](const agent::Event& e) { hub.broadcast_agent_event(agent::to_json(e)); });
        hub.attach_session(&session->inbox());
        runner = std::thread([&] {
            session->run_to_completion();
            out << "session finished: " << agent::to_string(session->outcome()) << "\n";
            out.flush();
        });
    }

    int sig = 0;
    sigwait(&signals, &sig);
    if (session) {
        hub.attach_session(nullptr);
        session->inbox().close();
    }
    if (runner.joinable()) runner.join();
    line.stop();
    ws.stop();
    return kExitOk;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-agent low-poly co-modeling: run sessions, serve the sync hub, compute metrics."};
    app.name("comodel");
    app.require_subcommand(1);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "Run one planner/actor/critic session headless");
    run_cmd->add_option("--task", run.task, "Modeling request");
    run_cmd->add_option("--config", run.config_path, "Session config JSON")->check(CLI::ExistingFile);
    run_cmd->add_option("--provider", run.provider, "scripted | replay | http")
        ->check(CLI::IsMember({"scripted", "replay", "http"}));
    run_cmd->add_option("--fixtures", run.fixtures, "Replay fixture directory");
    run_cmd->add_option("--record", run.record, "Write every completion as a replay fixture here");
    run_cmd->add_option("--model", run.model, "Model name for the http provider");
    run_cmd->add_option("--base-url", run.base_url, "Chat-completions base URL for the http provider");
    run_cmd->add_option("--max-iters", run.max_iters, "Iteration cap")->check(CLI::PositiveNumber);
    run_cmd->add_option("--out-dir", run.out_dir, "Output directory");
    run_cmd->add_option("--toolsets", run.toolsets, "Enabled toolsets (inspection is always required)");
    run_cmd->add_option("--fail-critique", run.fail_critiques, "Scripted critic: fail the first criterion on these critic calls");
    run_cmd->add_option("--screenshot-size", run.screenshot_size, "Critic screenshot edge in pixels")
        ->check(CLI::Range(kMinImageSize, kMaxImageSize));
    run_cmd->add_flag("--epoch-timestamps", run.epoch_timestamps, "Stamp every event with the Unix epoch");

    std::string serve_host = "127.0.0.1";
    int serve_port = 8765;
    int line_port = -1;
    std::string serve_task;
    RunOptions serve_opts;
    auto* serve_cmd = app.add_subcommand("serve", "Serve /sync and /rpc WebSocket endpoints over an idle scene");
    serve_cmd->add_option("--host", serve_host, "Listen address");
    serve_cmd->add_option("--port", serve_port, "WebSocket port (0 picks one)")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--line-port", line_port, "Also serve line-delimited JSON-RPC over TCP on this port")
        ->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--task", serve_task, "Start a gated session for this request");
    serve_cmd->add_option("--provider", serve_opts.provider, "scripted | replay | http")
        ->check(CLI::IsMember({"scripted", "replay", "http"}));
    serve_cmd->add_option("--fixtures", serve_opts.fixtures, "Replay fixture directory");
    serve_cmd->add_option("--model", serve_opts.model, "Model name for the http provider");
    serve_cmd->add_option("--base-url", serve_opts.base_url, "Chat-completions base URL");
    serve_cmd->add_option("--max-iters", serve_opts.max_iters, "Iteration cap")->check(CLI::PositiveNumber);

    std::string metrics_a, metrics_b, metrics_transcript;
    std::vector<double> weights;
    auto* metrics_cmd = app.add_subcommand("metrics", "Compare two scenes, or report per-iteration metrics of a transcript");
    metrics_cmd->add_option("--a", metrics_a, "First scene.json")->check(CLI::ExistingFile);
    metrics_cmd->add_option("--b", metrics_b, "Second scene.json")->check(CLI::ExistingFile);
    metrics_cmd->add_option("--transcript", metrics_transcript, "transcript.jsonl")->check(CLI::ExistingFile);
    metrics_cmd->add_option("--weights", weights, "Similarity weights: primitive transform material")->expected(3);

    std::string render_in, render_out;
    int width = 512, height = 512;
    double azimuth = Camera{}.azimuth_deg, elevation = Camera{}.elevation_deg;
    auto* render_cmd = app.add_subcommand("render", "Render a scene.json to a PPM image");
    render_cmd->add_option("scene", render_in, "scene.json")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--out", render_out, "Output .ppm")->required();
    render_cmd->add_option("--width", width, "Width in pixels")->check(CLI::Range(kMinImageSize, kMaxImageSize));
    render_cmd->add_option("--height", height, "Height in pixels")->check(CLI::Range(kMinImageSize, kMaxImageSize));
    render_cmd->add_option("--azimuth", azimuth, "Camera azimuth in degrees");
    render_cmd->add_option("--elevation", elevation, "Camera elevation in degrees");

    std::string replay_in, replay_out;
    auto* replay_cmd = app.add_subcommand("replay", "Re-execute a transcript's tool calls and check the final scene");
    replay_cmd->add_option("transcript", replay_in, "transcript.jsonl")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--out", replay_out, "Write the replayed scene.json here");

    std::string export_in, export_out, export_format = "obj";
    auto* export_cmd = app.add_subcommand("export", "Export the visible meshes of a scene.json");
    export_cmd->add_option("scene", export_in, "scene.json")->required()->check(CLI::ExistingFile);
    export_cmd->add_option("--format", export_format, "Output format")->check(CLI::IsMember({"obj"}));
    export_cmd->add_option("--out", export_out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "comodel: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*run_cmd) return do_run(run, *run_cmd, out);
        if (*serve_cmd) return do_serve(serve_host, serve_port, line_port, serve_task, serve_opts, out);
        if (*metrics_cmd) return do_metrics(metrics_a, metrics_b, metrics_transcript, weights, out);
        if (*render_cmd) {
            const Scene scene = load_scene(render_in);
            Camera cam = default_camera(scene);
            cam.azimuth_deg = azimuth;
            cam.elevation_deg = elevation;
            write_file(render_out, encode_ppm(render(scene, cam, width, height)));
            return kExitOk;
        }
        if (*replay_cmd) return do_replay(replay_in, replay_out, out);
        if (*export_cmd) {
            const std::string obj = to_obj(load_scene(export_in));
            if (export_out.empty()) out << obj;
            else write_file(export_out, obj);
            return kExitOk;
        }
    } catch (const Failure& e) {
        err << "comodel: " << e.what() << "\n";
        return e.exit_code;
    } catch (const std::exception& e) {
        err << "comodel: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace comodel::cli
