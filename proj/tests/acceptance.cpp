// Acceptance runner: one PASS/FAIL line per primary criterion, each with a pinned time limit.

#include "comodel/cli.hpp"
#include "comodel/digest.hpp"
#include "comodel/dsl.hpp"
#include "comodel/metrics.hpp"
#include "comodel/orchestrator.hpp"
#include "comodel/render.hpp"
#include "comodel/rpc_server.hpp"
#include "comodel/sync_hub.hpp"
#include "comodel/sync_server.hpp"
#include "golden.hpp"
#include "oracles.hpp"
#include "workload.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <regex>
#include <thread>

using namespace comodel;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kTable = "Create a low-poly square dining table with four legs.";

// Collects the first few failed expectations of one criterion.
struct Check {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok && failures.size() < 5) failures.push_back(what);
    }
};

struct Criterion {
    std::string name;
    double limit_seconds;
    std::function<void(Check&)> body;
};

Scene table_scene() {
    Scene s;
    dsl::execute(s, dsl::parse(oracle::read_file(oracle::data_path("table.dsl"))));
    return s;
}

std::string prompt_text(const agent::Event& e) {
    std::string out;
    for (const auto& m : e.payload["prompt"]) out += m["content"].get<std::string>() + "\n";
    return out;
}

std::size_t count_kind(const agent::Transcript& t, agent::EventKind kind) {
    std::size_t n = 0;
    for (const auto& e : t.events()) n += e.kind == kind;
    return n;
}

std::vector<const agent::Event*> of_kind(const agent::Transcript& t, agent::EventKind kind) {
    std::vector<const agent::Event*> out;
    for (const auto& e : t.events()) {
        if (e.kind == kind) out.push_back(&e);
    }
    return out;
}

std::string fixed_clock() { return "2026-01-01T00:00:00.000Z"; }

int cli_run(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "comodel");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str() + err.str();
    return code;
}

// ---------------------------------------------------------------------------------------------

void mesh_closed_forms(Check& c) {
    oracle::Rng rng(1);
    for (int kind = 0; kind < oracle::kKindCount; ++kind) {
        for (int draw = 0; draw < 200; ++draw) {
            PrimitiveSpec spec;
            spec.shape = oracle::random_shape(rng, kind);
            if (draw % 4 == 0) spec.array = ArrayModifier{oracle::uniform_int(rng, 1, 6), oracle::random_vec(rng, -1, 1)};
            const long long got = static_cast<long long>(generate_mesh(spec).vertex_count());
            c.expect(got == oracle::expected_vertices(spec),
                     std::string(kind_name(spec.shape)) + " draw " + std::to_string(draw) + ": " + std::to_string(got) +
                         " vs " + std::to_string(oracle::expected_vertices(spec)));
        }
    }
}

void topology(Check& c) {
    oracle::Rng rng(1);
    for (int kind = 0; kind < oracle::kKindCount; ++kind) {
        if (kind == 1) continue;  // the plane is open
        const long long expected = kind == 6 ? 0 : 2;
        for (int draw = 0; draw < 200; ++draw) {
            const PrimitiveSpec spec{oracle::random_shape(rng, kind)};
            const long long chi = oracle::euler_characteristic(generate_mesh(spec));
            c.expect(chi == expected, std::string(kind_name(spec.shape)) + " chi " + std::to_string(chi));
        }
    }
}

void dsl_round_trip(Check& c) {
    const dsl::Script a = dsl::parse(oracle::read_file(oracle::data_path("corpus.dsl")));
    c.expect(a.statements.size() == 50, "corpus has " + std::to_string(a.statements.size()) + " statements");
    const dsl::Script b = dsl::parse(dsl::format(a));
    c.expect(dsl::same_structure(a, b), "format/parse changed the corpus structure");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(oracle::data_path("malformed"))) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    c.expect(files.size() == 10, "expected 10 malformed fixtures");
    for (const auto& f : files) {
        const std::string text = oracle::read_file(f.string());
        std::smatch m;
        if (!std::regex_search(text, m, std::regex(R"(# expect (\d+):(\d+))"))) {
            c.expect(false, f.filename().string() + " has no expectation line");
            continue;
        }
        try {
            dsl::parse(text);
            c.expect(false, f.filename().string() + " parsed");
        } catch (const dsl::ParseError& e) {
            c.expect(e.line() == std::stoi(m[1]) && e.column() == std::stoi(m[2]),
                     f.filename().string() + " reported " + std::to_string(e.line()) + ":" + std::to_string(e.column()));
        }
    }
}

void idempotency(Check& c) {
    const dsl::Script script = dsl::parse(oracle::read_file(oracle::data_path("table.dsl")));
    Scene s;
    dsl::execute(s, script);
    Scene once = s;
    dsl::execute(s, script);
    once.revision = s.revision;
    c.expect(snapshot_text(once) == snapshot_text(s), "second run changed the scene");

    const std::size_t total = s.objects.size();
    const int visible = metrics::geometry_count(s);
    const double x = s.find("Leg_1")->transform.translation.x();
    const dsl::ExecReport r = dsl::execute(s, dsl::parse("hide name=Leg_1"));
    c.expect(r.ok(), "hide failed");
    c.expect(s.objects.size() == total, "hide changed the object count");
    c.expect(s.find("Leg_1")->transform.translation.x() == x + 1000.0, "hide did not shift x by 1000");
    c.expect(metrics::geometry_count(s) == visible - 1, "geometry_count did not drop by one");
}

void end_to_end(Check& c) {
    SceneHost host;
    tools::ToolServer tools(host);
    auto session = agent::start_session(kTable, {}, tools, fixed_clock);
    const agent::Transcript& t = session->run_to_completion();
    const Scene scene = host.snapshot();
    c.expect(session->outcome() == agent::Outcome::success, "outcome " + std::string(agent::to_string(session->outcome())));
    c.expect(session->iteration() <= 3, "took " + std::to_string(session->iteration()) + " iterations");
    c.expect(metrics::geometry_count(scene) == 5, "geometry_count " + std::to_string(metrics::geometry_count(scene)));
    c.expect(metrics::vertex_count(scene) == 264, "vertex_count " + std::to_string(metrics::vertex_count(scene)));
    c.expect(session->plan() && session->plan()->steps.back().tool == "get_viewport_screenshot",
             "final plan step is not a screenshot");
    c.expect(count_kind(t, agent::EventKind::metrics_snapshot) == static_cast<std::size_t>(session->iteration()),
             "metrics_snapshot count differs from iterations");
}

void reflection(Check& c) {
    SceneHost host;
    tools::ToolServer tools(host);
    agent::SessionConfig config;
    config.provider.scripted.fail_critiques = {1};
    auto session = agent::start_session(kTable, config, tools, fixed_clock);
    const agent::Transcript& t = session->run_to_completion();
    const auto plans = of_kind(t, agent::EventKind::plan_created);
    c.expect(plans.size() == 2, std::to_string(plans.size()) + " plan phases");
    const std::string issue = config.provider.scripted.forced_issue;
    c.expect(plans.size() >= 2 && prompt_text(*plans[1]).find(issue) != std::string::npos,
             "iteration 2 planner prompt lacks the critique issue");
    c.expect(session->outcome() == agent::Outcome::success, "session did not succeed");
}

void human_in_the_loop(Check& c) {
    {
        SceneHost host;
        tools::ToolServer tools(host);
        auto session = agent::start_session(kTable, {}, tools, fixed_clock);
        while (session->phase() != agent::Phase::acting && session->phase() != agent::Phase::done) session->step();
        session->step();
        session->incorporate_human({agent::HumanKind::feedback, "make the legs thicker"});
        const agent::Transcript& t = session->run_to_completion();
        const auto plans = of_kind(t, agent::EventKind::plan_created);
        c.expect(plans.size() == 2, "feedback did not force a second planning phase");
        c.expect(plans.size() >= 2 && prompt_text(*plans[1]).find("make the legs thicker") != std::string::npos,
                 "replanning prompt lacks the feedback");
    }
    {
        SceneHost host;
        tools::ToolServer tools(host);
        agent::SessionConfig config;
        config.review_mode = agent::ReviewMode::gated;
        config.provider.scripted.fail_critiques = {1};
        auto session = agent::start_session(kTable, config, tools, fixed_clock);
        while (session->phase() != agent::Phase::review && session->phase() != agent::Phase::done) session->step();
        c.expect(session->phase() == agent::Phase::review, "never reached the review gate");
        const std::uint64_t revision = host.revision();
        const std::size_t before = session->transcript().size();
        session->inbox().push({agent::HumanKind::stop, ""});
        session->run_to_completion();
        c.expect(session->outcome() == agent::Outcome::human_stop, "stop did not end the session");
        c.expect(host.revision() == revision, "scene changed after stop");
        const auto& ev = session->transcript().events();
        for (std::size_t i = before; i < ev.size(); ++i) {
            c.expect(ev[i].kind != agent::EventKind::step_started && ev[i].kind != agent::EventKind::step_finished,
                     "tool call after stop");
        }
    }
}

void metrics_criterion(Check& c) {
    const Scene t = table_scene();
    c.expect(metrics::scene_similarity(t, t) == 1.0, "similarity(s,s) != 1");
    Scene other;
    upsert_object(other, "Chair", {Cube{}}, Transform{});
    c.expect(metrics::scene_similarity(t, other) == 0.0, "disjoint scenes not 0");
    Scene recolored = t;
    MaterialSpec blue;
    blue.base_color = Vec3(0.1, 0.2, 0.9);
    upsert_object(recolored, "Table_Top", t.find("Table_Top")->primitive, t.find("Table_Top")->transform, blue);
    const double v = metrics::scene_similarity(t, recolored);
    c.expect(std::abs(v - 0.96) <= 1e-12, "recolored top similarity " + std::to_string(v));
    oracle::Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        const Scene a = oracle::random_scene(rng, 10);
        const Scene b = oracle::random_scene(rng, 10);
        c.expect(metrics::scene_similarity(a, b) == metrics::scene_similarity(b, a), "asymmetric pair " + std::to_string(i));
    }
}

namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

class WsClient {
public:
    WsClient(unsigned short port, const std::string& path) : ws_(io_) {
        ws_.next_layer().connect({boost::asio::ip::make_address("127.0.0.1"), port});
        ws_.handshake("127.0.0.1:" + std::to_string(port), path);
    }
    json read() {
        beast::flat_buffer b;
        ws_.read(b);
        return json::parse(beast::buffers_to_string(b.data()));
    }
    void close() { ws_.close(websocket::close_code::normal); }

private:
    boost::asio::io_context io_;
    websocket::stream<tcp::socket> ws_;
};

void sync_oracle(Check& c) {
    SceneHost host;
    tools::ToolServer tools(host);
    sync::SyncHub hub(host, tools);
    oracle::Rng rng(5);
    workload::apply_successful(tools, rng, 5);
    const auto id = hub.connect();
    sync::SceneMirror mirror;
    for (const auto& f : hub.drain(id)) mirror.apply(f);
    workload::apply_successful(tools, rng, 100);
    for (const auto& f : hub.drain(id)) mirror.apply(f);
    c.expect(snapshot_text(mirror.scene()) == snapshot_text(host.snapshot()), "mirror differs from the direct snapshot");
    hub.disconnect(id);

    rpc::Endpoint ep(tools);
    sync::WsServer server(hub, ep);
    const unsigned short port = server.start("127.0.0.1", 0, 2);
    WsClient a(port, "/sync"), b(port, "/sync");
    a.read();
    b.read();
    std::thread writer([&] {
        oracle::Rng wrng(6);
        workload::apply_successful(tools, wrng, 100);
    });
    auto revisions = [](WsClient& client) {
        std::vector<std::uint64_t> out;
        while (out.size() < 100) {
            const json f = client.read();
            if (f["kind"] == "scene_delta") out.push_back(f["payload"]["revision"]);
        }
        return out;
    };
    const auto ra = revisions(a);
    const auto rb = revisions(b);
    writer.join();
    c.expect(ra == rb, "clients saw different revision sequences");
    a.close();
    b.close();
    server.stop();
}

void render_determinism(Check& c) {
    const Scene s = table_scene();
    const std::string first = sha256_hex(encode_ppm(render(s, default_camera(s), 256, 256)));
    const std::string second = sha256_hex(encode_ppm(render(s, default_camera(s), 256, 256)));
    c.expect(first == second, "two renders differ");
    c.expect(first == kTableGoldenSha256, "golden mismatch: " + first);
    const Image empty = render(Scene{}, default_camera(Scene{}), 256, 256);
    bool uniform = true;
    for (std::size_t i = 0; i < empty.pixels.size(); ++i) uniform = uniform && empty.pixels[i] == 230;
    c.expect(uniform, "empty scene is not uniform (230,230,230)");
}

void replay_fidelity(Check& c) {
    const fs::path dir = fs::temp_directory_path() / ("comodel_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    std::string text;
    const int run = cli_run({"run", "--task", kTable, "--fail-critique", "1", "--out-dir", dir.string()}, &text);
    c.expect(run == 0, "run exited " + std::to_string(run) + ": " + text);
    const fs::path transcript = dir / "transcript.jsonl";
    const fs::path replayed = dir / "replayed.json";
    const int ok = cli_run({"replay", transcript.string(), "--out", replayed.string()}, &text);
    c.expect(ok == 0, "replay exited " + std::to_string(ok) + ": " + text);
    c.expect(fs::exists(replayed) && oracle::read_file(replayed.string()) == oracle::read_file((dir / "scene.json").string()),
             "replayed scene differs from scene.json");

    // Corrupt the recorded result of one tool call.
    auto events = agent::parse_jsonl(oracle::read_file(transcript.string()));
    bool corrupted = false;
    for (auto& e : events) {
        if (corrupted || e["kind"] != "step_finished") continue;
        for (auto& call : e["payload"]["calls"]) {
            if (!corrupted && call.contains("revision")) {
                call["revision"] = call["revision"].get<std::uint64_t>() + 7;
                corrupted = true;
            }
        }
    }
    c.expect(corrupted, "no tool result to corrupt");
    const fs::path bad = dir / "corrupted.jsonl";
    {
        std::ofstream out(bad, std::ios::binary);
        for (const auto& e : events) out << e.dump() << "\n";
    }
    const int diverged = cli_run({"replay", bad.string()}, &text);
    c.expect(diverged == 3, "corrupted replay exited " + std::to_string(diverged));
    fs::remove_all(dir);
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"mesh closed forms", 5, mesh_closed_forms},
        {"topology", 5, topology},
        {"dsl round trip and error positions", 1, dsl_round_trip},
        {"idempotency and hide-not-delete", 1, idempotency},
        {"end-to-end scripted table session", 5, end_to_end},
        {"reflection loop", 5, reflection},
        {"human in the loop", 5, human_in_the_loop},
        {"metrics", 5, metrics_criterion},
        {"sync oracle", 10, sync_oracle},
        {"render determinism", 5, render_determinism},
        {"replay fidelity", 5, replay_fidelity},
    };
    int failed = 0;
    for (const auto& criterion : criteria) {
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.body(check);
        } catch (const std::exception& e) {
            check.failures.push_back(std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (seconds > criterion.limit_seconds) {
            check.failures.push_back("took " + std::to_string(seconds) + " s");
        }
        const bool pass = check.failures.empty();
        failed += !pass;
        char timing[64];
        std::snprintf(timing, sizeof timing, "%.3f s / %.0f s", seconds, criterion.limit_seconds);
        std::cout << "[PRIMARY] " << (pass ? "PASS" : "FAIL") << " " << criterion.name << " (" << timing << ")";
        for (const auto& f : check.failures) std::cout << "; " << f;
        std::cout << "\n";
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " primary criteria passed\n";
    return failed == 0 ? 0 : 1;
}
