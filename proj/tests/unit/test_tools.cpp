#include "comodel/rpc_server.hpp"
#include "comodel/digest.hpp"
#include "comodel/render.hpp"
#include "comodel/tool_protocol.hpp"
#include "oracles.hpp"

#include <boost/asio.hpp>
#include <doctest.h>

#include <set>
#include <thread>

using namespace comodel;
using namespace comodel::tools;
using json = nlohmann::json;

namespace {

std::set<std::string> names_of(const std::vector<ToolDescriptor>& tools) {
    std::set<std::string> out;
    for (const auto& t : tools) out.insert(t.name);
    return out;
}

ToolResult call(SceneHost& host, const std::string& tool, json params, const ToolsetConfig& config = {}) {
    return call_tool(host, {"c1", tool, std::move(params)}, config);
}

std::string table_code() { return oracle::read_file(oracle::data_path("table.dsl")); }

}  // namespace

TEST_SUITE("tools") {

TEST_CASE("registry and toolset filtering") {
    const std::set<std::string> all = names_of(list_tools({}));
    CHECK(all == std::set<std::string>{"create_primitive", "set_material", "transform_object", "hide_object",
                                       "duplicate_object", "execute_command", "get_scene_info",
                                       "get_object_info", "get_viewport_screenshot"});
    const auto ordered = list_tools({});
    for (std::size_t i = 1; i < ordered.size(); ++i) {
        const auto& a = ordered[i - 1];
        const auto& b = ordered[i];
        CHECK((a.toolset < b.toolset || (a.toolset == b.toolset && a.name < b.name)));
    }
    CHECK(find_tool("create_primitive")->toolset == Toolset::modeling);
    CHECK(find_tool("set_material")->toolset == Toolset::refinement);
    CHECK(find_tool("get_object_info")->toolset == Toolset::inspection);

    const auto no_modeling = names_of(list_tools(ToolsetConfig::with({Toolset::refinement, Toolset::inspection})));
    CHECK(no_modeling.count("create_primitive") == 0);
    CHECK(no_modeling.count("get_scene_info") == 1);
    // Disabling a toolset removes exactly its own tools.
    std::set<std::string> diff;
    std::set_difference(all.begin(), all.end(), no_modeling.begin(), no_modeling.end(), std::inserter(diff, diff.end()));
    CHECK(diff == std::set<std::string>{"create_primitive", "duplicate_object", "execute_command"});

    CHECK_THROWS_AS(ToolsetConfig::with({Toolset::modeling}), ConfigError);
    CHECK_THROWS_AS(toolset_config_from_json(json::array({"modeling", "refinement"})), ConfigError);
    CHECK_THROWS_AS(toolset_config_from_json(json::array({"inspection", "magic"})), ConfigError);
    CHECK(toolset_config_from_json(json::array({"inspection"})).enabled == std::set<Toolset>{Toolset::inspection});

    SceneHost host;
    ToolServer server(host);
    CHECK_THROWS_AS(server.set_config(ToolsetConfig{{Toolset::modeling}}), ConfigError);
}

TEST_CASE("every required parameter is described") {
    const std::string text = describe_tools(list_tools({}));
    for (const auto& t : registry()) {
        CHECK(text.find(t.name) != std::string::npos);
        CHECK_FALSE(t.description.empty());
        const json doc = to_json(t);
        CHECK(doc["name"] == t.name);
    }
}

TEST_CASE("call_tool documented examples") {
    SceneHost host;
    const ToolResult exec = call(host, "execute_command", {{"code", table_code()}});
    CHECK(exec.ok);
    CHECK(exec.payload["executed"] == 10);
    CHECK(exec.id == "c1");

    const ToolResult info = call(host, "get_scene_info", json::object());
    CHECK(info.ok);
    CHECK(info.payload["visible_count"] == 5);
    CHECK(info.payload["total_vertex_count"] == 264);

    const ToolResult missing = call(host, "create_primitive", {{"kind", "cube"}});
    CHECK_FALSE(missing.ok);
    REQUIRE(missing.error);
    CHECK(missing.error->code == "invalid_params");
    CHECK(missing.error->message.find("name") != std::string::npos);

    CHECK(call(host, "summon_dragon", json::object()).error->code == "unknown_tool");
    const auto disabled = call(host, "create_primitive", {{"name", "A"}, {"kind", "cube"}},
                               ToolsetConfig::with({Toolset::inspection}));
    CHECK(disabled.error->code == "tool_disabled");
}

TEST_CASE("mutating tools return name and revision") {
    SceneHost host;
    auto r = call(host, "create_primitive",
                  {{"name", "Leg_1"}, {"kind", "cylinder"}, {"segments", 32}, {"radius", 0.06}, {"depth", 0.9},
                   {"location", {0.85, 0.85, 0.45}}, {"color", {0.5, 0.3, 0.2}}});
    CHECK(r.ok);
    CHECK(r.payload == json{{"name", "Leg_1"}, {"revision", 1}});
    r = call(host, "duplicate_object", {{"name", "Leg_1"}, {"new_name", "Leg_2"}, {"offset", {-1.7, 0, 0}}});
    CHECK(r.payload == json{{"name", "Leg_2"}, {"revision", 2}});
    r = call(host, "set_material", {{"name", "Leg_2"}, {"color", {1, 0, 0}}, {"label", "red"}});
    CHECK(r.payload["revision"] == 3);
    r = call(host, "transform_object", {{"name", "Leg_2"}, {"rotation", {0, 0, 90}}});
    CHECK(r.ok);
    CHECK(host.snapshot().find("Leg_2")->transform.rotation_euler.z() == doctest::Approx(kPi / 2));
    r = call(host, "hide_object", {{"name", "Leg_2"}});
    CHECK(r.payload["revision"] == 5);
    const auto info = call(host, "get_object_info", {{"name", "Leg_2"}});
    CHECK(info.payload["hidden"] == true);
    CHECK(info.payload["vertex_count"] == 64);
    CHECK(call(host, "get_object_info", {{"name", "Ghost"}}).error->code == "unknown_object");
    CHECK(call(host, "hide_object", {{"name", "Ghost"}}).error->code == "unknown_object");
    CHECK(host.revision() == 5);
}

TEST_CASE("execute_command reports parse and statement failures") {
    SceneHost host;
    auto r = call(host, "execute_command", {{"code", "create kind=cube at=(0,0"}});
    CHECK(r.error->code == "parse_error");
    r = call(host, "execute_command", {{"code", "create kind=cube name=A\nmodify name=Ghost size=3"}});
    CHECK_FALSE(r.ok);
    CHECK(r.error->code == "unknown_object");
    CHECK(r.payload["executed"] == 1);
    CHECK(r.payload["failed_at"]["statement_index"] == 1);
}

TEST_CASE("screenshot payload") {
    SceneHost host;
    call(host, "execute_command", {{"code", table_code()}});
    const auto r = call(host, "get_viewport_screenshot", {{"width", 64}, {"height", 48}});
    REQUIRE(r.ok);
    CHECK(r.payload["format"] == "ppm");
    CHECK(r.payload["width"] == 64);
    const std::string ppm = base64_decode(r.payload["data_base64"].get<std::string>());
    CHECK(r.payload["content_hash"] == sha256_hex(ppm));
    const Image img = decode_ppm(ppm);
    CHECK(img.width == 64);
    CHECK(img.height == 48);
    CHECK(call(host, "get_viewport_screenshot", {{"width", 8}}).error->code == "invalid_params");
}

TEST_CASE("call_tool is total under fuzzed parameters") {
    SceneHost host;
    call(host, "execute_command", {{"code", table_code()}});
    oracle::Rng rng(606);
    const std::vector<json> values = {nullptr, 1, -1e300, "Table_Top", "", json::array({1, 2}), json::array({1, 2, 3}),
                                      json::array({"a", "b", "c"}), json::object(), true, "x@y", 1e-320,
                                      json::array({0, 0, 0})};
    std::vector<std::string> keys;
    for (const auto& t : registry()) {
        for (const auto& p : t.params_schema) keys.push_back(p.key);
    }
    keys.push_back("unexpected");
    for (int i = 0; i < 2000; ++i) {
        const auto& tool = registry()[static_cast<std::size_t>(oracle::uniform_int(rng, 0, static_cast<int>(registry().size()) - 1))];
        json params = json::object();
        const int n = oracle::uniform_int(rng, 0, 5);
        for (int k = 0; k < n; ++k) {
            params[keys[static_cast<std::size_t>(oracle::uniform_int(rng, 0, static_cast<int>(keys.size()) - 1))]] =
                values[static_cast<std::size_t>(oracle::uniform_int(rng, 0, static_cast<int>(values.size()) - 1))];
        }
        ToolResult r;
        CHECK_NOTHROW(r = call_tool(host, {"f" + std::to_string(i), tool.name, params}, {}));
        CHECK(r.id == "f" + std::to_string(i));
        CHECK(r.ok == !r.error.has_value());
        if (r.error) CHECK(r.error->code != "internal_error");
    }
    CHECK(host.snapshot().objects.size() >= 5);
}

TEST_CASE("tool results serialize and parse back") {
    ToolResult r{"x", false, json::object(), ToolError{"unknown_object", "nope"}};
    const ToolResult back = tool_result_from_json(to_json(r));
    CHECK(back.id == "x");
    CHECK_FALSE(back.ok);
    CHECK(back.error->code == "unknown_object");
    CHECK(to_json(r)["status"] == "error");
}

}

TEST_SUITE("rpc") {

TEST_CASE("endpoint methods and errors") {
    SceneHost host;
    ToolServer server(host);
    rpc::Endpoint ep(server);
    json r = json::parse(ep.handle("{not json"));
    CHECK(r["error"]["code"] == rpc::kParseError);
    CHECK(r["id"].is_null());

    r = json::parse(ep.handle(R"({"jsonrpc":"2.0","id":1,"method":"tools/list"})"));
    json expected = json::array();
    for (const auto& t : list_tools({})) expected.push_back(to_json(t));
    CHECK(r["result"]["tools"] == expected);
    CHECK(r["id"] == 1);

    r = json::parse(ep.handle(R"({"jsonrpc":"2.0","id":"a","method":"tools/call","params":{"name":"get_scene_info"}})"));
    CHECK(r["result"]["status"] == "ok");
    CHECK(r["result"]["id"] == "a");
    CHECK(r["result"]["payload"]["revision"] == 0);

    r = json::parse(ep.handle(R"({"jsonrpc":"2.0","id":2,"method":"tools/remove"})"));
    CHECK(r["error"]["code"] == rpc::kMethodNotFound);
    r = json::parse(ep.handle(R"({"id":2,"method":"tools/list"})"));
    CHECK(r["error"]["code"] == rpc::kInvalidRequest);
    r = json::parse(ep.handle(R"({"jsonrpc":"2.0","id":3,"method":"tools/call","params":{}})"));
    CHECK(r["error"]["code"] == rpc::kInvalidParams);
    CHECK(ep.handle(R"({"jsonrpc":"2.0","method":"tools/list"})").empty());
}

TEST_CASE("line server: concurrent clients are linearized") {
    SceneHost host;
    ToolServer server(host);
    rpc::Endpoint ep(server);
    rpc::LineServer line(ep);
    const unsigned short port = line.start("127.0.0.1", 0, 2);

    constexpr int kPerClient = 100;
    std::vector<std::vector<std::uint64_t>> revisions(2);
    std::vector<int> mismatched(2, 0);
    auto client = [&](int c) {
        boost::asio::io_context io;
        boost::asio::ip::tcp::socket sock(io);
        sock.connect({boost::asio::ip::make_address("127.0.0.1"), port});
        boost::asio::streambuf buf;
        for (int i = 0; i < kPerClient; ++i) {
            const std::string id = "c" + std::to_string(c) + "-" + std::to_string(i);
            const std::string name = "Obj_" + std::to_string((i * 7 + c * 3) % 60);
            const json req = {{"jsonrpc", "2.0"}, {"id", id}, {"method", "tools/call"},
                              {"params", {{"name", "create_primitive"}, {"arguments", {{"name", name}, {"kind", "cube"}}}}}};
            boost::asio::write(sock, boost::asio::buffer(req.dump() + "\n"));
            boost::asio::read_until(sock, buf, '\n');
            std::istream in(&buf);
            std::string line_text;
            std::getline(in, line_text);
            const json resp = json::parse(line_text);
            if (resp["id"] != id || resp["result"]["id"] != id) ++mismatched[static_cast<std::size_t>(c)];
            revisions[static_cast<std::size_t>(c)].push_back(resp["result"]["payload"]["revision"].get<std::uint64_t>());
        }
    };
    std::thread a(client, 0), b(client, 1);
    a.join();
    b.join();
    line.stop();

    CHECK(mismatched == std::vector<int>{0, 0});
    // Sequential oracle: the same names applied one after another.
    std::set<std::string> distinct;
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < kPerClient; ++i) distinct.insert("Obj_" + std::to_string((i * 7 + c * 3) % 60));
    }
    CHECK(host.snapshot().objects.size() == distinct.size());
    std::vector<std::uint64_t> all;
    for (const auto& r : revisions) {
        CHECK(std::is_sorted(r.begin(), r.end()));
        all.insert(all.end(), r.begin(), r.end());
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i + 1);
}

TEST_CASE("line server answers malformed lines with a parse error") {
    SceneHost host;
    ToolServer server(host);
    rpc::Endpoint ep(server);
    rpc::LineServer line(ep);
    const unsigned short port = line.start("127.0.0.1", 0, 1);
    boost::asio::io_context io;
    boost::asio::ip::tcp::socket sock(io);
    sock.connect({boost::asio::ip::make_address("127.0.0.1"), port});
    boost::asio::write(sock, boost::asio::buffer(std::string("{{{\n")));
    boost::asio::streambuf buf;
    boost::asio::read_until(sock, buf, '\n');
    std::istream in(&buf);
    std::string text;
    std::getline(in, text);
    CHECK(json::parse(text)["error"]["code"] == rpc::kParseError);
    line.stop();
}

TEST_CASE("binding a taken port fails") {
    SceneHost host;
    ToolServer server(host);
    rpc::Endpoint ep(server);
    rpc::LineServer first(ep), second(ep);
    const unsigned short port = first.start("127.0.0.1", 0, 1);
    CHECK_THROWS_AS(second.start("127.0.0.1", port, 1), rpc::BindError);
    first.stop();
}

}
