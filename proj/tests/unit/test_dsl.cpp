#include "comodel/dsl.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <regex>

using namespace comodel;
using namespace comodel::dsl;

namespace {

struct Expectation {
    std::string file;
    int line;
    int column;
};

std::vector<Expectation> malformed_fixtures() {
    std::vector<Expectation> out;
    for (const auto& entry : std::filesystem::directory_iterator(oracle::data_path("malformed"))) {
        const std::string text = oracle::read_file(entry.path().string());
        std::smatch m;
        if (!std::regex_search(text, m, std::regex(R"(# expect (\d+):(\d+))"))) continue;
        out.push_back({entry.path().string(), std::stoi(m[1]), std::stoi(m[2])});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.file < b.file; });
    return out;
}

ParseError parse_error(std::string_view text) {
    try {
        parse(text);
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("expected a ParseError");
    return ParseError(0, 0, "", "");
}

Scene run(const std::string& text) {
    Scene s;
    const ExecReport r = execute(s, parse(text));
    REQUIRE(r.ok());
    return s;
}

}  // namespace

TEST_SUITE("dsl") {

TEST_CASE("parse examples") {
    const Script s = parse("create kind=cube name=Top size=2 at=(0,0,1.1)");
    REQUIRE(s.statements.size() == 1);
    CHECK(s.statements[0].verb == "create");
    REQUIRE(s.statements[0].args.size() == 4);
    CHECK(s.statements[0].args[0].key == "kind");
    CHECK(std::get<Ident>(s.statements[0].args[0].value).name == "cube");
    CHECK(std::get<double>(s.statements[0].args[2].value) == 2.0);
    CHECK(std::get<Vec3>(s.statements[0].args[3].value) == Vec3(0, 0, 1.1));
    CHECK(parse("").statements.empty());
    CHECK(parse("# only a comment\n\n   \n").statements.empty());
    const ParseError e = parse_error("create kind=cube at=(0,0");
    CHECK(e.line() == 1);
    CHECK(e.column() == 25);
    CHECK(e.found() == "end of line");
}

TEST_CASE("value types") {
    const Script s = parse("material name=\"A b\" flag=true other=false n=-1.5e2 v=( 1 , -2 , +3 ) id=wood");
    const Statement& st = s.statements[0];
    CHECK(std::get<std::string>(*st.find("name")) == "A b");
    CHECK(std::get<bool>(*st.find("flag")));
    CHECK_FALSE(std::get<bool>(*st.find("other")));
    CHECK(std::get<double>(*st.find("n")) == -150.0);
    CHECK(std::get<Vec3>(*st.find("v")) == Vec3(1, -2, 3));
    CHECK(std::get<Ident>(*st.find("id")).name == "wood");
}

TEST_CASE("source spans") {
    const Script s = parse("\n  hide name=A   # tail\ncreate kind=cube name=B\n");
    REQUIRE(s.source_spans.size() == 2);
    CHECK(s.source_spans[0] == SourceSpan{2, 3, 13});
    CHECK(s.source_spans[1] == SourceSpan{3, 1, 23});
}

TEST_CASE("format canonicalizes numbers") {
    CHECK(format(parse("create kind=cube size=1.10")) == "create kind=cube size=1.1\n");
    CHECK(format(Script{}).empty());
    CHECK(format(parse("hide name=\"a\\\"b\"")) == "hide name=\"a\\\"b\"\n");
    CHECK(format(parse("modify name=A at=(0.10,-0,2e1)")) == "modify name=A at=(0.1,-0,20)\n");
}

TEST_CASE("corpus round-trips through format") {
    const std::string text = oracle::read_file(oracle::data_path("corpus.dsl"));
    const Script a = parse(text);
    REQUIRE(a.statements.size() == 50);
    const std::string formatted = format(a);
    const Script b = parse(formatted);
    CHECK(same_structure(a, b));
    CHECK(format(b) == formatted);
}

TEST_CASE("the corpus executes cleanly") {
    Scene s;
    const ExecReport r = execute(s, parse(oracle::read_file(oracle::data_path("corpus.dsl"))));
    CHECK(r.ok());
    CHECK(r.executed == 50);
    CHECK(r.revision_after == 50);
    CHECK(s.find("Gem")->hidden == false);
    CHECK(s.find("Ball_2")->hidden);
    CHECK(s.find("Top_Copy")->hidden);
}

TEST_CASE("malformed fixtures report the exact first error") {
    const auto fixtures = malformed_fixtures();
    REQUIRE(fixtures.size() == 10);
    for (const auto& f : fixtures) {
        CAPTURE(f.file);
        const std::string text = oracle::read_file(f.file);
        const ParseError e = parse_error(text);
        CHECK(e.line() == f.line);
        CHECK(e.column() == f.column);
        // Every line before the error line parses on its own.
        std::size_t cut = 0;
        for (int i = 1; i < f.line; ++i) cut = text.find('\n', cut) + 1;
        CHECK_NOTHROW(parse(std::string_view(text).substr(0, cut)));
        // The error line, cut just before the reported column, fails no earlier than the cut.
        const std::size_t eol = text.find('\n', cut);
        const std::string line = text.substr(cut, eol - cut);
        const std::string prefix = line.substr(0, static_cast<std::size_t>(f.column - 1));
        try {
            parse(prefix);
        } catch (const ParseError& p) {
            CHECK(p.column() >= f.column - 1);
        }
    }
}

TEST_CASE("randomized round-trip property") {
    oracle::Rng rng(31337);
    const std::vector<std::string> keys = {"name", "kind", "size", "at", "color", "label", "flag"};
    for (int i = 0; i < 200; ++i) {
        Script s;
        const int n = oracle::uniform_int(rng, 0, 6);
        for (int k = 0; k < n; ++k) {
            Statement st;
            st.verb = std::string(verbs()[oracle::uniform_int(rng, 0, static_cast<int>(verbs().size()) - 1)]);
            std::vector<std::string> pool = keys;
            std::shuffle(pool.begin(), pool.end(), rng);
            const int nargs = oracle::uniform_int(rng, 1, 4);
            for (int a = 0; a < nargs; ++a) {
                ArgValue v;
                switch (oracle::uniform_int(rng, 0, 4)) {
                    case 0: v = oracle::uniform_real(rng, -1e6, 1e6); break;
                    case 1: v = Ident{"id_" + std::to_string(oracle::uniform_int(rng, 0, 9))}; break;
                    case 2: v = std::string("s \"q\" \\ # ") + std::to_string(a); break;
                    case 3: v = oracle::random_vec(rng, -1e-3, 1e-3); break;
                    default: v = oracle::uniform_int(rng, 0, 1) == 1; break;
                }
                st.args.push_back({pool[a], v});
            }
            s.statements.push_back(st);
        }
        const std::string text = format(s);
        const Script back = parse(text);
        CHECK(same_structure(s, back));
        CHECK(format(back) == text);
    }
}

TEST_CASE("table script executes ten statements") {
    Scene s;
    const ExecReport r = execute(s, parse(oracle::read_file(oracle::data_path("table.dsl"))));
    CHECK(r.executed == 10);
    CHECK(r.ok());
    CHECK(r.revision_before == 0);
    CHECK(r.revision_after == 10);
    CHECK(get_scene_info(s).visible_count == 5);
}

TEST_CASE("executing the table script twice is idempotent up to revision") {
    const std::string text = oracle::read_file(oracle::data_path("table.dsl"));
    Scene s;
    execute(s, parse(text));
    Scene once = s;
    execute(s, parse(text));
    CHECK(s.revision == 20);
    once.revision = s.revision;
    CHECK(snapshot_text(once) == snapshot_text(s));
}

TEST_CASE("modify of a missing object reports unknown_object") {
    Scene s;
    const ExecReport r = execute(s, parse("modify name=Ghost size=3"));
    CHECK(r.executed == 0);
    REQUIRE(r.failed_at.has_value());
    CHECK(r.failed_at->first == 0);
    CHECK(r.failed_at->second.code == "unknown_object");
    CHECK(s.objects.empty());
    CHECK(s.revision == 0);
}

TEST_CASE("transform rotates in degrees") {
    Scene s = run("create kind=cube name=Top size=2\ntransform name=Top rotate_z=45");
    CHECK(s.find("Top")->transform.rotation_euler.z() == doctest::Approx(0.7853981633974483).epsilon(1e-15));
    Scene t = run("create kind=cube name=A at=(1,2,3) rotate=(0,0,10) scale=(2,2,2)\n"
                  "transform name=A translate=(1,1,1) rotate_z=20 scale=(0.5,1,2)");
    const Transform& tr = t.find("A")->transform;
    CHECK(tr.translation == Vec3(2, 3, 4));
    CHECK(tr.rotation_euler.z() == doctest::Approx(30 * kPi / 180).epsilon(1e-12));
    CHECK(tr.scale == Vec3(1, 2, 4));
}

TEST_CASE("modify patches only the given arguments") {
    Scene s = run("create kind=cylinder name=Leg segments=32 radius=0.06 depth=0.9 at=(1,0,0) color=(0.1,0.2,0.3)\n"
                  "modify name=Leg radius=0.09");
    const SceneObject& leg = *s.find("Leg");
    const auto& c = std::get<Cylinder>(leg.primitive.shape);
    CHECK(c.radius == 0.09);
    CHECK(c.segments == 32);
    CHECK(c.depth == 0.9);
    CHECK(leg.transform.translation == Vec3(1, 0, 0));
    CHECK(leg.material.base_color == Vec3(0.1, 0.2, 0.3));
}

TEST_CASE("modify to a new kind starts from that kind's defaults") {
    Scene s = run("create kind=cube name=A size=3\nmodify name=A kind=cylinder radius=0.5");
    const auto& c = std::get<Cylinder>(s.find("A")->primitive.shape);
    CHECK(c.radius == 0.5);
    CHECK(c.segments == Cylinder{}.segments);
}

TEST_CASE("hide, show and duplicate") {
    Scene s = run("create kind=cube name=A at=(1,0,0)\nhide name=A\nduplicate name=A new_name=B offset=(0,2,0)");
    CHECK(s.find("A")->transform.translation.x() == 1001);
    const SceneObject& b = *s.find("B");
    CHECK(b.transform.translation.y() == 2);
    s = run("create kind=cube name=A at=(1,0,0)\nhide name=A\nshow name=A");
    CHECK(s.find("A")->transform.translation.x() == 1);
    CHECK_FALSE(s.find("A")->hidden);
}

TEST_CASE("execution stops at the first failure without rollback") {
    Scene s;
    const ExecReport r = execute(s, parse("create kind=cube name=A\ncreate name=B\ncreate kind=cube name=C"));
    CHECK(r.executed == 1);
    REQUIRE(r.failed_at);
    CHECK(r.failed_at->first == 1);
    CHECK(r.failed_at->second.code == "missing_arg");
    CHECK(r.failed_at->second.message.find("kind") != std::string::npos);
    CHECK(s.find("A") != nullptr);
    CHECK(s.find("C") == nullptr);
    CHECK(r.revision_after == 1);
}

TEST_CASE("statement errors carry engine codes") {
    auto code = [](const std::string& text) {
        Scene s;
        const ExecReport r = execute(s, parse(text));
        return r.failed_at ? r.failed_at->second.code : std::string("ok");
    };
    CHECK(code("create kind=cube name=Leg_1 size=0") == "invalid_primitive_params");
    CHECK(code("create kind=cube name=\"Leg@1\"") == "invalid_name");
    CHECK(code("create kind=teapot name=T") != "ok");
    CHECK(code("hide name=Nope") == "unknown_object");
    CHECK(code("duplicate name=A new_name=B") == "missing_arg");
    CHECK(code("create kind=cube name=A bogus=1") != "ok");
    CHECK(code("create kind=cube name=A size=(1,2,3)") != "ok");
}

TEST_CASE("execute never touches objects the script does not name") {
    oracle::Rng rng(8);
    for (int i = 0; i < 30; ++i) {
        Scene s = oracle::random_scene(rng, 6, "Keep");
        const Scene before = s;
        execute(s, parse(oracle::read_file(oracle::data_path("table.dsl"))));
        for (const auto& [name, obj] : before.objects) CHECK(*s.find(name) == obj);
        CHECK(s.objects.size() == before.objects.size() + 5);
    }
}

TEST_CASE("host execution notifies once per statement") {
    SceneHost host;
    int notes = 0;
    host.subscribe([&](const Scene&, std::uint64_t, std::string_view) { ++notes; });
    const ExecReport r = execute(host, parse(oracle::read_file(oracle::data_path("table.dsl"))));
    CHECK(r.executed == 10);
    CHECK(notes == 10);
}

}
