#include "comodel/digest.hpp"
#include "comodel/dsl.hpp"
#include "comodel/render.hpp"
#include "golden.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace comodel;

namespace {

Scene table_scene() {
    Scene s;
    dsl::execute(s, dsl::parse(oracle::read_file(oracle::data_path("table.dsl"))));
    return s;
}

bool uniform(const Image& img, std::array<std::uint8_t, 3> rgb) {
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (img.at(x, y) != rgb) return false;
        }
    }
    return true;
}

}  // namespace

TEST_SUITE("render") {

TEST_CASE("default camera framing") {
    const Camera empty = default_camera(Scene{});
    CHECK(empty.frame_center == Vec3::Zero());
    CHECK(empty.frame_extent == 1.0);
    CHECK(empty.azimuth_deg == 45.0);
    CHECK(empty.elevation_deg == doctest::Approx(35.264));

    Scene cube;
    upsert_object(cube, "Top", {Cube{2.0}}, Transform{});
    const Camera c = default_camera(cube);
    CHECK(c.frame_center.norm() < 1e-12);
    CHECK(c.frame_extent == doctest::Approx(1.2).epsilon(1e-12));

    Scene small;
    upsert_object(small, "Pea", {Cube{0.2}}, Transform{});
    CHECK(default_camera(small).frame_extent == 1.0);

    hide_object(cube, "Top");
    const Camera h = default_camera(cube);
    CHECK(h.frame_center == Vec3::Zero());
    CHECK(h.frame_extent == 1.0);
}

TEST_CASE("empty scene is uniform background") {
    const Image img = render(Scene{}, default_camera(Scene{}), 64, 64);
    CHECK(img.pixels.size() == 64u * 64u * 3u);
    CHECK(uniform(img, {230, 230, 230}));
}

TEST_CASE("rendering is deterministic and hidden objects never show") {
    Scene s = table_scene();
    const Camera cam = default_camera(s);
    const Image a = render(s, cam, 128, 96);
    const Image b = render(s, cam, 128, 96);
    CHECK(a == b);
    CHECK_FALSE(uniform(a, kBackground));

    upsert_object(s, "Ghost", {UvSphere{}}, Transform{});
    hide_object(s, "Ghost");
    CHECK(render(s, cam, 128, 96) == a);
}

TEST_CASE("a cube differs from the empty scene") {
    Scene s;
    upsert_object(s, "Top", {Cube{2.0}}, Transform{});
    CHECK(render(s, default_camera(s), 32, 32) != render(Scene{}, default_camera(s), 32, 32));
}

TEST_CASE("flat shading follows the declared light and floor") {
    // Seen straight down, a cube shows only its top face, whose normal is +z.
    Scene s;
    MaterialSpec white;
    white.base_color = Vec3(1, 1, 1);
    upsert_object(s, "Top", {Cube{2.0}}, Transform{}, white);
    Camera cam;
    cam.elevation_deg = 90.0;
    cam.azimuth_deg = 0.0;
    cam.frame_extent = 2.0;
    const Image img = render(s, cam, 64, 64);
    const Vec3 light = Vec3(-1, -1, -2).normalized();
    const double lambert = std::max(0.15, -light.dot(Vec3::UnitZ()));
    const auto expected = static_cast<std::uint8_t>(std::floor(255.0 * lambert + 0.5));
    CHECK(img.at(32, 32) == std::array<std::uint8_t, 3>{expected, expected, expected});
    CHECK(img.at(1, 1) == kBackground);
}

TEST_CASE("content hash moves with half a cube width") {
    Scene s;
    upsert_object(s, "Top", {Cube{1.0}}, Transform{});
    const Camera cam = default_camera(s);
    const std::string before = sha256_hex(encode_ppm(render(s, cam, 64, 64)));
    Transform t;
    t.translation = Vec3(0.5, 0, 0);
    upsert_object(s, "Top", {Cube{1.0}}, t);
    CHECK(sha256_hex(encode_ppm(render(s, cam, 64, 64))) != before);
}

TEST_CASE("dimensions are validated") {
    CHECK_THROWS_AS(render(Scene{}, Camera{}, 15, 64), RenderError);
    CHECK_THROWS_AS(render(Scene{}, Camera{}, 64, 4097), RenderError);
    CHECK_NOTHROW(render(Scene{}, Camera{}, 16, 16));
    Camera bad;
    bad.frame_extent = 0;
    CHECK_THROWS(render(Scene{}, bad, 16, 16));
}

TEST_CASE("ppm encoding") {
    const Image white(1, 1, {255, 255, 255});
    const std::string one = encode_ppm(white);
    CHECK(one.size() == std::string("P6\n1 1\n255\n").size() + 3);
    CHECK(one.substr(0, 11) == "P6\n1 1\n255\n");
    CHECK(encode_ppm(Image(64, 64)).rfind("P6\n64 64\n255\n", 0) == 0);

    oracle::Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        Image img(oracle::uniform_int(rng, 1, 40), oracle::uniform_int(rng, 1, 40));
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(oracle::uniform_int(rng, 0, 255));
        CHECK(decode_ppm(encode_ppm(img)) == img);
    }
    CHECK_THROWS(decode_ppm("P3\n1 1\n255\n000"));
    CHECK_THROWS(decode_ppm("P6\n2 2\n255\nabc"));
}

TEST_CASE("table golden image") {
    const Scene s = table_scene();
    const std::string ppm = encode_ppm(render(s, default_camera(s), 256, 256));
    MESSAGE("table sha256 " << sha256_hex(ppm));
    CHECK(sha256_hex(ppm) == kTableGoldenSha256);
}

}

TEST_SUITE("digest") {

TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("base64 known answers and round trip") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
    CHECK(base64_decode("Zm9vYg==") == "foob");
    CHECK_THROWS_AS(base64_decode("Zm9v!"), std::invalid_argument);
    oracle::Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        std::string bytes(static_cast<std::size_t>(oracle::uniform_int(rng, 0, 100)), '\0');
        for (auto& c : bytes) c = static_cast<char>(oracle::uniform_int(rng, 0, 255));
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
}

}
