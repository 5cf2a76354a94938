#pragma once

#include "comodel/scene.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace comodel {

/// Orthographic camera looking at `frame_center` from the given azimuth/elevation.
struct Camera {
    double azimuth_deg = 45.0;
    double elevation_deg = 35.264;
    Vec3 frame_center = Vec3::Zero();
    /// Half-width of the visible square, in scene units.
    double frame_extent = 1.0;
};

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB

    Image() = default;
    Image(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0});

    std::array<std::uint8_t, 3> at(int x, int y) const;
    bool operator==(const Image&) const = default;
};

class RenderError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr std::array<std::uint8_t, 3> kBackground = {230, 230, 230};
inline constexpr int kMinImageSize = 16;
inline constexpr int kMaxImageSize = 4096;

/// Frames the visible objects; an empty (or all-hidden) scene yields center 0 and extent 1.
Camera default_camera(const Scene& scene);

/// Flat-shaded painter's-algorithm rendering of the visible objects. Deterministic.
Image render(const Scene& scene, const Camera& camera, int width, int height);

/// Binary PPM (P6).
std::string encode_ppm(const Image& image);
Image decode_ppm(std::string_view bytes);

}  // namespace comodel
