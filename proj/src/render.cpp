#include "comodel/render.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <tuple>

namespace comodel {
namespace {

// Direction the light travels; faces are lit by the opposite vector.
const Vec3 kLightTravel = Vec3(-1.0, -1.0, -2.0).normalized();
constexpr double kAmbientFloor = 0.15;

struct ScreenFace {
    double depth;
    const std::string* object;
    std::size_t face_index;
    std::vector<Eigen::Vector2d> points;
    std::array<std::uint8_t, 3> color;
};

std::uint8_t to_channel(double v) {
    const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

Vec3 newell_normal(const Points3& verts, const std::vector<int>& face) {
    Vec3 n = Vec3::Zero();
    for (std::size_t i = 0; i < face.size(); ++i) {
        const Vec3 a = verts.col(face[i]);
        const Vec3 b = verts.col(face[(i + 1) % face.size()]);
        n.x() += (a.y() - b.y()) * (a.z() + b.z());
        n.y() += (a.z() - b.z()) * (a.x() + b.x());
        n.z() += (a.x() - b.x()) * (a.y() + b.y());
    }
    return n;
}

void fill_convex(Image& img, const std::vector<Eigen::Vector2d>& pts, const std::array<std::uint8_t, 3>& color) {
    double area = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& a = pts[i];
        const auto& b = pts[(i + 1) % pts.size()];
        area += a.x() * b.y() - b.x() * a.y();
    }
    if (std::abs(area) < 1e-12) return;
    const double orient = area > 0 ? 1.0 : -1.0;

    double min_x = pts[0].x(), max_x = pts[0].x(), min_y = pts[0].y(), max_y = pts[0].y();
    for (const auto& p : pts) {
        min_x = std::min(min_x, p.x());
        max_x = std::max(max_x, p.x());
        min_y = std::min(min_y, p.y());
        max_y = std::max(max_y, p.y());
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(max_x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(max_y)));

    for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
            const double px = x + 0.5;
            bool inside = true;
            for (std::size_t i = 0; i < pts.size() && inside; ++i) {
                const auto& a = pts[i];
                const auto& b = pts[(i + 1) % pts.size()];
                const double e = (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
                inside = e * orient >= 0.0;
            }
            if (!inside) continue;
            auto* px_ptr = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
            px_ptr[0] = color[0];
            px_ptr[1] = color[1];
            px_ptr[2] = color[2];
        }
    }
}

}  // namespace

Image::Image(int w, int h, std::array<std::uint8_t, 3> fill) : width(w), height(h) {
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill[0];
        pixels[i + 1] = fill[1];
        pixels[i + 2] = fill[2];
    }
}

std::array<std::uint8_t, 3> Image::at(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

Camera default_camera(const Scene& scene) {
    std::vector<Box3> boxes;
    for (const auto& [_, obj] : scene.objects) {
        if (!obj.hidden) boxes.push_back(world_bounds(obj));
    }
    Camera cam;
    if (boxes.empty()) return cam;

    Vec3 center = Vec3::Zero();
    for (const auto& b : boxes) center += b.center();
    center /= static_cast<double>(boxes.size());

    double half = 0.0;
    for (const auto& b : boxes) {
        half = std::max(half, (b.max() - center).cwiseAbs().maxCoeff());
        half = std::max(half, (b.min() - center).cwiseAbs().maxCoeff());
    }
    cam.frame_center = center;
    cam.frame_extent = std::max(1.0, 1.2 * half);
    return cam;
}

Image render(const Scene& scene, const Camera& camera, int width, int height) {
    if (width < kMinImageSize || width > kMaxImageSize || height < kMinImageSize || height > kMaxImageSize) {
        throw RenderError("image dimensions must be within [16, 4096]");
    }
    if (!(camera.frame_extent > 0.0)) throw RenderError("frame_extent must be > 0");

    const double az = degrees_to_radians(camera.azimuth_deg);
    const double el = degrees_to_radians(camera.elevation_deg);
    const Vec3 to_camera(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    const Vec3 forward = -to_camera;
    Vec3 right = forward.cross(Vec3::UnitZ());
    right = right.norm() < 1e-12 ? Vec3::UnitX() : right.normalized();
    const Vec3 up = right.cross(forward);
    const double pixels_per_unit = std::min(width, height) / (2.0 * camera.frame_extent);
    const Vec3 to_light = -kLightTravel;

    std::vector<ScreenFace> faces;
    for (const auto& [name, obj] : scene.objects) {
        if (obj.hidden) continue;
        const Mesh mesh = generate_mesh(obj.primitive);
        const Points3 world = world_vertices(obj, mesh);
        const bool open_surface = std::holds_alternative<Plane>(obj.primitive.shape);

        for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
            const auto& face = mesh.faces[fi];
            Vec3 normal = newell_normal(world, face);
            if (normal.norm() < 1e-15) continue;
            normal.normalize();
            if (normal.dot(to_camera) <= 0.0) {
                if (!open_surface) continue;
                normal = -normal;
            }
            Vec3 centroid = Vec3::Zero();
            ScreenFace sf;
            sf.points.reserve(face.size());
            for (int v : face) {
                const Vec3 p = world.col(v);
                centroid += p;
                const Vec3 rel = p - camera.frame_center;
                sf.points.emplace_back(width / 2.0 + rel.dot(right) * pixels_per_unit,
                                       height / 2.0 - rel.dot(up) * pixels_per_unit);
            }
            centroid /= static_cast<double>(face.size());
            sf.depth = (centroid - camera.frame_center).dot(to_camera);
            sf.object = &name;
            sf.face_index = fi;
            const double intensity = std::max(kAmbientFloor, normal.dot(to_light));
            for (int c = 0; c < 3; ++c) sf.color[c] = to_channel(obj.material.base_color[c] * intensity);
            faces.push_back(std::move(sf));
        }
    }

    // Far to near; ties by object name, then face index.
    std::sort(faces.begin(), faces.end(), [](const ScreenFace& a, const ScreenFace& b) {
        return std::tie(a.depth, *a.object, a.face_index) < std::tie(b.depth, *b.object, b.face_index);
    });

    Image img(width, height, kBackground);
    for (const auto& f : faces) fill_convex(img, f.points, f.color);
    return img;
}

std::string encode_ppm(const Image& image) {
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    return out;
}

Image decode_ppm(std::string_view bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return std::string(bytes.substr(start, pos - start));
    };
    if (token() != "P6") throw std::invalid_argument("ppm: missing P6 magic");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw std::invalid_argument("ppm: bad header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw std::invalid_argument("ppm: unsupported header");
    ++pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() < pos || bytes.size() - pos != need) throw std::invalid_argument("ppm: pixel data size mismatch");
    Image img;
    img.width = w;
    img.height = h;
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
    return img;
}

}  // namespace comodel
