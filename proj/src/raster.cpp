// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "layered/error.hpp"

namespace layered {

namespace fs = std::filesystem;
using json = nlohmann::json;

void Camera::validate() const {
    if (width < 1 || height < 1) throw Error(ErrorKind::InvalidInput, "camera resolution must be at least 1x1");
    if (mode == Projection::Orthographic && !(extent > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "orthographic extent must be positive");
    }
    if (mode == Projection::Perspective && !(fov_y > 0.0 && fov_y < std::numbers::pi)) {
        throw Error(ErrorKind::InvalidInput, "perspective field of view must be in (0, pi)");
    }
}

Camera Camera::look_at(Projection mode, const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height) {
    Camera cam;
    cam.mode = mode;
    cam.width = width;
    cam.height = height;
    const Vec3 back = (eye - target).normalized();  // camera +z
    Vec3 right = up.cross(back);
    if (right.norm() < 1e-12) right = Vec3::UnitX().cross(back);
    right.normalize();
    const Vec3 true_up = back.cross(right);
    cam.camera_to_world.setIdentity();
    cam.camera_to_world.block<3, 1>(0, 0) = right;
    cam.camera_to_world.block<3, 1>(0, 1) = true_up;
    cam.camera_to_world.block<3, 1>(0, 2) = back;
    cam.camera_to_world.block<3, 1>(0, 3) = eye;
    return cam;
}

namespace {

Vec3 to_camera(const Mat4& camera_to_world, const Vec3& p) {
    const Mat3 r = camera_to_world.topLeftCorner<3, 3>();
    return r.transpose() * (p - camera_to_world.topRightCorner<3, 1>());
}

}  // namespace

double Camera::depth_of(const Vec3& world) const { return -to_camera(camera_to_world, world).z(); }

std::optional<Camera::Projected> Camera::project(const Vec3& world) const {
    const Vec3 c = to_camera(camera_to_world, world);
    const double depth = -c.z();
    const double aspect = double(width) / double(height);
    double nx = 0.0, ny = 0.0;
    if (mode == Projection::Orthographic) {
        nx = c.x() / (0.5 * extent * aspect);
        ny = c.y() / (0.5 * extent);
    } else {
        if (!(depth > kNearPlane)) return std::nullopt;
        const double f = 1.0 / std::tan(0.5 * fov_y);
        nx = f * c.x() / (aspect * depth);
        ny = f * c.y() / depth;
    }
    return Projected{0.5 * (nx + 1.0) * width, 0.5 * (1.0 - ny) * height, depth};
}

std::pair<Vec3, Vec3> Camera::pixel_ray(double x, double y) const {
    const double aspect = double(width) / double(height);
    const double nx = 2.0 * x / width - 1.0;
    const double ny = 1.0 - 2.0 * y / height;
    const Mat3 r = camera_to_world.topLeftCorner<3, 3>();
    const Vec3 eye = camera_to_world.topRightCorner<3, 1>();
    if (mode == Projection::Orthographic) {
        const Vec3 local(nx * 0.5 * extent * aspect, ny * 0.5 * extent, 0.0);
        return {eye + r * local, r * Vec3(0, 0, -1)};
    }
    const double f = 1.0 / std::tan(0.5 * fov_y);
    const Vec3 dir(nx * aspect / f, ny / f, -1.0);
    return {eye, (r * dir).normalized()};
}

std::size_t RenderBuffers::mesh_of(std::uint32_t face) const {
    auto it = std::upper_bound(mesh_offsets.begin(), mesh_offsets.end(), face);
    return static_cast<std::size_t>(it - mesh_offsets.begin()) - 1;
}

std::size_t RenderBuffers::covered_pixels() const {
    return static_cast<std::size_t>(std::count_if(face_id.begin(), face_id.end(), [](auto f) { return f != kBackground; }));
}

namespace {

struct ScreenVertex {
    double x, y, depth;
};

// Evaluated with the endpoints in a fixed order so that edge(a, b) is exactly
// -edge(b, a); otherwise rounding can put a pixel center outside both
// triangles of a shared edge.
double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
    if (a.x > b.x || (a.x == b.x && a.y > b.y)) {
        return -((a.x - b.x) * (py - b.y) - (a.y - b.y) * (px - b.x));
    }
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// With the triangle oriented so that edge() is positive inside, a shared
// edge is walked in opposite directions by its two triangles; this owner
// test therefore assigns every pixel center on it to exactly one of them.
bool owns_edge(const ScreenVertex& a, const ScreenVertex& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

void raster_triangle(ScreenVertex v0, ScreenVertex v1, ScreenVertex v2, bool perspective, std::uint32_t id,
                     RenderBuffers& out) {
    double area = edge(v0, v1, v2.x, v2.y);
    if (area == 0.0 || !std::isfinite(area)) return;
    if (area < 0.0) {
        std::swap(v1, v2);
        area = -area;
    }
    const double minx = std::min({v0.x, v1.x, v2.x}), maxx = std::max({v0.x, v1.x, v2.x});
    const double miny = std::min({v0.y, v1.y, v2.y}), maxy = std::max({v0.y, v1.y, v2.y});
    const int x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
    const int x1 = std::min(out.width - 1, static_cast<int>(std::floor(maxx - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
    const int y1 = std::min(out.height - 1, static_cast<int>(std::floor(maxy - 0.5)));
    if (x0 > x1 || y0 > y1) return;
    const bool own0 = owns_edge(v1, v2), own1 = owns_edge(v2, v0), own2 = owns_edge(v0, v1);
    for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
            const double px = x + 0.5;
            const double w0 = edge(v1, v2, px, py);
            const double w1 = edge(v2, v0, px, py);
            const double w2 = edge(v0, v1, px, py);
            if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
            if ((w0 == 0.0 && !own0) || (w1 == 0.0 && !own1) || (w2 == 0.0 && !own2)) continue;
            const double b0 = w0 / area, b1 = w1 / area, b2 = w2 / area;
            double depth;
            if (perspective) {
                depth = 1.0 / (b0 / v0.depth + b1 / v1.depth + b2 / v2.depth);
            } else {
                depth = b0 * v0.depth + b1 * v1.depth + b2 * v2.depth;
            }
            const std::size_t i = out.index(x, y);
            if (depth < out.depth[i] || (depth == out.depth[i] && id < out.face_id[i])) {
                out.depth[i] = depth;
                out.face_id[i] = id;
            }
        }
    }
}

}  // namespace

RenderBuffers render_buffers(std::span<const TriMesh* const> meshes, const Camera& camera) {
    camera.validate();
    RenderBuffers out;
    out.width = camera.width;
    out.height = camera.height;
    out.depth.assign(static_cast<std::size_t>(camera.width) * camera.height, std::numeric_limits<double>::infinity());
    out.face_id.assign(out.depth.size(), kBackground);
    const bool perspective = camera.mode == Projection::Perspective;
    std::uint32_t offset = 0;
    std::vector<std::optional<Camera::Projected>> projected;
    for (const TriMesh* mesh : meshes) {
        out.mesh_offsets.push_back(offset);
        projected.resize(mesh->vertices.size());
        for (std::size_t v = 0; v < mesh->vertices.size(); ++v) projected[v] = camera.project(mesh->vertices[v]);
        for (std::size_t f = 0; f < mesh->faces.size(); ++f) {
            const Face& t = mesh->faces[f];
            const auto& a = projected[t[0]];
            const auto& b = projected[t[1]];
            const auto& c = projected[t[2]];
            if (!a || !b || !c) continue;
            raster_triangle({a->x, a->y, a->depth}, {b->x, b->y, b->depth}, {c->x, c->y, c->depth}, perspective,
                            offset + static_cast<std::uint32_t>(f), out);
        }
        offset += static_cast<std::uint32_t>(mesh->faces.size());
    }
    return out;
}

RenderBuffers render_buffers(const TriMesh& mesh, const Camera& camera) {
    const TriMesh* one[] = {&mesh};
    return render_buffers(one, camera);
}

std::vector<Camera> sample_turntable_views(const Vec3& center, double radius, int width, int height,
                                           const TurntableLayout& layout) {
    if (!(radius > 0.0)) throw Error(ErrorKind::InvalidInput, "turntable radius must be positive");
    const double deg = std::numbers::pi / 180.0;
    std::vector<Camera> cams;
    auto ring = [&](double elevation_deg, double step_deg) {
        const int count = static_cast<int>(std::lround(360.0 / step_deg));
        for (int k = 0; k < count; ++k) {
            const double az = k * step_deg * deg, el = elevation_deg * deg;
            const Vec3 eye = center + radius * Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
            Camera cam = Camera::look_at(Projection::Perspective, eye, center, Vec3::UnitY(), width, height);
            cam.fov_y = layout.fov_y;
            cams.push_back(cam);
        }
    };
    ring(0.0, layout.equator_step_deg);
    ring(layout.ring_elevation_deg, layout.ring_step_deg);
    ring(-layout.ring_elevation_deg, layout.ring_step_deg);
    return cams;
}

Camera load_camera(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Format, path.string() + ": " + e.what());
    }
    Camera cam;
    try {
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "orthographic") {
            cam.mode = Projection::Orthographic;
            cam.extent = j.at("extent").get<double>();
        } else if (mode == "perspective") {
            cam.mode = Projection::Perspective;
            cam.fov_y = j.at("fov").get<double>();
        } else {
            throw Error(ErrorKind::Format, path.string() + ": unknown camera mode '" + mode + "'");
        }
        const auto& m = j.at("extrinsic");
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) cam.camera_to_world(r, c) = m.at(r).at(c).get<double>();
        cam.width = j.at("resolution").at(0).get<int>();
        cam.height = j.at("resolution").at(1).get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Format, path.string() + ": " + e.what());
    }
    try {
        cam.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::Format, path.string() + ": " + e.what());
    }
    return cam;
}

void save_camera(const fs::path& path, const Camera& camera) {
    json j;
    j["mode"] = camera.mode == Projection::Orthographic ? "orthographic" : "perspective";
    if (camera.mode == Projection::Orthographic) j["extent"] = camera.extent;
    else j["fov"] = camera.fov_y;
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
        rows.push_back({camera.camera_to_world(r, 0), camera.camera_to_world(r, 1), camera.camera_to_world(r, 2),
                        camera.camera_to_world(r, 3)});
    }
    j["extrinsic"] = rows;
    j["resolution"] = {camera.width, camera.height};
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace layered
