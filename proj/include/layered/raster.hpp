// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "layered/geometry.hpp"

namespace layered {

enum class Projection { Orthographic, Perspective };

/// Pinhole or orthographic camera. The camera frame looks down -z with +y
/// up and +x to the right; `camera_to_world` places it in the scene.
/// Pixel (0, 0) is the top-left corner; pixel centers sit at half-integers.
struct Camera {
    Projection mode = Projection::Orthographic;
    Mat4 camera_to_world = Mat4::Identity();
    double extent = 1.0;  // orthographic: full view height in meters
    double fov_y = 0.7;   // perspective: vertical field of view in radians
    int width = 64;
    int height = 64;

    void validate() const;

    /// Camera looking from `eye` toward `target`.
    static Camera look_at(Projection mode, const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                          int height);

    Vec3 position() const { return camera_to_world.topRightCorner<3, 1>(); }
    Vec3 forward() const { return -camera_to_world.block<3, 1>(0, 2); }

    struct Projected {
        double x = 0.0, y = 0.0;  // continuous pixel coordinates
        double depth = 0.0;       // distance along the view axis
    };
    /// Perspective projection is undefined at or behind the camera plane.
    std::optional<Projected> project(const Vec3& world) const;

    /// World-space ray through continuous pixel coordinates (x, y).
    /// Direction is unit length; `t` along it equals view depth for
    /// orthographic cameras.
    std::pair<Vec3, Vec3> pixel_ray(double x, double y) const;

    /// View depth of a world point (distance along the view axis).
    double depth_of(const Vec3& world) const;
};

inline constexpr std::uint32_t kBackground = std::numeric_limits<std::uint32_t>::max();
inline constexpr double kNearPlane = 1e-6;

/// Depth and face-id rasters. Face ids index the concatenation of the
/// rendered meshes in order; `mesh_offsets[m]` is the first id of mesh m.
struct RenderBuffers {
    int width = 0, height = 0;
    std::vector<double> depth;          // +inf for background
    std::vector<std::uint32_t> face_id;  // kBackground for background
    std::vector<std::uint32_t> mesh_offsets;

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    /// Which input mesh a face id belongs to.
    std::size_t mesh_of(std::uint32_t face) const;
    std::size_t covered_pixels() const;
};

/// Z-buffer rasterization sampled at pixel centers with a top-left fill
/// rule; no culling. Equal depths resolve to the lower face id. Perspective
/// triangles touching the camera plane are skipped.
RenderBuffers render_buffers(std::span<const TriMesh* const> meshes, const Camera& camera);
RenderBuffers render_buffers(const TriMesh& mesh, const Camera& camera);

/// Ring layout for turntable sampling.
struct TurntableLayout {
    double equator_step_deg = 10.0;
    double ring_elevation_deg = 30.0;
    double ring_step_deg = 30.0;
    double fov_y = 0.7;
};

/// Perspective cameras on a sphere of `radius` around `center`, all looking
/// at it: one equatorial ring plus rings above and below. The default
/// layout yields 36 + 12 + 12 = 60 views.
std::vector<Camera> sample_turntable_views(const Vec3& center, double radius, int width, int height,
                                           const TurntableLayout& layout = {});

// Camera JSON: {"mode": "orthographic"|"perspective", "extrinsic": 4x4
// camera-to-world rows, "extent": meters | "fov": radians, "resolution": [w, h]}.
Camera load_camera(const std::filesystem::path& path);
void save_camera(const std::filesystem::path& path, const Camera& camera);

}  // namespace layered
