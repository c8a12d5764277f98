// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace layered {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Face = std::array<std::uint32_t, 3>;

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void extend(const Aabb& b) {
        min = min.cwiseMin(b.min);
        max = max.cwiseMax(b.max);
    }
    bool empty() const { return (min.array() > max.array()).any(); }
    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extent() const { return max - min; }
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    /// Squared distance from p to the box; 0 inside.
    double squared_distance(const Vec3& p) const {
        Vec3 d = (min - p).cwiseMax(p - max).cwiseMax(0.0);
        return d.squaredNorm();
    }
    Aabb inflated(double fraction) const {
        Aabb b = *this;
        Vec3 pad = 0.5 * fraction * extent();
        b.min -= pad;
        b.max += pad;
        return b;
    }
};

/// Indexed triangle surface. Positions are in meters. `labels`, when set,
/// carries one garment id per vertex with 0 meaning non-garment.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::optional<std::vector<int>> labels;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }
    bool empty() const { return faces.empty(); }

    /// Throws InvalidInput on out-of-range or repeated face indices and on
    /// a label array of the wrong length.
    void validate() const;

    Aabb bounds() const;
    double face_area(std::size_t f) const;
    double total_area() const;

    /// Vertices whose label equals `label`, ascending.
    std::vector<std::uint32_t> vertices_with_label(int label) const;
};

struct MeshNormals {
    std::vector<Vec3> face;
    std::vector<Vec3> vertex;
};

/// Unit face normals (counter-clockwise winding) and area-weighted unit
/// vertex normals. A zero-area face raises DegenerateGeometry naming it.
/// Vertices not referenced by any face get a zero normal.
MeshNormals compute_normals(const TriMesh& mesh);

/// Unit normal of a single face; throws DegenerateGeometry on zero area.
Vec3 face_normal(const TriMesh& mesh, std::size_t f);

/// Edge-connected components of the subgraph induced by `vertex_set`.
/// Components are sorted by size descending (ties: smallest member first),
/// members ascending.
std::vector<std::vector<std::uint32_t>> connected_components(
    const TriMesh& mesh, std::span<const std::uint32_t> vertex_set);

/// Vertex one-ring adjacency (sorted, unique).
std::vector<std::vector<std::uint32_t>> vertex_adjacency(const TriMesh& mesh);

/// Faces whose three vertices are all flagged, re-indexed into a compact
/// mesh. Labels are carried over.
TriMesh extract_submesh(const TriMesh& mesh, const std::vector<bool>& vertex_mask);

/// Concatenates meshes, offsetting face indices. Labels are kept only if
/// every input has them.
TriMesh merge_meshes(std::span<const TriMesh> meshes);

/// Applies a rigid (or general affine) 4x4 transform to all vertices.
TriMesh transformed(const TriMesh& mesh, const Mat4& transform);

/// Reverses the winding of every face.
TriMesh flipped(const TriMesh& mesh);

/// Number of undirected edges used by other than exactly two faces.
std::size_t count_nonmanifold_edges(const TriMesh& mesh);

/// True when every undirected edge is shared by exactly two faces with
/// opposite orientation.
bool is_closed_oriented(const TriMesh& mesh);

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Signed solid angle subtended by triangle (a, b, c) as seen from p.
double triangle_solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Möller–Trumbore; returns the ray parameter of the hit, if any.
std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                   const Vec3& b, const Vec3& c);

// Simple primitives shared by tests, fixtures and examples.
TriMesh make_unit_cube();                       // [0,1]^3, outward CCW, 12 faces
TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());
TriMesh make_grid(int nx, int ny, double size);  // z = 0 plane, +z facing
TriMesh make_quad(const Vec3& center, double half_width, double half_height);  // +z facing

}  // namespace layered
