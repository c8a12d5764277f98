// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "layered/geometry.hpp"
#include "layered/udfnet.hpp"

namespace layered {

/// Node-sampled scalar field on a regular grid; x varies fastest.
struct ScalarGrid {
    Vec3 origin = Vec3::Zero();
    double cell = 0.0;
    std::array<int, 3> dims{0, 0, 0};
    std::vector<double> values;

    std::size_t node_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims[1]) + static_cast<std::size_t>(j)) *
                   static_cast<std::size_t>(dims[0]) +
               static_cast<std::size_t>(i);
    }
    Vec3 node(int i, int j, int k) const { return origin + cell * Vec3(i, j, k); }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }

    /// Throws InvalidInput unless every dimension is >= 2, cell > 0 and the
    /// value count matches.
    void validate() const;
};

/// Grid over `bounds` with `resolution` nodes along its longest axis; the
/// other axes get as many nodes of the same spacing as needed to cover.
/// The field is not evaluated. resolution < 2 or empty bounds is InvalidInput.
ScalarGrid make_grid_layout(const Aabb& bounds, int resolution);

/// Bounds of `mesh` padded by tau plus two cells of a `resolution` grid over
/// the padded box, so the level set stays clear of the grid boundary.
Aabb extraction_bounds(const TriMesh& mesh, int resolution, double tau);

ScalarGrid bake_grid(const std::function<double(const Vec3&)>& field, const Aabb& bounds, int resolution);
/// Equal to udf_eval at every node.
ScalarGrid bake_grid(const MlpUdf& model, const Aabb& bounds, int resolution);

struct IsoSurface {
    TriMesh mesh;
    bool empty = true;  // the level never crosses a grid edge
};

/// Level set {f = tau} by marching cubes. Vertices are welded per grid edge
/// and placed by linear interpolation. Triangles face increasing values.
/// Output is independent of the thread count.
IsoSurface marching_cubes(const ScalarGrid& grid, double tau);

/// Per vertex: t* = (v - J) . d for its nearest joint J (lowest index on
/// ties); marked when t* > xi.
std::vector<bool> back_vertices(const TriMesh& mesh, std::span<const Vec3> joints, const Vec3& view_dir, double xi);

/// Reverses the winding of every face whose three vertices are all back
/// vertices. Joints empty or |view_dir| != 1 is InvalidInput.
TriMesh orient_back_faces(const TriMesh& mesh, std::span<const Vec3> joints, const Vec3& view_dir, double xi,
                          std::size_t* flipped = nullptr);

// Grid dump: "LGRD", u32 version, f64 origin[3], f64 cell, u32 dims[3], then
// float32 values in node order.
void save_grid(const std::filesystem::path& path, const ScalarGrid& grid);
ScalarGrid load_grid(const std::filesystem::path& path);

}  // namespace layered
