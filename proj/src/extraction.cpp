// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/extraction.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "layered/error.hpp"
#include "layered/parallel.hpp"
#include "mc_tables.hpp"

static_assert(std::endian::native == std::endian::little, "grid I/O assumes a little-endian host");

namespace layered {

void ScalarGrid::validate() const {
    for (int d : dims) {
        if (d < 2) throw Error(ErrorKind::InvalidInput, "grid needs at least two nodes per axis");
    }
    if (!(cell > 0.0) || !std::isfinite(cell)) throw Error(ErrorKind::InvalidInput, "grid cell size must be positive");
    if (values.size() != node_count()) throw Error(ErrorKind::InvalidInput, "grid value count does not match its dimensions");
}

ScalarGrid make_grid_layout(const Aabb& bounds, int resolution) {
    if (resolution < 2) throw Error(ErrorKind::InvalidInput, "grid resolution must be at least 2");
    const Vec3 extent = bounds.max - bounds.min;
    const double longest = extent.maxCoeff();
    if (!(longest > 0.0) || !std::isfinite(longest) || extent.minCoeff() < 0.0) {
        throw Error(ErrorKind::InvalidInput, "grid bounds are empty");
    }
    ScalarGrid g;
    g.origin = bounds.min;
    g.cell = longest / (resolution - 1);
    for (int a = 0; a < 3; ++a) {
        const int cells = static_cast<int>(std::ceil(extent[a] / g.cell - 1e-9));
        g.dims[static_cast<std::size_t>(a)] = std::max(cells, 1) + 1;
    }
    return g;
}

Aabb extraction_bounds(const TriMesh& mesh, int resolution, double tau) {
    if (resolution < 2) throw Error(ErrorKind::InvalidInput, "grid resolution must be at least 2");
    Aabb b = mesh.bounds();
    const double longest = (b.max - b.min).maxCoeff();
    if (!std::isfinite(longest)) throw Error(ErrorKind::InvalidInput, "mesh has no vertices");
    // pad = tau + 2 * (longest + 2 pad) / (resolution - 1), solved for pad;
    // small resolutions fall back to a pad of one extent.
    const double denom = resolution - 1 - 4.0;
    const double pad = denom > 0.0 ? (tau * (resolution - 1) + 2.0 * longest) / denom : longest + tau;
    b.min -= Vec3::Constant(pad);
    b.max += Vec3::Constant(pad);
    return b;
}

ScalarGrid bake_grid(const std::function<double(const Vec3&)>& field, const Aabb& bounds, int resolution) {
    ScalarGrid g = make_grid_layout(bounds, resolution);
    g.values.resize(g.node_count());
    const int nx = g.dims[0], ny = g.dims[1];
    parallel_for(static_cast<std::size_t>(g.dims[2]) * static_cast<std::size_t>(ny), [&](std::size_t row) {
        const int j = static_cast<int>(row % static_cast<std::size_t>(ny)), k = static_cast<int>(row / static_cast<std::size_t>(ny));
        for (int i = 0; i < nx; ++i) g.values[g.index(i, j, k)] = field(g.node(i, j, k));
    });
    return g;
}

ScalarGrid bake_grid(const MlpUdf& model, const Aabb& bounds, int resolution) {
    model.validate();
    ScalarGrid g = make_grid_layout(bounds, resolution);
    g.values.resize(g.node_count());
    const std::size_t slice = static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1]);
    std::vector<Vec3> points(slice);
    // One z slice at a time bounds memory; udf_eval_batch parallelizes inside.
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) points[g.index(i, j, 0)] = g.node(i, j, k);
        const auto f = udf_eval_batch(model, points);
        std::copy(f.begin(), f.end(), g.values.begin() + static_cast<std::ptrdiff_t>(slice * static_cast<std::size_t>(k)));
    }
    return g;
}

// ---------------------------------------------------------------- marching cubes

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6}, {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// A grid edge is named by its lower node and axis.
std::uint64_t edge_key(const ScalarGrid& g, int i, int j, int k, int axis) {
    return 3 * static_cast<std::uint64_t>(g.index(i, j, k)) + static_cast<std::uint64_t>(axis);
}

Vec3 edge_vertex(const ScalarGrid& g, std::uint64_t key, double tau) {
    const int axis = static_cast<int>(key % 3);
    std::size_t n = static_cast<std::size_t>(key / 3);
    const int i = static_cast<int>(n % static_cast<std::size_t>(g.dims[0]));
    n /= static_cast<std::size_t>(g.dims[0]);
    const int j = static_cast<int>(n % static_cast<std::size_t>(g.dims[1]));
    const int k = static_cast<int>(n / static_cast<std::size_t>(g.dims[1]));
    const int i1 = i + (axis == 0), j1 = j + (axis == 1), k1 = k + (axis == 2);
    const double v0 = g.at(i, j, k), v1 = g.at(i1, j1, k1);
    const double t = (tau - v0) / (v1 - v0);
    const Vec3 p0 = g.node(i, j, k);
    Vec3 p = p0;
    p[axis] = p0[axis] + t * g.cell;
    return p;
}

}  // namespace

IsoSurface marching_cubes(const ScalarGrid& grid, double tau) {
    grid.validate();
    if (!std::isfinite(tau)) throw Error(ErrorKind::InvalidInput, "level must be finite");
    const int cx = grid.dims[0] - 1, cy = grid.dims[1] - 1, cz = grid.dims[2] - 1;

    // Triangles per z layer of cubes, as edge keys; merged in layer order so
    // vertex numbering does not depend on scheduling.
    std::vector<std::vector<std::uint64_t>> layers(static_cast<std::size_t>(cz));
    parallel_for(layers.size(), [&](std::size_t layer) {
        const int k = static_cast<int>(layer);
        auto& tris = layers[layer];
        for (int j = 0; j < cy; ++j) {
            for (int i = 0; i < cx; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    if (grid.at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < tau) cube |= 1 << c;
                }
                const auto& row = detail::kTriTable[cube];
                for (int t = 0; row[t] != -1; t += 3) {
                    // The table winds toward the below-level side; emit the
                    // reverse so triangles face increasing values.
                    for (int e : {row[t], row[t + 2], row[t + 1]}) {
                        const int* a = kCorner[kEdge[e][0]];
                        const int* b = kCorner[kEdge[e][1]];
                        const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
                        tris.push_back(edge_key(grid, i + a[0], j + a[1], k + a[2], axis));
                    }
                }
            }
        }
    });

    IsoSurface out;
    std::unordered_map<std::uint64_t, std::uint32_t> ids;
    std::vector<std::uint64_t> keys;
    for (const auto& tris : layers) {
        for (std::size_t t = 0; t < tris.size(); t += 3) {
            Face f;
            for (int c = 0; c < 3; ++c) {
                auto [it, fresh] = ids.try_emplace(tris[t + static_cast<std::size_t>(c)], static_cast<std::uint32_t>(keys.size()));
                if (fresh) keys.push_back(it->first);
                f[static_cast<std::size_t>(c)] = it->second;
            }
            out.mesh.faces.push_back(f);
        }
    }
    out.mesh.vertices.resize(keys.size());
    parallel_for(keys.size(), [&](std::size_t v) { out.mesh.vertices[v] = edge_vertex(grid, keys[v], tau); });
    out.empty = out.mesh.faces.empty();
    return out;
}

// ---------------------------------------------------------------- orientation

std::vector<bool> back_vertices(const TriMesh& mesh, std::span<const Vec3> joints, const Vec3& view_dir, double xi) {
    if (joints.empty()) throw Error(ErrorKind::InvalidInput, "face orientation needs at least one joint");
    if (!(std::abs(view_dir.norm() - 1.0) < 1e-9)) throw Error(ErrorKind::InvalidInput, "view direction must be a unit vector");
    std::vector<char> flag(mesh.vertices.size(), 0);
    parallel_for(mesh.vertices.size(), [&](std::size_t v) {
        const Vec3& p = mesh.vertices[v];
        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < joints.size(); ++j) {
            const double d = (p - joints[j]).squaredNorm();
            if (d < best) {
                best = d;
                nearest = j;
            }
        }
        flag[v] = (p - joints[nearest]).dot(view_dir) > xi;
    });
    return {flag.begin(), flag.end()};
}

TriMesh orient_back_faces(const TriMesh& mesh, std::span<const Vec3> joints, const Vec3& view_dir, double xi,
                          std::size_t* flipped) {
    const auto back = back_vertices(mesh, joints, view_dir, xi);
    TriMesh out = mesh;
    std::size_t count = 0;
    for (Face& f : out.faces) {
        if (back[f[0]] && back[f[1]] && back[f[2]]) {
            std::swap(f[0], f[2]);
            ++count;
        }
    }
    if (flipped) *flipped = count;
    return out;
}

// ---------------------------------------------------------------- files

namespace {

constexpr char kMagic[4] = {'L', 'G', 'R', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error(ErrorKind::Format, path.string() + ": truncated grid");
    return v;
}

}  // namespace

void save_grid(const std::filesystem::path& path, const ScalarGrid& grid) {
    grid.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    for (int a = 0; a < 3; ++a) put<double>(out, grid.origin[a]);
    put<double>(out, grid.cell);
    for (int d : grid.dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : grid.values) put<float>(out, static_cast<float>(v));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

ScalarGrid load_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorKind::Format, path.string() + ": not a grid dump");
    if (get<std::uint32_t>(in, path) != kVersion) throw Error(ErrorKind::Format, path.string() + ": unsupported grid version");
    ScalarGrid g;
    for (int a = 0; a < 3; ++a) g.origin[a] = get<double>(in, path);
    g.cell = get<double>(in, path);
    for (int& d : g.dims) {
        const auto v = get<std::uint32_t>(in, path);
        if (v < 2 || v > 4096) throw Error(ErrorKind::Format, path.string() + ": implausible grid dimension");
        d = static_cast<int>(v);
    }
    g.values.resize(g.node_count());
    for (double& v : g.values) v = get<float>(in, path);
    g.validate();
    return g;
}

}  // namespace layered
