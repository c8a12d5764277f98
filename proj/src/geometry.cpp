// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>

#include "layered/error.hpp"

namespace layered {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid input";
        case ErrorKind::DegenerateGeometry: return "degenerate geometry";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Usage: return "usage error";
        case ErrorKind::SingularBlend: return "singular blend";
        case ErrorKind::SamplingStarvation: return "sampling starvation";
        case ErrorKind::Divergence: return "divergence";
        case ErrorKind::UndefinedMetric: return "undefined metric";
        case ErrorKind::Io: return "i/o error";
    }
    return "error";
}

void TriMesh::validate() const {
    const auto n = vertices.size();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& t = faces[f];
        for (auto idx : t) {
            if (idx >= n) {
                throw Error(ErrorKind::InvalidInput, "face " + std::to_string(f) + " references vertex " +
                                                         std::to_string(idx) + " but mesh has " +
                                                         std::to_string(n) + " vertices");
            }
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
            throw Error(ErrorKind::InvalidInput, "face " + std::to_string(f) + " repeats a vertex index");
        }
    }
    if (labels && labels->size() != n) {
        throw Error(ErrorKind::InvalidInput, "label count " + std::to_string(labels->size()) +
                                                 " does not match vertex count " + std::to_string(n));
    }
}

Aabb TriMesh::bounds() const {
    Aabb box;
    for (const auto& v : vertices) box.extend(v);
    return box;
}

double TriMesh::face_area(std::size_t f) const {
    const Face& t = faces[f];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriMesh::total_area() const {
    double a = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) a += face_area(f);
    return a;
}

std::vector<std::uint32_t> TriMesh::vertices_with_label(int label) const {
    std::vector<std::uint32_t> out;
    if (!labels) return out;
    for (std::size_t i = 0; i < labels->size(); ++i) {
        if ((*labels)[i] == label) out.push_back(static_cast<std::uint32_t>(i));
    }
    return out;
}

Vec3 face_normal(const TriMesh& mesh, std::size_t f) {
    const Face& t = mesh.faces[f];
    Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    double len = n.norm();
    if (!(len > 0.0)) {
        throw Error(ErrorKind::DegenerateGeometry, "face " + std::to_string(f) + " has zero area");
    }
    return n / len;
}

MeshNormals compute_normals(const TriMesh& mesh) {
    MeshNormals out;
    out.face.resize(mesh.faces.size());
    std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        double len = n.norm();
        if (!(len > 0.0)) {
            throw Error(ErrorKind::DegenerateGeometry, "face " + std::to_string(f) + " has zero area");
        }
        out.face[f] = n / len;
        // |cross| is twice the area, so summing it area-weights the average.
        for (auto v : t) acc[v] += n;
    }
    out.vertex.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
        double len = acc[i].norm();
        out.vertex[i] = len > 0.0 ? Vec3(acc[i] / len) : Vec3::Zero();
    }
    return out;
}

namespace {

struct DisjointSet {
    std::vector<std::uint32_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) std::swap(a, b);
        parent[a] = b;
    }
};

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

std::vector<std::vector<std::uint32_t>> connected_components(const TriMesh& mesh,
                                                             std::span<const std::uint32_t> vertex_set) {
    const std::size_t n = mesh.vertices.size();
    std::vector<bool> selected(n, false);
    for (auto v : vertex_set) {
        if (v >= n) throw Error(ErrorKind::InvalidInput, "vertex " + std::to_string(v) + " not in mesh");
        selected[v] = true;
    }
    DisjointSet ds(n);
    for (const Face& t : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            auto a = t[e], b = t[(e + 1) % 3];
            if (selected[a] && selected[b]) ds.unite(a, b);
        }
    }
    std::map<std::uint32_t, std::vector<std::uint32_t>> groups;
    for (std::uint32_t v = 0; v < n; ++v) {
        if (selected[v]) groups[ds.find(v)].push_back(v);
    }
    std::vector<std::vector<std::uint32_t>> out;
    out.reserve(groups.size());
    for (auto& [root, members] : groups) out.push_back(std::move(members));
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });
    return out;
}

std::vector<std::vector<std::uint32_t>> vertex_adjacency(const TriMesh& mesh) {
    std::vector<std::vector<std::uint32_t>> adj(mesh.vertices.size());
    for (const Face& t : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            adj[t[e]].push_back(t[(e + 1) % 3]);
            adj[t[(e + 1) % 3]].push_back(t[e]);
        }
    }
    for (auto& ring : adj) {
        std::sort(ring.begin(), ring.end());
        ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
    }
    return adj;
}

TriMesh extract_submesh(const TriMesh& mesh, const std::vector<bool>& vertex_mask) {
    constexpr auto kUnused = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> remap(mesh.vertices.size(), kUnused);
    TriMesh out;
    std::vector<int> labels;
    for (const Face& t : mesh.faces) {
        if (!(vertex_mask[t[0]] && vertex_mask[t[1]] && vertex_mask[t[2]])) continue;
        Face nt{};
        for (int c = 0; c < 3; ++c) {
            auto v = t[c];
            if (remap[v] == kUnused) {
                remap[v] = static_cast<std::uint32_t>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[v]);
                if (mesh.labels) labels.push_back((*mesh.labels)[v]);
            }
            nt[c] = remap[v];
        }
        out.faces.push_back(nt);
    }
    if (mesh.labels) out.labels = std::move(labels);
    return out;
}

TriMesh merge_meshes(std::span<const TriMesh> meshes) {
    TriMesh out;
    bool all_labeled = !meshes.empty();
    for (const auto& m : meshes) all_labeled = all_labeled && m.labels.has_value();
    std::vector<int> labels;
    for (const auto& m : meshes) {
        auto base = static_cast<std::uint32_t>(out.vertices.size());
        out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
        for (const Face& t : m.faces) out.faces.push_back({t[0] + base, t[1] + base, t[2] + base});
        if (all_labeled) labels.insert(labels.end(), m.labels->begin(), m.labels->end());
    }
    if (all_labeled) out.labels = std::move(labels);
    return out;
}

TriMesh transformed(const TriMesh& mesh, const Mat4& transform) {
    TriMesh out = mesh;
    const Mat3 linear = transform.topLeftCorner<3, 3>();
    const Vec3 offset = transform.topRightCorner<3, 1>();
    for (auto& v : out.vertices) v = linear * v + offset;
    return out;
}

TriMesh flipped(const TriMesh& mesh) {
    TriMesh out = mesh;
    for (auto& t : out.faces) std::swap(t[0], t[2]);
    return out;
}

std::size_t count_nonmanifold_edges(const TriMesh& mesh) {
    std::unordered_map<std::uint64_t, int> uses;
    for (const Face& t : mesh.faces) {
        for (int e = 0; e < 3; ++e) ++uses[edge_key(t[e], t[(e + 1) % 3])];
    }
    std::size_t bad = 0;
    for (const auto& [key, count] : uses) bad += count != 2;
    return bad;
}

bool is_closed_oriented(const TriMesh& mesh) {
    // +1 for a->b with a < b, -1 otherwise; a closed oriented surface cancels.
    std::unordered_map<std::uint64_t, std::pair<int, int>> uses;
    for (const Face& t : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            auto a = t[e], b = t[(e + 1) % 3];
            auto& u = uses[edge_key(a, b)];
            u.first += 1;
            u.second += a < b ? 1 : -1;
        }
    }
    for (const auto& [key, u] : uses) {
        if (u.first != 2 || u.second != 0) return false;
    }
    return !mesh.faces.empty();
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Region classification after Ericson, Real-Time Collision Detection 5.1.5.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return a + v * ab;
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return a + w * ac;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return a + ab * v + ac * w;
}

double triangle_solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Van Oosterom & Strackee.
    const Vec3 ra = a - p, rb = b - p, rc = c - p;
    const double la = ra.norm(), lb = rb.norm(), lc = rc.norm();
    const double num = ra.dot(rb.cross(rc));
    const double den = la * lb * lc + ra.dot(rb) * lc + ra.dot(rc) * lb + rb.dot(rc) * la;
    return 2.0 * std::atan2(num, den);
}

// Watertight formulation: vertices are sheared into a ray-aligned frame and
// tested with 2D edge functions that neighbors sharing an edge compute with
// identical operands, so a ray through a shared edge or vertex never slips
// between the faces.
std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                   const Vec3& c) {
    int kz = 0;
    dir.cwiseAbs().maxCoeff(&kz);
    int kx = (kz + 1) % 3, ky = (kx + 1) % 3;
    if (dir[kz] < 0.0) std::swap(kx, ky);
    if (dir[kz] == 0.0) return std::nullopt;
    const double sx = dir[kx] / dir[kz], sy = dir[ky] / dir[kz], sz = 1.0 / dir[kz];
    const Vec3 pa = a - origin, pb = b - origin, pc = c - origin;
    const double ax = pa[kx] - sx * pa[kz], ay = pa[ky] - sy * pa[kz];
    const double bx = pb[kx] - sx * pb[kz], by = pb[ky] - sy * pb[kz];
    const double cx = pc[kx] - sx * pc[kz], cy = pc[ky] - sy * pc[kz];
    double u = cx * by - cy * bx;
    double v = ax * cy - ay * cx;
    double w = bx * ay - by * ax;
    if (u == 0.0 || v == 0.0 || w == 0.0) {
        using ld = long double;
        u = static_cast<double>(ld(cx) * ld(by) - ld(cy) * ld(bx));
        v = static_cast<double>(ld(ax) * ld(cy) - ld(ay) * ld(cx));
        w = static_cast<double>(ld(bx) * ld(ay) - ld(by) * ld(ax));
    }
    if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return std::nullopt;
    const double det = u + v + w;
    if (det == 0.0) return std::nullopt;
    const double t = (u * sz * pa[kz] + v * sz * pb[kz] + w * sz * pc[kz]) / det;
    return t;
}

TriMesh make_unit_cube() {
    TriMesh m;
    for (int i = 0; i < 8; ++i) m.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    // Quads listed counter-clockwise seen from outside.
    const int quads[6][4] = {
        {0, 2, 3, 1},  // z = 0
        {4, 5, 7, 6},  // z = 1
        {0, 1, 5, 4},  // y = 0
        {2, 6, 7, 3},  // y = 1
        {0, 4, 6, 2},  // x = 0
        {1, 3, 7, 5},  // x = 1
    };
    for (const auto& q : quads) {
        m.faces.push_back({std::uint32_t(q[0]), std::uint32_t(q[1]), std::uint32_t(q[2])});
        m.faces.push_back({std::uint32_t(q[0]), std::uint32_t(q[2]), std::uint32_t(q[3])});
    }
    return m;
}

TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi},  {0, 1, phi},
                           {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1},  {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& p : v) p.normalize();
    std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                           {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                           {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::unordered_map<std::uint64_t, std::uint32_t> mid;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            auto key = edge_key(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            auto idx = static_cast<std::uint32_t>(v.size());
            v.push_back((v[a] + v[b]).normalized());
            mid.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(f.size() * 4);
        for (const Face& t : f) {
            auto ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    TriMesh m;
    m.vertices.reserve(v.size());
    for (const auto& p : v) m.vertices.push_back(center + radius * p);
    m.faces = std::move(f);
    return m;
}

TriMesh make_grid(int nx, int ny, double size) {
    TriMesh m;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            m.vertices.emplace_back(size * (double(i) / nx - 0.5), size * (double(j) / ny - 0.5), 0.0);
        }
    }
    auto id = [nx](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return m;
}

TriMesh make_quad(const Vec3& center, double half_width, double half_height) {
    TriMesh m;
    m.vertices = {center + Vec3(-half_width, -half_height, 0), center + Vec3(half_width, -half_height, 0),
                  center + Vec3(half_width, half_height, 0), center + Vec3(-half_width, half_height, 0)};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

}  // namespace layered
