// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "layered/error.hpp"

namespace layered {

namespace {

constexpr std::uint32_t kLeafSize = 4;

constexpr double kSlabGamma = 3.0 * 0x1p-53 / (1.0 - 3.0 * 0x1p-53);

bool ray_box(const Aabb& box, const Vec3& origin, const Vec3& inv_dir) {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        double t0 = (box.min[a] - origin[a]) * inv_dir[a];
        double t1 = (box.max[a] - origin[a]) * inv_dir[a];
        if (std::isnan(t0) || std::isnan(t1)) {
            // Ray parallel to the slab and starting on its plane.
            if (origin[a] < box.min[a] || origin[a] > box.max[a]) return false;
            continue;
        }
        if (t0 > t1) std::swap(t0, t1);
        // Widen the far bound by the slab arithmetic's rounding bound so a
        // ray grazing a box corner is never culled.
        t1 *= 1.0 + 2.0 * kSlabGamma;
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return false;
    }
    return true;
}

}  // namespace

SpatialIndex::SpatialIndex(const TriMesh& mesh) : mesh_(mesh) {
    if (mesh_.faces.empty()) throw Error(ErrorKind::InvalidInput, "cannot index an empty mesh");
    mesh_.validate();
    const auto nf = static_cast<std::uint32_t>(mesh_.faces.size());
    order_.resize(nf);
    std::vector<Vec3> centroids(nf);
    for (std::uint32_t f = 0; f < nf; ++f) {
        order_[f] = f;
        const Face& t = mesh_.faces[f];
        centroids[f] = (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
    }
    nodes_.reserve(2 * (nf / kLeafSize + 1));
    build(0, nf, centroids);
    build_caps();
}

std::uint32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb box, cbox;
    for (std::uint32_t i = begin; i < end; ++i) {
        const Face& t = mesh_.faces[order_[i]];
        for (auto v : t) box.extend(mesh_.vertices[v]);
        cbox.extend(centroids[order_[i]]);
    }
    nodes_[id].box = box;
    nodes_[id].face_total = end - begin;
    if (end - begin <= kLeafSize) {
        nodes_[id].leaf = true;
        nodes_[id].left = begin;
        nodes_[id].right = end - begin;
        return id;
    }
    int axis = 0;
    cbox.extent().maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
                         return a < b;
                     });
    const auto left = build(begin, mid, centroids);
    const auto right = build(mid, end, centroids);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void SpatialIndex::build_caps() {
    // Boundary of each node's patch as a chain of directed edges; interior
    // edges cancel. Computed bottom-up; children always follow parents.
    std::vector<std::vector<std::array<std::uint32_t, 2>>> boundary(nodes_.size());
    auto reduce = [](const std::vector<std::array<std::uint32_t, 2>>& edges) {
        std::unordered_map<std::uint64_t, int> net;
        net.reserve(edges.size() * 2);
        auto key = [](std::uint32_t a, std::uint32_t b) {
            return (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
        };
        for (const auto& e : edges) net[key(e[0], e[1])] += e[0] < e[1] ? 1 : -1;
        std::vector<std::array<std::uint32_t, 2>> out;
        for (const auto& e : edges) {
            auto it = net.find(key(e[0], e[1]));
            if (it->second == 0) continue;
            const std::uint32_t lo = std::min(e[0], e[1]), hi = std::max(e[0], e[1]);
            for (int k = 0; k < std::abs(it->second); ++k) {
                if (it->second > 0) out.push_back({lo, hi});
                else out.push_back({hi, lo});
            }
            it->second = 0;
        }
        return out;
    };
    for (std::size_t n = nodes_.size(); n-- > 0;) {
        const Node& node = nodes_[n];
        std::vector<std::array<std::uint32_t, 2>> edges;
        if (node.leaf) {
            for (std::uint32_t i = node.left; i < node.left + node.right; ++i) {
                const Face& t = mesh_.faces[order_[i]];
                for (int e = 0; e < 3; ++e) edges.push_back({t[e], t[(e + 1) % 3]});
            }
        } else {
            edges = boundary[node.left];
            edges.insert(edges.end(), boundary[node.right].begin(), boundary[node.right].end());
            boundary[node.left].clear();
            boundary[node.left].shrink_to_fit();
            boundary[node.right].clear();
            boundary[node.right].shrink_to_fit();
        }
        boundary[n] = reduce(edges);
        // Keep a cap only where it is cheaper than visiting the faces.
        if (boundary[n].size() < node.face_total) {
            nodes_[n].first_cap = static_cast<std::uint32_t>(cap_edges_.size());
            nodes_[n].cap_count = static_cast<std::uint32_t>(boundary[n].size());
            cap_edges_.insert(cap_edges_.end(), boundary[n].begin(), boundary[n].end());
        } else {
            nodes_[n].cap_count = std::numeric_limits<std::uint32_t>::max();
        }
    }
}

std::size_t SpatialIndex::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf; }));
}

ClosestHit SpatialIndex::closest_point(const Vec3& q) const {
    ClosestHit best;
    double best_d2 = std::numeric_limits<double>::infinity();
    std::uint32_t best_face = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> stack;
    stack.reserve(64);
    stack.push_back(0);
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (node.box.squared_distance(q) > best_d2) continue;
        if (node.leaf) {
            for (std::uint32_t i = node.left; i < node.left + node.right; ++i) {
                const std::uint32_t f = order_[i];
                const Face& t = mesh_.faces[f];
                Vec3 p = closest_point_on_triangle(q, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
                double d2 = (p - q).squaredNorm();
                if (d2 < best_d2 || (d2 == best_d2 && f < best_face)) {
                    best_d2 = d2;
                    best_face = f;
                    best.point = p;
                }
            }
            continue;
        }
        const double dl = nodes_[node.left].box.squared_distance(q);
        const double dr = nodes_[node.right].box.squared_distance(q);
        if (dl <= dr) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    best.face = best_face;
    best.distance = std::sqrt(best_d2);
    return best;
}

std::vector<RayHit> SpatialIndex::ray_intersections(const Vec3& origin, const Vec3& dir) const {
    const double len = dir.norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
        throw Error(ErrorKind::InvalidInput, "ray direction must be non-zero and finite");
    }
    const Vec3 d = dir / len;
    const Vec3 inv = d.cwiseInverse();
    std::vector<RayHit> hits;
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (!ray_box(node.box, origin, inv)) continue;
        if (node.leaf) {
            for (std::uint32_t i = node.left; i < node.left + node.right; ++i) {
                const std::uint32_t f = order_[i];
                const Face& t = mesh_.faces[f];
                auto hit = ray_triangle(origin, d, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
                if (hit && *hit > kRayEpsilon) hits.push_back({*hit, f});
            }
            continue;
        }
        stack.push_back(node.right);
        stack.push_back(node.left);
    }
    std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) {
        return a.t != b.t ? a.t < b.t : a.face < b.face;
    });
    return hits;
}

double SpatialIndex::winding_recursive(std::uint32_t id, const Vec3& q) const {
    const Node& node = nodes_[id];
    if (!node.box.contains(q) && node.cap_count != std::numeric_limits<std::uint32_t>::max()) {
        // Patch plus fan cap is closed and lies inside the box, so its
        // winding number at an outside q is zero: w(patch) = -w(cap).
        if (node.cap_count == 0) return 0.0;
        const auto& first = cap_edges_[node.first_cap];
        const Vec3& apex = mesh_.vertices[first[0]];
        double sum = 0.0;
        for (std::uint32_t i = node.first_cap; i < node.first_cap + node.cap_count; ++i) {
            const auto& e = cap_edges_[i];
            sum += triangle_solid_angle(q, apex, mesh_.vertices[e[0]], mesh_.vertices[e[1]]);
        }
        return sum;
    }
    if (node.leaf) {
        double sum = 0.0;
        for (std::uint32_t i = node.left; i < node.left + node.right; ++i) {
            const Face& t = mesh_.faces[order_[i]];
            sum += triangle_solid_angle(q, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
        }
        return sum;
    }
    return winding_recursive(node.left, q) + winding_recursive(node.right, q);
}

double SpatialIndex::winding_number(const Vec3& q) const {
    return winding_recursive(0, q) / (4.0 * std::numbers::pi);
}

}  // namespace layered
