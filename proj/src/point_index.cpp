// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/point_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "layered/error.hpp"

namespace layered {

PointIndex::PointIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    if (points_.empty()) throw Error(ErrorKind::InvalidInput, "cannot index an empty point set");
    std::vector<std::uint32_t> ids(points_.size());
    std::iota(ids.begin(), ids.end(), 0u);
    nodes_.reserve(points_.size());
    build(ids.data(), ids.data() + ids.size(), 0);
}

std::int32_t PointIndex::build(std::uint32_t* begin, std::uint32_t* end, int depth) {
    if (begin == end) return -1;
    Aabb box;
    for (auto* it = begin; it != end; ++it) box.extend(points_[*it]);
    int axis = 0;
    box.extent().maxCoeff(&axis);
    (void)depth;
    auto* mid = begin + (end - begin) / 2;
    std::nth_element(begin, mid, end, [&](std::uint32_t a, std::uint32_t b) {
        if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
        return a < b;
    });
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({*mid, -1, -1, static_cast<std::uint8_t>(axis)});
    const auto l = build(begin, mid, depth + 1);
    const auto r = build(mid + 1, end, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

std::uint32_t PointIndex::nearest(const Vec3& q) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    struct Item {
        std::int32_t node;
        double bound;  // squared distance lower bound to the subtree
    };
    std::vector<Item> stack;
    stack.reserve(64);
    stack.push_back({0, 0.0});
    while (!stack.empty()) {
        Item it = stack.back();
        stack.pop_back();
        if (it.node < 0 || it.bound > best_d2) continue;
        const Node& n = nodes_[it.node];
        const Vec3& p = points_[n.point];
        const double d2 = (p - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
            best_d2 = d2;
            best = n.point;
        }
        const double diff = q[n.axis] - p[n.axis];
        const std::int32_t near = diff <= 0.0 ? n.left : n.right;
        const std::int32_t far = diff <= 0.0 ? n.right : n.left;
        // Points equal on the split axis may sit on either side, so the far
        // side is only skipped when strictly farther than the best.
        stack.push_back({far, diff * diff});
        stack.push_back({near, 0.0});
    }
    return best;
}

}  // namespace layered
