// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "layered/geometry.hpp"

namespace layered {

/// kd-tree over a point set for exact nearest-neighbor queries.
/// Equidistant points resolve to the lowest index.
class PointIndex {
public:
    explicit PointIndex(std::span<const Vec3> points);

    std::uint32_t nearest(const Vec3& q) const;
    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        std::uint32_t point = 0;
        std::int32_t left = -1, right = -1;
        std::uint8_t axis = 0;
    };
    std::int32_t build(std::uint32_t* begin, std::uint32_t* end, int depth);

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
};

}  // namespace layered
