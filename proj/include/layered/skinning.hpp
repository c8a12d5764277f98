// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "layered/geometry.hpp"

namespace layered {

/// Per-vertex rows of non-negative joint weights, stored row-major.
class WeightField {
public:
    WeightField() = default;
    WeightField(std::size_t rows, std::size_t joints) : joints_(joints), data_(rows * joints, 0.0) {}

    std::size_t rows() const { return joints_ == 0 ? 0 : data_.size() / joints_; }
    std::size_t joints() const { return joints_; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * joints_, joints_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * joints_, joints_}; }
    const std::vector<double>& data() const { return data_; }

    /// Throws InvalidInput when a row has a negative entry or does not sum
    /// to one within `tolerance`.
    void validate(double tolerance = 1e-6) const;

private:
    std::size_t joints_ = 0;
    std::vector<double> data_;
};

/// Rigid per-joint bone transforms defining one posed state.
struct Pose {
    std::vector<Mat4> bones;

    std::size_t joint_count() const { return bones.size(); }
    static Pose identity(std::size_t joints);

    /// Each upper-left block must be a rotation (orthonormal, det +1) and the
    /// bottom row (0,0,0,1); throws InvalidInput naming the joint otherwise.
    void validate(double tolerance = 1e-6) const;
};

/// Canonical-pose body with skinning weights. `joints` holds rest-pose joint
/// centers when known; see rest_joint_positions().
struct SkinnedBody {
    TriMesh mesh;
    WeightField weights;
    std::vector<Vec3> joints;

    std::size_t joint_count() const { return weights.joints(); }
    void validate() const;

    /// Stored joint centers, or the weight-averaged vertex position per
    /// joint when none were provided.
    std::vector<Vec3> rest_joint_positions() const;
};

/// Each mesh vertex copies the weight row of its nearest body vertex (ties:
/// lowest body index). Body and mesh must be in the same space.
WeightField transfer_weights(const TriMesh& body_mesh, const WeightField& body_weights, const TriMesh& mesh);
inline WeightField transfer_weights(const SkinnedBody& body, const TriMesh& mesh) {
    return transfer_weights(body.mesh, body.weights, mesh);
}

/// out_j = (sum_i w_ji B_i) p_j.
std::vector<Vec3> lbs_forward(std::span<const Vec3> points, const WeightField& weights, const Pose& pose);

/// out_j = (sum_i w_ji B_i)^-1 p_j. A blend whose linear part has condition
/// number >= 1e8 raises SingularBlend naming the vertex.
std::vector<Vec3> lbs_inverse(std::span<const Vec3> points, const WeightField& weights, const Pose& pose);

/// Body mesh deformed by `pose` with its own weights.
TriMesh pose_body(const SkinnedBody& body, const Pose& pose);

// File formats. Weights: little-endian u32 vertex count, u32 joint count,
// then row-major float32. Pose: JSON array of row-major 4x4 matrices.
WeightField load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const WeightField& weights);
Pose load_pose(const std::filesystem::path& path);
void save_pose(const std::filesystem::path& path, const Pose& pose);
std::vector<Vec3> load_joints(const std::filesystem::path& path);
void save_joints(const std::filesystem::path& path, std::span<const Vec3> joints);

}  // namespace layered
