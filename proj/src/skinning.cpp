// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/skinning.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>
#include "json.hpp"

#include "layered/error.hpp"
#include "layered/parallel.hpp"
#include "layered/point_index.hpp"

namespace layered {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kMaxBlendCondition = 1e8;

Mat4 blend(std::span<const double> w, const Pose& pose) {
    Mat4 m = Mat4::Zero();
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] != 0.0) m += w[i] * pose.bones[i];
    }
    return m;
}

void check_dims(std::size_t points, const WeightField& weights, const Pose& pose) {
    if (points != weights.rows()) {
        throw Error(ErrorKind::InvalidInput, "point count " + std::to_string(points) + " != weight rows " +
                                                 std::to_string(weights.rows()));
    }
    if (weights.joints() != pose.joint_count()) {
        throw Error(ErrorKind::InvalidInput, "weights have " + std::to_string(weights.joints()) +
                                                 " joints but pose has " + std::to_string(pose.joint_count()));
    }
}

}  // namespace

void WeightField::validate(double tolerance) const {
    if (joints_ == 0) throw Error(ErrorKind::InvalidInput, "weight field needs at least one joint");
    for (std::size_t r = 0; r < rows(); ++r) {
        double sum = 0.0;
        for (double w : row(r)) {
            if (!(w >= 0.0)) throw Error(ErrorKind::InvalidInput, "negative weight in row " + std::to_string(r));
            sum += w;
        }
        if (std::abs(sum - 1.0) > tolerance) {
            throw Error(ErrorKind::InvalidInput, "weight row " + std::to_string(r) + " sums to " + std::to_string(sum));
        }
    }
}

Pose Pose::identity(std::size_t joints) { return Pose{std::vector<Mat4>(joints, Mat4::Identity())}; }

void Pose::validate(double tolerance) const {
    if (bones.empty()) throw Error(ErrorKind::InvalidInput, "pose has no joints");
    for (std::size_t j = 0; j < bones.size(); ++j) {
        const Mat3 r = bones[j].topLeftCorner<3, 3>();
        const bool ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tolerance;
        const bool proper = std::abs(r.determinant() - 1.0) <= tolerance;
        const bool affine = (bones[j].row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <= tolerance;
        if (!ortho || !proper || !affine || !bones[j].allFinite()) {
            throw Error(ErrorKind::InvalidInput, "bone " + std::to_string(j) + " is not a rigid transform");
        }
    }
}

void SkinnedBody::validate() const {
    mesh.validate();
    if (mesh.vertices.empty()) throw Error(ErrorKind::InvalidInput, "body mesh is empty");
    if (weights.rows() != mesh.vertices.size()) {
        throw Error(ErrorKind::InvalidInput, "body has " + std::to_string(mesh.vertices.size()) + " vertices but " +
                                                 std::to_string(weights.rows()) + " weight rows");
    }
    weights.validate();
    if (!joints.empty() && joints.size() != weights.joints()) {
        throw Error(ErrorKind::InvalidInput, "body lists " + std::to_string(joints.size()) + " joint positions for " +
                                                 std::to_string(weights.joints()) + " joints");
    }
}

std::vector<Vec3> SkinnedBody::rest_joint_positions() const {
    if (!joints.empty()) return joints;
    std::vector<Vec3> out(weights.joints(), Vec3::Zero());
    std::vector<double> mass(weights.joints(), 0.0);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        auto w = weights.row(v);
        for (std::size_t j = 0; j < w.size(); ++j) {
            out[j] += w[j] * mesh.vertices[v];
            mass[j] += w[j];
        }
    }
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (mass[j] > 0.0) out[j] /= mass[j];
    }
    return out;
}

WeightField transfer_weights(const TriMesh& body_mesh, const WeightField& body_weights, const TriMesh& mesh) {
    if (body_mesh.vertices.empty()) throw Error(ErrorKind::InvalidInput, "cannot transfer weights from an empty body");
    if (body_weights.rows() != body_mesh.vertices.size()) {
        throw Error(ErrorKind::InvalidInput, "body weight rows do not match body vertices");
    }
    PointIndex index(body_mesh.vertices);
    WeightField out(mesh.vertices.size(), body_weights.joints());
    parallel_for(mesh.vertices.size(), [&](std::size_t i) {
        auto src = body_weights.row(index.nearest(mesh.vertices[i]));
        auto dst = out.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
    });
    return out;
}

std::vector<Vec3> lbs_forward(std::span<const Vec3> points, const WeightField& weights, const Pose& pose) {
    check_dims(points.size(), weights, pose);
    std::vector<Vec3> out(points.size());
    parallel_for(points.size(), [&](std::size_t j) {
        const Mat4 m = blend(weights.row(j), pose);
        out[j] = m.topLeftCorner<3, 3>() * points[j] + m.topRightCorner<3, 1>();
    });
    return out;
}

std::vector<Vec3> lbs_inverse(std::span<const Vec3> points, const WeightField& weights, const Pose& pose) {
    check_dims(points.size(), weights, pose);
    std::vector<Vec3> out(points.size());
    parallel_for(points.size(), [&](std::size_t j) {
        const Mat4 m = blend(weights.row(j), pose);
        const Mat3 a = m.topLeftCorner<3, 3>();
        Eigen::JacobiSVD<Mat3> svd(a);
        const Vec3 s = svd.singularValues();
        const double cond = s(2) > 0.0 ? s(0) / s(2) : std::numeric_limits<double>::infinity();
        if (!(cond < kMaxBlendCondition)) {
            throw Error(ErrorKind::SingularBlend,
                        "blended bone transform at vertex " + std::to_string(j) + " is singular (condition " +
                            std::to_string(cond) + ")");
        }
        const Mat4 inv = m.inverse();
        out[j] = inv.topLeftCorner<3, 3>() * points[j] + inv.topRightCorner<3, 1>();
    });
    return out;
}

TriMesh pose_body(const SkinnedBody& body, const Pose& pose) {
    TriMesh out = body.mesh;
    out.vertices = lbs_forward(body.mesh.vertices, body.weights, pose);
    return out;
}

WeightField load_weights(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::uint32_t header[2] = {0, 0};
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) throw Error(ErrorKind::Format, path.string() + ": truncated weights header");
    const std::size_t rows = header[0], joints = header[1];
    if (joints == 0) throw Error(ErrorKind::Format, path.string() + ": joint count is zero");
    std::vector<float> raw(rows * joints);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!in) throw Error(ErrorKind::Format, path.string() + ": expected " + std::to_string(rows) + "x" +
                                                std::to_string(joints) + " float32 weights");
    in.peek();
    if (!in.eof()) throw Error(ErrorKind::Format, path.string() + ": trailing bytes after weights");
    WeightField w(rows, joints);
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = w.row(r);
        double sum = 0.0;
        for (std::size_t j = 0; j < joints; ++j) {
            row[j] = raw[r * joints + j];
            if (!(row[j] >= 0.0)) throw Error(ErrorKind::Format, path.string() + ": negative weight in row " + std::to_string(r));
            sum += row[j];
        }
        // float32 storage loses ~1e-7 per entry; restore exact unit sums.
        if (std::abs(sum - 1.0) > 1e-4) {
            throw Error(ErrorKind::Format, path.string() + ": weight row " + std::to_string(r) + " sums to " +
                                               std::to_string(sum));
        }
        for (auto& x : row) x /= sum;
    }
    return w;
}

void save_weights(const fs::path& path, const WeightField& weights) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    const std::uint32_t header[2] = {static_cast<std::uint32_t>(weights.rows()),
                                     static_cast<std::uint32_t>(weights.joints())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    std::vector<float> raw(weights.data().begin(), weights.data().end());
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

Pose load_pose(const fs::path& path) {
    const json j = read_json(path);
    if (!j.is_array() || j.empty()) throw Error(ErrorKind::Format, path.string() + ": expected a non-empty array of 4x4 matrices");
    Pose pose;
    for (std::size_t b = 0; b < j.size(); ++b) {
        std::vector<double> flat;
        const json& m = j[b];
        try {
            if (m.is_array() && m.size() == 4 && m[0].is_array()) {
                for (const auto& row : m) {
                    if (row.size() != 4) throw Error(ErrorKind::Format, "row length");
                    for (const auto& x : row) flat.push_back(x.get<double>());
                }
            } else if (m.is_array() && m.size() == 16) {
                for (const auto& x : m) flat.push_back(x.get<double>());
            }
        } catch (const std::exception&) {
            flat.clear();
        }
        if (flat.size() != 16) throw Error(ErrorKind::Format, path.string() + ": bone " + std::to_string(b) + " is not a 4x4 matrix");
        Mat4 mat;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) mat(r, c) = flat[r * 4 + c];
        pose.bones.push_back(mat);
    }
    try {
        pose.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::Format, path.string() + ": " + e.what());
    }
    return pose;
}

void save_pose(const fs::path& path, const Pose& pose) {
    json j = json::array();
    for (const auto& m : pose.bones) {
        json rows = json::array();
        for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
        j.push_back(rows);
    }
    write_json(path, j);
}

std::vector<Vec3> load_joints(const fs::path& path) {
    const json j = read_json(path);
    std::vector<Vec3> out;
    if (!j.is_array()) throw Error(ErrorKind::Format, path.string() + ": expected an array of [x, y, z]");
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != 3 || !j[i][0].is_number() || !j[i][1].is_number() || !j[i][2].is_number()) {
            throw Error(ErrorKind::Format, path.string() + ": joint " + std::to_string(i) + " is not [x, y, z]");
        }
        out.emplace_back(j[i][0].get<double>(), j[i][1].get<double>(), j[i][2].get<double>());
    }
    return out;
}

void save_joints(const fs::path& path, std::span<const Vec3> joints) {
    json j = json::array();
    for (const auto& p : joints) j.push_back({p.x(), p.y(), p.z()});
    write_json(path, j);
}

}  // namespace layered
