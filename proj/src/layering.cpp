// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/layering.hpp"

#include <cmath>

#include "layered/error.hpp"
#include "layered/parallel.hpp"
#include "layered/spatial_index.hpp"

namespace layered {

TriMesh canonicalize_layer(const TriMesh& mesh, const SkinnedBody& body, const Pose& pose) {
    mesh.validate();
    const TriMesh posed = pose_body(body, pose);
    const WeightField w = transfer_weights(posed, body.weights, mesh);
    TriMesh out = mesh;
    out.vertices = lbs_inverse(mesh.vertices, w, pose);
    return out;
}

void LayerStack::validate() const {
    if (body.faces.empty()) throw Error(ErrorKind::InvalidInput, "layer stack has an empty body mesh");
    body.validate();
    if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidInput, "penetration thickness epsilon must be positive");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& layer = layers[k];
        if (layer.mesh.faces.empty()) {
            throw Error(ErrorKind::InvalidInput, "layer " + std::to_string(k + 1) + " has no faces");
        }
        layer.mesh.validate();
        for (auto v : layer.garment_set) {
            if (v >= layer.mesh.vertices.size()) {
                throw Error(ErrorKind::InvalidInput, "garment vertex " + std::to_string(v) + " out of range in layer " +
                                                         std::to_string(k + 1));
            }
        }
    }
}

std::vector<std::uint32_t> garment_set_from_labels(const TriMesh& mesh, int label) {
    std::vector<std::uint32_t> out;
    if (!mesh.labels) return out;
    for (std::uint32_t v = 0; v < mesh.labels->size(); ++v) {
        if ((*mesh.labels)[v] == label) out.push_back(v);
    }
    return out;
}

namespace {

bool ambiguous(double w) { return std::abs(w) > 0.1 && std::abs(w - 1.0) > 0.1; }

// Face normal, except where b sits on an edge or vertex of the body: there
// the face normal depends on which incident face won the closest-point tie,
// so the direction from b toward v (oriented like the face normal) is used.
// Both agree in face interiors, and moving along the result keeps b the
// closest point, which makes a second pass a fixed point.
Vec3 line_direction(const Vec3& v, const Vec3& b, const Vec3& face_n) {
    const Vec3 d = v - b;
    const double len = d.norm();
    if (!(len > 1e-6)) return face_n;  // on the surface: v - b is rounding noise
    const Vec3 dir = (d.dot(face_n) < 0.0 ? -1.0 : 1.0) * d / len;
    return dir.dot(face_n) > 1.0 - 1e-12 ? face_n : dir;
}

}  // namespace

PenetrationResult remove_penetrations(const LayerStack& stack) {
    stack.validate();
    const SpatialIndex body_index(stack.body);
    std::vector<Vec3> body_normals(stack.body.faces.size());
    for (std::size_t f = 0; f < body_normals.size(); ++f) body_normals[f] = face_normal(stack.body, f);

    PenetrationResult result;
    if (!is_closed_oriented(stack.body)) result.warnings.push_back("body mesh is not closed and consistently oriented");
    result.layers.reserve(stack.layers.size());  // `previous` points into it
    const TriMesh* previous = &stack.body;
    for (std::size_t k = 0; k < stack.layers.size(); ++k) {
        const Layer& layer = stack.layers[k];
        const SpatialIndex prev_index(*previous);
        const Aabb prev_box = prev_index.bounds();
        const double diagonal = prev_box.extent().norm();
        std::vector<bool> in_s(layer.mesh.vertices.size(), false);
        for (auto v : layer.garment_set) in_s[v] = true;

        TriMesh out = layer.mesh;
        const std::size_t n = out.vertices.size();
        std::vector<DisplacementCase> cases(n, DisplacementCase::Keep);
        std::vector<std::uint8_t> fell_back(n, 0), unclear(n, 0);
        parallel_for(n, [&](std::size_t i) {
            const Vec3& v = layer.mesh.vertices[i];
            bool inside = false;
            if (in_s[i]) {
                const double w = prev_index.winding_number(v);
                unclear[i] = ambiguous(w);
                inside = w > 0.5;
                if (!inside) return;  // bit-identical
            }
            const ClosestHit hit = body_index.closest_point(v);
            const Vec3 b = hit.point;
            const Vec3 nrm = line_direction(v, b, body_normals[hit.face]);
            // Start the line far enough back that every crossing with the
            // previous layer lies ahead of the origin.
            const double lead = (b - prev_box.center()).norm() + diagonal + 1.0;
            const auto crossings = prev_index.ray_intersections(b - lead * nrm, nrm);
            const bool found = !crossings.empty();
            const double t_star = found ? crossings.back().t - lead : 0.0;
            if (!in_s[i]) {
                cases[i] = DisplacementCase::Conform;
                if (found) {
                    out.vertices[i] = b + t_star * nrm;
                } else {
                    fell_back[i] = 1;
                    out.vertices[i] = prev_index.closest_point(v).point;
                }
            } else {
                cases[i] = DisplacementCase::PushOut;
                fell_back[i] = !found;
                out.vertices[i] = b + (t_star + stack.epsilon) * nrm;
            }
        });

        LayerReport report;
        for (std::size_t i = 0; i < n; ++i) {
            switch (cases[i]) {
                case DisplacementCase::Conform:
                    ++report.conformed;
                    report.conform_fallbacks += fell_back[i];
                    break;
                case DisplacementCase::PushOut:
                    ++report.pushed;
                    report.push_fallbacks += fell_back[i];
                    break;
                case DisplacementCase::Keep:
                    ++report.kept;
                    break;
            }
            report.ambiguous_winding += unclear[i];
        }
        if (report.ambiguous_winding > 0) {
            result.warnings.push_back("layer " + std::to_string(k + 1) + ": " +
                                      std::to_string(report.ambiguous_winding) +
                                      " garment vertices have an ambiguous winding number against the layer below;"
                                      " it may not be watertight");
        }
        result.layers.push_back(std::move(out));
        result.reports.push_back(report);
        previous = &result.layers.back();
    }
    return result;
}

}  // namespace layered
