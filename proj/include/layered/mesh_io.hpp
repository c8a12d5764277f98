// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "layered/geometry.hpp"

namespace layered {

enum class PlyEncoding { BinaryLittleEndian, Ascii };

/// Loads an OBJ or PLY file, chosen by extension. OBJ labels come from the
/// sidecar `<path>.labels` when it exists; PLY labels from an integer vertex
/// property named `label`. The result is validated.
///
/// Errors: Format (with line number, or element index for binary PLY),
/// Usage for an unknown extension, Io when the file cannot be opened.
TriMesh load_mesh(const std::filesystem::path& path);

/// Writes OBJ (plus the label sidecar if the mesh is labeled) or PLY.
/// PLY coordinates are stored as doubles so round trips are exact.
void save_mesh(const std::filesystem::path& path, const TriMesh& mesh,
               PlyEncoding encoding = PlyEncoding::BinaryLittleEndian);

/// Sidecar label file: one base-10 integer per line.
std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const std::vector<int>& labels);

std::filesystem::path label_sidecar_path(const std::filesystem::path& mesh_path);

}  // namespace layered
