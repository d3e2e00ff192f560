// Copyright 2026 The cariblend Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "cariblend/error.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cariblend {

/// N x 3 row-major block; row n is vertex n. The raw buffer is the
/// interleaved (x0, y0, z0, x1, ...) vector used by the linear models.
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using UVs = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// Per-vertex 3D vectors (displacements) aligned to mesh vertex order.
using VectorField = Vertices;
/// Per-vertex scalars (masks) aligned to mesh vertex order.
using ScalarField = Eigen::VectorXd;

/// Fixed-topology triangle mesh. `uv` is either empty or holds one texture
/// coordinate per vertex.
struct TriMesh {
    Vertices vertices;
    Faces faces;
    UVs uv;

    Eigen::Index num_vertices() const { return vertices.rows(); }
    Eigen::Index num_faces() const { return faces.rows(); }
    bool has_uv() const { return uv.rows() == vertices.rows() && uv.rows() > 0; }
};

/// Interleaved view of a vertex block as a 3N vector.
inline Eigen::Map<const Eigen::VectorXd> flatten(const Vertices& v)
{
    return {v.data(), v.size()};
}

inline Vertices unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat)
{
    if (flat.size() % 3 != 0) {
        throw Error(ErrorCode::DimensionMismatch, "flat vector length " + std::to_string(flat.size()) +
                                                      " is not a multiple of 3");
    }
    return Eigen::Map<const Vertices>(flat.data(), flat.size() / 3, 3);
}

/// Throws InvalidArgument when a face index is out of range or a face repeats a vertex.
inline void validate(const TriMesh& mesh)
{
    const Eigen::Index n = mesh.num_vertices();
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
        for (int idx : {a, b, c}) {
            if (idx < 0 || idx >= n) {
                throw Error(ErrorCode::InvalidArgument, "face " + std::to_string(f) + " references vertex " +
                                                            std::to_string(idx) + " but mesh has " +
                                                            std::to_string(n) + " vertices");
            }
        }
        if (a == b || b == c || a == c) {
            throw Error(ErrorCode::InvalidArgument, "face " + std::to_string(f) + " repeats a vertex index");
        }
    }
    if (mesh.uv.rows() != 0 && mesh.uv.rows() != n) {
        throw Error(ErrorCode::InvalidArgument, "uv count does not match vertex count");
    }
}

inline double bounding_box_diagonal(const Vertices& v)
{
    if (v.rows() == 0) {
        return 0.0;
    }
    return (v.colwise().maxCoeff() - v.colwise().minCoeff()).norm();
}

struct TopologyIssue {
    std::size_t mesh_index;
    /// Face index of the first mismatch, or -1 for a vertex/face count mismatch.
    Eigen::Index face_index;
    std::string message;
};

struct ValidationReport {
    std::vector<TopologyIssue> issues;

    bool ok() const { return issues.empty(); }
};

/// Checks that every mesh has the vertex count and face list of meshes[0].
/// Vertex positions are ignored.
inline ValidationReport validate_blendshape_topology(std::span<const TriMesh> meshes)
{
    ValidationReport report;
    if (meshes.empty()) {
        report.issues.push_back({0, -1, "empty mesh list"});
        return report;
    }
    const TriMesh& ref = meshes.front();
    for (std::size_t m = 1; m < meshes.size(); ++m) {
        const TriMesh& mesh = meshes[m];
        if (mesh.num_vertices() != ref.num_vertices()) {
            report.issues.push_back({m, -1, "mesh " + std::to_string(m) + " has " +
                                                std::to_string(mesh.num_vertices()) + " vertices, expected " +
                                                std::to_string(ref.num_vertices())});
            continue;
        }
        if (mesh.num_faces() != ref.num_faces()) {
            report.issues.push_back({m, -1, "mesh " + std::to_string(m) + " has " +
                                                std::to_string(mesh.num_faces()) + " faces, expected " +
                                                std::to_string(ref.num_faces())});
            continue;
        }
        for (Eigen::Index f = 0; f < ref.num_faces(); ++f) {
            if (mesh.faces.row(f) != ref.faces.row(f)) {
                report.issues.push_back(
                    {m, f, "mesh " + std::to_string(m) + " differs from mesh 0 at face " + std::to_string(f)});
                break;
            }
        }
    }
    return report;
}

inline ValidationReport validate_blendshape_topology(const std::vector<TriMesh>& meshes)
{
    return validate_blendshape_topology(std::span<const TriMesh>(meshes.data(), meshes.size()));
}

inline bool same_topology(const TriMesh& a, const TriMesh& b)
{
    return a.num_vertices() == b.num_vertices() && a.num_faces() == b.num_faces() && a.faces == b.faces;
}

/// Per-vertex Euclidean norms of a vector field.
inline ScalarField row_norms(const VectorField& field)
{
    return field.rowwise().norm();
}

} // namespace cariblend
