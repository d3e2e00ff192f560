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
#include "cariblend/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cariblend {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Faces whose area is below this fraction of the mean face area are rejected.
inline constexpr double kDegenerateAreaRatio = 1e-12;

/**
 * Unnormalized symmetric cotangent Laplacian (positive semi-definite sign
 * convention): L_ij = -w_ij, L_ii = sum_j w_ij, where w_ij is half the sum of
 * the cotangents of the angles opposite edge (i, j). Boundary edges keep their
 * single cotangent, and obtuse angles yield negative weights which are kept.
 *
 * Throws DegenerateFace for near-zero-area triangles. Edges shared by more than
 * two faces are reported to \p warnings and still accumulate per incident face.
 */
inline SparseMatrix build_cotangent_laplacian(const TriMesh& mesh, Warnings* warnings = nullptr)
{
    validate(mesh);
    const Eigen::Index n = mesh.num_vertices();
    const Eigen::Index num_faces = mesh.num_faces();

    std::vector<double> areas(static_cast<std::size_t>(num_faces));
    double total_area = 0.0;
    for (Eigen::Index f = 0; f < num_faces; ++f) {
        const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
        const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
        const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
        areas[f] = 0.5 * (b - a).cross(c - a).norm();
        total_area += areas[f];
    }
    const double mean_area = num_faces > 0 ? total_area / static_cast<double>(num_faces) : 0.0;
    for (Eigen::Index f = 0; f < num_faces; ++f) {
        if (!(areas[f] > kDegenerateAreaRatio * mean_area) || mean_area == 0.0) {
            throw Error(ErrorCode::DegenerateFace,
                        "face " + std::to_string(f) + " has area " + std::to_string(areas[f]));
        }
    }

    if (warnings != nullptr) {
        std::map<std::pair<int, int>, int> edge_faces;
        for (Eigen::Index f = 0; f < num_faces; ++f) {
            for (int k = 0; k < 3; ++k) {
                int i = mesh.faces(f, k), j = mesh.faces(f, (k + 1) % 3);
                if (i > j) {
                    std::swap(i, j);
                }
                ++edge_faces[{i, j}];
            }
        }
        for (const auto& [edge, count] : edge_faces) {
            if (count > 2) {
                warn(warnings, "non-manifold edge (" + std::to_string(edge.first) + ", " +
                                   std::to_string(edge.second) + ") shared by " + std::to_string(count) +
                                   " faces");
            }
        }
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(num_faces) * 12);
    for (Eigen::Index f = 0; f < num_faces; ++f) {
        for (int k = 0; k < 3; ++k) {
            const int opp = mesh.faces(f, k);
            const int i = mesh.faces(f, (k + 1) % 3);
            const int j = mesh.faces(f, (k + 2) % 3);
            const Eigen::Vector3d u = mesh.vertices.row(i) - mesh.vertices.row(opp);
            const Eigen::Vector3d v = mesh.vertices.row(j) - mesh.vertices.row(opp);
            const double half_cot = 0.5 * u.dot(v) / u.cross(v).norm();
            triplets.emplace_back(i, j, -half_cot);
            triplets.emplace_back(j, i, -half_cot);
            triplets.emplace_back(i, i, half_cot);
            triplets.emplace_back(j, j, half_cot);
        }
    }
    SparseMatrix laplacian(n, n);
    laplacian.setFromTriplets(triplets.begin(), triplets.end());
    laplacian.makeCompressed();
    return laplacian;
}

/// Applies L to each coordinate channel of a per-vertex vector field.
inline VectorField apply_laplacian(const SparseMatrix& laplacian, const VectorField& field)
{
    if (field.rows() != laplacian.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "field has " + std::to_string(field.rows()) +
                                                      " rows, Laplacian is " + std::to_string(laplacian.cols()));
    }
    return laplacian * field;
}

inline ScalarField apply_laplacian(const SparseMatrix& laplacian, const ScalarField& field)
{
    if (field.size() != laplacian.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "field has " + std::to_string(field.size()) +
                                                      " entries, Laplacian is " + std::to_string(laplacian.cols()));
    }
    return laplacian * field;
}

} // namespace cariblend
