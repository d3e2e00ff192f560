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
#include "cariblend/laplacian.hpp"
#include "cariblend/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace cariblend {

/**
 * Laplacian surface editing with soft handles:
 *
 *   min_V |L (V - V0)|^2 + w sum_h |v_h - target_h|^2
 *
 * The system matrix L^T L + w S is factorized once per template and handle
 * set and reused for every target configuration.
 */
class HandleDeformer {
public:
    HandleDeformer(TriMesh templ, std::vector<int> handles, double handle_weight, Warnings* warnings = nullptr)
        : template_(std::move(templ)), handles_(std::move(handles)), weight_(handle_weight)
    {
        if (!(handle_weight > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "handle weight must be positive");
        }
        const Eigen::Index n = template_.num_vertices();
        std::set<int> seen;
        for (int h : handles_) {
            if (h < 0 || h >= n || !seen.insert(h).second) {
                throw Error(ErrorCode::InvalidArgument, "handle index " + std::to_string(h) + " is out of range or repeated");
            }
        }
        check_components();

        const SparseMatrix lap = build_cotangent_laplacian(template_, warnings);
        ltl_ = SparseMatrix(lap.transpose()) * lap;
        SparseMatrix system = ltl_;
        for (int h : handles_) {
            system.coeffRef(h, h) += weight_;
        }
        solver_.compute(system);
        if (solver_.info() != Eigen::Success) {
            throw Error(ErrorCode::SingularSystem, "handle deformation system could not be factorized");
        }
        rest_term_ = ltl_ * template_.vertices;
    }

    const TriMesh& templ() const { return template_; }
    const std::vector<int>& handles() const { return handles_; }

    /// `targets` holds one 3D point per handle, in handle order.
    TriMesh deform(const Vertices& targets) const
    {
        if (targets.rows() != static_cast<Eigen::Index>(handles_.size())) {
            throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(handles_.size()) +
                                                          " handle targets, got " + std::to_string(targets.rows()));
        }
        Eigen::MatrixXd rhs = rest_term_;
        for (std::size_t k = 0; k < handles_.size(); ++k) {
            rhs.row(handles_[k]) += weight_ * targets.row(static_cast<Eigen::Index>(k));
        }
        TriMesh out = template_;
        out.vertices = solver_.solve(rhs);
        if (solver_.info() != Eigen::Success) {
            throw Error(ErrorCode::SingularSystem, "handle deformation solve failed");
        }
        return out;
    }

private:
    // Every connected component needs a handle.
    void check_components() const
    {
        const auto n = static_cast<std::size_t>(template_.num_vertices());
        std::vector<std::size_t> parent(n);
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        auto find = [&](std::size_t v) {
            while (parent[v] != v) {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            return v;
        };
        for (Eigen::Index f = 0; f < template_.num_faces(); ++f) {
            for (int k = 0; k < 3; ++k) {
                const std::size_t a = find(static_cast<std::size_t>(template_.faces(f, k)));
                const std::size_t b = find(static_cast<std::size_t>(template_.faces(f, (k + 1) % 3)));
                if (a != b) {
                    parent[a] = b;
                }
            }
        }
        std::set<std::size_t> anchored;
        for (int h : handles_) {
            anchored.insert(find(static_cast<std::size_t>(h)));
        }
        for (std::size_t v = 0; v < n; ++v) {
            if (!anchored.contains(find(v))) {
                throw Error(ErrorCode::SingularSystem, "vertex " + std::to_string(v) +
                                                           " lies in a component without handles");
            }
        }
    }

    TriMesh template_;
    std::vector<int> handles_;
    double weight_;
    SparseMatrix ltl_;
    Eigen::MatrixXd rest_term_;
    Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

inline TriMesh landmark_deform(const TriMesh& templ, const std::vector<int>& handle_indices, const Vertices& targets,
                               double handle_weight)
{
    return HandleDeformer(templ, handle_indices, handle_weight).deform(targets);
}

} // namespace cariblend
