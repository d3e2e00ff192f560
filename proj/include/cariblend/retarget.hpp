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

#include "cariblend/blendshape.hpp"
#include "cariblend/error.hpp"
#include "cariblend/face_model.hpp"
#include "cariblend/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace cariblend {

/// Weights on shapes 1..B-1, each relative to the neutral shape 0.
struct BlendWeights {
    Eigen::VectorXd values;
};

struct RegressOptions {
    bool clamp = false;
    double ridge = 0.0;
};

namespace detail {

// Columns are S_i - S_0 for i = 1..B-1, flattened.
inline Eigen::MatrixXd neutral_relative_deltas(const BlendshapeSet& set)
{
    const auto count = static_cast<Eigen::Index>(set.size());
    const Eigen::Index rows = 3 * set.shapes.front().num_vertices();
    Eigen::MatrixXd deltas(rows, count - 1);
    const auto neutral = flatten(set.shapes.front().vertices);
    for (Eigen::Index i = 1; i < count; ++i) {
        deltas.col(i - 1) = flatten(set.shapes[static_cast<std::size_t>(i)].vertices) - neutral;
    }
    return deltas;
}

inline Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double ridge)
{
    const Eigen::Index cols = a.cols();
    if (cols == 0) {
        return Eigen::VectorXd(0);
    }
    if (ridge > 0.0) {
        Eigen::MatrixXd stacked(a.rows() + cols, cols);
        stacked << a, std::sqrt(ridge) * Eigen::MatrixXd::Identity(cols, cols);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a.rows() + cols);
        rhs.head(a.rows()) = b;
        return stacked.colPivHouseholderQr().solve(rhs);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < cols) {
        throw Error(ErrorCode::RankDeficient, "blendshape delta matrix has rank " + std::to_string(qr.rank()) + " < " +
                                                  std::to_string(cols) + "; set a positive ridge");
    }
    return qr.solve(b);
}

} // namespace detail

/**
 * Least-squares blend weights reproducing `target - S_0` from the deltas
 * S_i - S_0 of a (normal-face) set. With clamping, the unconstrained solution
 * is projected onto [0, 1], the free entries are re-solved once with the
 * clamped entries held at their bounds, and the result is projected again.
 */
inline BlendWeights regress_weights(const BlendshapeSet& normal_set, const TriMesh& target, const RegressOptions& options = {})
{
    if (normal_set.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "weight regression needs at least two shapes");
    }
    if (!same_topology(target, normal_set.shapes.front())) {
        throw Error(ErrorCode::TopologyMismatch, "target does not share the blendshape topology");
    }
    if (options.ridge < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "ridge must be nonnegative");
    }
    const Eigen::MatrixXd deltas = detail::neutral_relative_deltas(normal_set);
    const Eigen::VectorXd rhs = flatten(target.vertices) - flatten(normal_set.shapes.front().vertices);
    Eigen::VectorXd w = detail::ridge_solve(deltas, rhs, options.ridge);

    if (options.clamp) {
        const Eigen::VectorXd projected = w.cwiseMax(0.0).cwiseMin(1.0);
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (w(i) >= 0.0 && w(i) <= 1.0) {
                free.push_back(i);
            }
        }
        w = projected;
        if (!free.empty() && free.size() < static_cast<std::size_t>(w.size())) {
            Eigen::VectorXd residual = rhs;
            Eigen::MatrixXd free_cols(deltas.rows(), static_cast<Eigen::Index>(free.size()));
            std::size_t next = 0;
            for (Eigen::Index i = 0; i < w.size(); ++i) {
                if (next < free.size() && free[next] == i) {
                    free_cols.col(static_cast<Eigen::Index>(next++)) = deltas.col(i);
                } else {
                    residual -= w(i) * deltas.col(i);
                }
            }
            const Eigen::VectorXd resolved = detail::ridge_solve(free_cols, residual, options.ridge);
            for (std::size_t k = 0; k < free.size(); ++k) {
                w(free[k]) = std::clamp(resolved(static_cast<Eigen::Index>(k)), 0.0, 1.0);
            }
        }
    }
    return {w};
}

/// S(e_r) = S_0 + sum_i w_i (S_i - S_0). Shapes must share the topology of S_0.
inline TriMesh compose_shape(const BlendshapeSet& set, const BlendWeights& w)
{
    if (set.size() == 0 || w.values.size() != static_cast<Eigen::Index>(set.size()) - 1) {
        throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(set.size() == 0 ? 0 : set.size() - 1) +
                                                      " weights, got " + std::to_string(w.values.size()));
    }
    // Evaluated as (1 - sum w) S_0 + sum w_i S_i.
    const TriMesh& neutral = set.shapes.front();
    TriMesh out = neutral;
    out.vertices = (1.0 - w.values.sum()) * neutral.vertices;
    for (std::size_t i = 1; i < set.size(); ++i) {
        const double wi = w.values(static_cast<Eigen::Index>(i) - 1);
        if (wi != 0.0) {
            out.vertices += wi * set.shapes[i].vertices;
        }
    }
    return out;
}

} // namespace cariblend
