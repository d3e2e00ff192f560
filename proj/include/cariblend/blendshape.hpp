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
#include "cariblend/face_model.hpp"
#include "cariblend/mesh.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace cariblend {

/// Number of expression shapes in a full set; index 0 is the neutral expression.
inline constexpr std::size_t kDefaultBlendshapeCount = 47;

/// Residuals below this fraction of the base bounding-box diagonal count as zero.
inline constexpr double kZeroResidualRatio = 1e-9;

/**
 * A base shape plus expression shapes sharing its topology. deltas[i] is
 * shapes[i] - base and is kept in sync by compute_residuals.
 */
struct BlendshapeSet {
    TriMesh base;
    std::vector<TriMesh> shapes;
    std::vector<VectorField> deltas;
    std::vector<ExpressionCoeffs> expression_bank;

    std::size_t size() const { return shapes.size(); }
};

/// Recomputes deltas[i] = shapes[i] - base. Throws TopologyMismatch.
inline void compute_residuals(BlendshapeSet& set)
{
    set.deltas.clear();
    set.deltas.reserve(set.shapes.size());
    for (std::size_t i = 0; i < set.shapes.size(); ++i) {
        if (!same_topology(set.shapes[i], set.base)) {
            throw Error(ErrorCode::TopologyMismatch, "shape " + std::to_string(i) + " does not share the base topology");
        }
        set.deltas.push_back(set.shapes[i].vertices - set.base.vertices);
    }
}

/// Builds a set from a base and shapes and fills in the residuals.
inline BlendshapeSet make_blendshape_set(TriMesh base, std::vector<TriMesh> shapes,
                                         std::vector<ExpressionCoeffs> bank = {})
{
    BlendshapeSet set{std::move(base), std::move(shapes), {}, std::move(bank)};
    compute_residuals(set);
    return set;
}

/// Zero-norm threshold used for a set whose base has the given vertices.
inline double zero_residual_epsilon(const Vertices& base)
{
    return kZeroResidualRatio * bounding_box_diagonal(base);
}

/// Per-vertex displacement intensity: m_n = |d_n| / max_k |d_k|, or all zeros
/// when the largest displacement is below floor_epsilon.
inline ScalarField displacement_mask(const VectorField& normal_delta, double floor_epsilon)
{
    ScalarField norms = row_norms(normal_delta);
    const double peak = norms.size() > 0 ? norms.maxCoeff() : 0.0;
    if (!(peak >= floor_epsilon) || peak == 0.0) {
        return ScalarField::Zero(normal_delta.rows());
    }
    return norms / peak;
}

inline std::vector<ScalarField> displacement_masks(const std::vector<VectorField>& normal_deltas, double floor_epsilon)
{
    std::vector<ScalarField> masks;
    masks.reserve(normal_deltas.size());
    for (const auto& d : normal_deltas) {
        masks.push_back(displacement_mask(d, floor_epsilon));
    }
    return masks;
}

/// Per-vertex scalar-times-vector product M * D.
inline VectorField apply_mask(const ScalarField& mask, const VectorField& delta)
{
    if (mask.size() != delta.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "mask length differs from delta rows");
    }
    return delta.array().colwise() * mask.array();
}

struct StructureWeights {
    /// Raw cosines in [-1, 1]; zero for pairs involving a zero residual.
    Eigen::MatrixXd raw;
    /// raw with negative entries clamped to zero; this is what the energy uses.
    Eigen::MatrixXd clamped;
};

/// Pairwise cosine similarity of the flattened normal-face residuals.
inline StructureWeights structure_weights(const std::vector<VectorField>& normal_deltas, double zero_epsilon)
{
    const auto count = static_cast<Eigen::Index>(normal_deltas.size());
    Eigen::VectorXd norms(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        if (i > 0 && normal_deltas[i].size() != normal_deltas[0].size()) {
            throw Error(ErrorCode::DimensionMismatch, "residual " + std::to_string(i) + " has a different length");
        }
        norms(i) = flatten(normal_deltas[i]).norm();
    }
    StructureWeights w;
    w.raw = Eigen::MatrixXd::Zero(count, count);
    for (Eigen::Index i = 0; i < count; ++i) {
        if (norms(i) < zero_epsilon || norms(i) == 0.0) {
            continue;
        }
        w.raw(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < count; ++j) {
            if (norms(j) < zero_epsilon || norms(j) == 0.0) {
                continue;
            }
            const double c = flatten(normal_deltas[i]).dot(flatten(normal_deltas[j])) / (norms(i) * norms(j));
            w.raw(i, j) = w.raw(j, i) = std::clamp(c, -1.0, 1.0);
        }
    }
    w.clamped = w.raw.cwiseMax(0.0);
    return w;
}

} // namespace cariblend
