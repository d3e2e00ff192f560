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

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

namespace cariblend {

struct IdentityCoeffs {
    Eigen::VectorXd values;
};

struct ExpressionCoeffs {
    Eigen::VectorXd values;
};

/// K image-plane points, one per row.
struct LandmarkSet {
    Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> points;

    Eigen::Index size() const { return points.rows(); }
};

/**
 * Linear morphable model: shape = mean + id_basis * alpha_id + exp_basis * alpha_exp.
 * Basis columns are interleaved 3N vectors matching the row-major vertex layout.
 */
struct LinearFaceModel {
    TriMesh mean;
    Eigen::MatrixXd id_basis;
    Eigen::MatrixXd exp_basis;
    std::vector<int> landmark_indices;

    Eigen::Index num_vertices() const { return mean.num_vertices(); }
    Eigen::Index num_identity() const { return id_basis.cols(); }
    Eigen::Index num_expression() const { return exp_basis.cols(); }
};

inline void validate(const LinearFaceModel& model)
{
    validate(model.mean);
    const Eigen::Index rows = 3 * model.num_vertices();
    if (model.id_basis.rows() != rows || model.exp_basis.rows() != rows) {
        throw Error(ErrorCode::DimensionMismatch, "basis rows must equal 3N = " + std::to_string(rows));
    }
    if (model.num_identity() < 1 || model.num_expression() < 1) {
        throw Error(ErrorCode::InvalidArgument, "identity and expression bases need at least one column");
    }
    std::set<int> seen;
    for (int idx : model.landmark_indices) {
        if (idx < 0 || idx >= model.num_vertices() || !seen.insert(idx).second) {
            throw Error(ErrorCode::InvalidArgument, "landmark index " + std::to_string(idx) +
                                                        " is out of range or repeated");
        }
    }
}

inline TriMesh evaluate(const LinearFaceModel& model, const IdentityCoeffs& id, const ExpressionCoeffs& exp)
{
    if (id.values.size() != model.num_identity()) {
        throw Error(ErrorCode::DimensionMismatch, "identity coefficients have length " +
                                                      std::to_string(id.values.size()) + ", model has " +
                                                      std::to_string(model.num_identity()));
    }
    if (exp.values.size() != model.num_expression()) {
        throw Error(ErrorCode::DimensionMismatch, "expression coefficients have length " +
                                                      std::to_string(exp.values.size()) + ", model has " +
                                                      std::to_string(model.num_expression()));
    }
    TriMesh out = model.mean;
    const Eigen::VectorXd flat = flatten(model.mean.vertices) + model.id_basis * id.values + model.exp_basis * exp.values;
    out.vertices = unflatten(flat);
    return out;
}

/// Re-evaluates with identity held fixed and the expression replaced.
inline TriMesh swap_expression(const LinearFaceModel& model, const IdentityCoeffs& id,
                               const ExpressionCoeffs& new_exp)
{
    return evaluate(model, id, new_exp);
}

/**
 * Weak-perspective camera q = Pi * R * p + t with Pi = scale * [I2 | 0].
 */
struct Camera {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();

    Eigen::Matrix<double, 2, 3> projection() const
    {
        Eigen::Matrix<double, 2, 3> pi = Eigen::Matrix<double, 2, 3>::Zero();
        pi(0, 0) = scale;
        pi(1, 1) = scale;
        return pi;
    }

    /// The 2x3 map Pi * R.
    Eigen::Matrix<double, 2, 3> linear() const { return scale * rotation.topRows<2>(); }
};

inline void validate(const Camera& cam)
{
    if (!(cam.scale > 0.0) || !std::isfinite(cam.scale)) {
        throw Error(ErrorCode::InvalidArgument, "camera scale must be positive");
    }
    const double orth = (cam.rotation.transpose() * cam.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (orth > 1e-8 || std::abs(cam.rotation.determinant() - 1.0) > 1e-8) {
        throw Error(ErrorCode::InvalidArgument, "camera rotation is not a proper rotation");
    }
}

inline LandmarkSet project(const Camera& cam, const Vertices& points)
{
    LandmarkSet out;
    out.points = (points * cam.linear().transpose()).rowwise() + cam.translation.transpose();
    return out;
}

inline LandmarkSet project(const Camera& cam, const TriMesh& mesh)
{
    return project(cam, mesh.vertices);
}

/// Projects only the listed vertices, in list order.
inline LandmarkSet project(const Camera& cam, const TriMesh& mesh, const std::vector<int>& indices)
{
    Vertices subset(static_cast<Eigen::Index>(indices.size()), 3);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] < 0 || indices[k] >= mesh.num_vertices()) {
            throw Error(ErrorCode::InvalidArgument, "vertex index " + std::to_string(indices[k]) + " out of range");
        }
        subset.row(static_cast<Eigen::Index>(k)) = mesh.vertices.row(indices[k]);
    }
    return project(cam, subset);
}

} // namespace cariblend
