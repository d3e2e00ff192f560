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

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <vector>

namespace cariblend {

/// Landmark RMS in pixels: sqrt(mean over landmarks of squared 2D error).
inline double landmark_rms(const LandmarkSet& predicted, const LandmarkSet& observed)
{
    if (predicted.size() != observed.size() || predicted.size() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "landmark counts differ");
    }
    return std::sqrt((predicted.points - observed.points).squaredNorm() / static_cast<double>(observed.size()));
}

/**
 * Orthographic Procrustes: the weak-perspective camera best aligning 3D points
 * to 2D observations. The rotation comes from the SVD of the 2x3
 * cross-covariance, completed to a proper rotation; scale and translation are
 * then the least-squares optimum for that rotation.
 */
inline Camera orthographic_procrustes(const Vertices& points, const LandmarkSet& observed)
{
    const Eigen::Index k = points.rows();
    if (k != observed.size() || k < 3) {
        throw Error(ErrorCode::DimensionMismatch, "Procrustes needs matching point sets of size >= 3");
    }
    const Eigen::RowVector3d p_mean = points.colwise().mean();
    const Eigen::RowVector2d q_mean = observed.points.colwise().mean();
    const Eigen::MatrixXd p_centered = points.rowwise() - p_mean;
    const Eigen::MatrixXd q_centered = observed.points.rowwise() - q_mean;
    const Eigen::Matrix<double, 2, 3> cross = q_centered.transpose() * p_centered;

    Eigen::JacobiSVD<Eigen::Matrix<double, 2, 3>> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix<double, 2, 3> rows = svd.matrixU() * svd.matrixV().leftCols<2>().transpose();

    Camera cam;
    cam.rotation.row(0) = rows.row(0);
    cam.rotation.row(1) = rows.row(1);
    cam.rotation.row(2) = rows.row(0).cross(rows.row(1));

    const Eigen::MatrixXd rotated = p_centered * rows.transpose();
    const double denom = rotated.squaredNorm();
    const double numer = (rotated.array() * q_centered.array()).sum();
    cam.scale = denom > 0.0 && numer > 0.0 ? numer / denom : 1.0;
    cam.translation = (q_mean - cam.scale * (p_mean * rows.transpose())).transpose();
    return cam;
}

namespace detail {

inline double camera_cost(const Camera& cam, const Vertices& points, const LandmarkSet& observed)
{
    return (project(cam, points).points - observed.points).squaredNorm();
}

// Levenberg-Marquardt over (scale, rotation increment, translation). Only
// steps that lower the cost are taken; the result is never worse than `cam`.
inline Camera refine_camera(Camera cam, const Vertices& points, const LandmarkSet& observed, int iterations = 30)
{
    const Eigen::Index k = points.rows();
    double cost = camera_cost(cam, points, observed);
    double damping = 1e-3;
    for (int it = 0; it < iterations && cost > 0.0; ++it) {
        Eigen::MatrixXd jac(2 * k, 6);
        Eigen::VectorXd res(2 * k);
        const Eigen::Matrix<double, 2, 3> r12 = cam.rotation.topRows<2>();
        for (Eigen::Index i = 0; i < k; ++i) {
            const Eigen::Vector3d p = points.row(i).transpose();
            const Eigen::Vector3d rp = cam.rotation * p;
            res.segment<2>(2 * i) = cam.scale * (r12 * p) + cam.translation - observed.points.row(i).transpose();
            jac.block<2, 1>(2 * i, 0) = r12 * p;
            // d(R p) / d omega = -[R p]_x for R <- exp([omega]_x) R
            Eigen::Matrix3d skew;
            skew << 0, -rp.z(), rp.y(), rp.z(), 0, -rp.x(), -rp.y(), rp.x(), 0;
            jac.block<2, 3>(2 * i, 1) = -cam.scale * skew.topRows<2>();
            jac.block<2, 2>(2 * i, 4) = Eigen::Matrix2d::Identity();
        }
        const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
        const Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * res;
        bool improved = false;
        for (int attempt = 0; attempt < 10; ++attempt) {
            Eigen::Matrix<double, 6, 6> lhs = jtj;
            lhs.diagonal() += damping * jtj.diagonal().cwiseMax(1e-12 * jtj.diagonal().maxCoeff());
            const Eigen::Matrix<double, 6, 1> step = -lhs.ldlt().solve(jtr);
            Camera trial = cam;
            trial.scale = cam.scale + step(0);
            const Eigen::Vector3d omega = step.segment<3>(1);
            if (omega.norm() > 0.0) {
                trial.rotation = Eigen::AngleAxisd(omega.norm(), omega.normalized()).toRotationMatrix() * cam.rotation;
            }
            trial.translation = cam.translation + step.segment<2>(4);
            const double trial_cost = trial.scale > 0.0 ? camera_cost(trial, points, observed)
                                                        : std::numeric_limits<double>::infinity();
            if (trial_cost < cost) {
                // Re-orthonormalize to keep R a proper rotation after many updates.
                Eigen::JacobiSVD<Eigen::Matrix3d> svd(trial.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
                trial.rotation = svd.matrixU() * svd.matrixV().transpose();
                const double cleaned = camera_cost(trial, points, observed);
                if (cleaned < cost) {
                    cam = trial;
                    cost = cleaned;
                    damping = std::max(damping * 0.3, 1e-12);
                    improved = true;
                    break;
                }
            }
            damping *= 10.0;
        }
        if (!improved) {
            break;
        }
    }
    return cam;
}

} // namespace detail

struct FitOptions {
    /// Ridge weights, relative to the mean diagonal of the normal matrix.
    double reg_id = 1e-4;
    double reg_exp = 1e-4;
    int max_iterations = 50;
    /// Stop once an iteration improves the landmark RMS by less than this.
    double tolerance = 1e-6;
};

struct FitResult {
    IdentityCoeffs id;
    ExpressionCoeffs exp;
    Camera camera;
    double rms = 0.0;
    int iterations = 0;
    bool converged = false;
    /// RMS after initialization followed by one entry per iteration.
    std::vector<double> rms_history;
};

/**
 * Ridge-regularized linear coefficient solve for a fixed camera. Returns the
 * stacked [alpha_id; alpha_exp].
 */
inline Eigen::VectorXd solve_coefficients(const LinearFaceModel& model, const Camera& cam,
                                          const LandmarkSet& observed, double reg_id, double reg_exp)
{
    const Eigen::Index p = model.num_identity();
    const Eigen::Index d = model.num_expression();
    const Eigen::Index k = observed.size();
    const Eigen::Matrix<double, 2, 3> lin = cam.linear();

    Eigen::MatrixXd a(2 * k, p + d);
    Eigen::VectorXd b(2 * k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const int v = model.landmark_indices[static_cast<std::size_t>(i)];
        a.block(2 * i, 0, 2, p) = lin * model.id_basis.middleRows(3 * v, 3);
        a.block(2 * i, p, 2, d) = lin * model.exp_basis.middleRows(3 * v, 3);
        const Eigen::Vector3d mean = model.mean.vertices.row(v).transpose();
        b.segment<2>(2 * i) = observed.points.row(i).transpose() - cam.translation - lin * mean;
    }
    Eigen::MatrixXd normal = a.transpose() * a;
    const double tau = normal.trace() / static_cast<double>(p + d);
    normal.diagonal().head(p).array() += reg_id * tau;
    normal.diagonal().tail(d).array() += reg_exp * tau;
    const Eigen::VectorXd rhs = a.transpose() * b;

    if (reg_id > 0.0 && reg_exp > 0.0) {
        Eigen::LLT<Eigen::MatrixXd> llt(normal);
        // Positive ridge on every column makes the normal matrix SPD.
        if (llt.info() == Eigen::Success) {
            return llt.solve(rhs);
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
    if (qr.rank() < p + d) {
        throw Error(ErrorCode::RankDeficient, "landmark system has rank " + std::to_string(qr.rank()) + " < " +
                                                  std::to_string(p + d) + " unknowns");
    }
    return qr.solve(rhs);
}

/**
 * Alternating fit of camera and model coefficients to 2D landmarks:
 * (a) camera by orthographic Procrustes plus rigid refinement on the current
 * landmark vertices, (b) coefficients by ridge least squares. A step is only
 * accepted if it does not raise the landmark RMS.
 */
inline FitResult fit_landmarks(const LinearFaceModel& model, const LandmarkSet& observed, const FitOptions& options = {})
{
    validate(model);
    const auto k = static_cast<Eigen::Index>(model.landmark_indices.size());
    if (k < 4) {
        throw Error(ErrorCode::InvalidArgument, "fitting needs at least 4 landmarks, model has " + std::to_string(k));
    }
    if (observed.size() != k) {
        throw Error(ErrorCode::DimensionMismatch, "observed " + std::to_string(observed.size()) +
                                                      " landmarks, model defines " + std::to_string(k));
    }
    if (options.reg_id < 0.0 || options.reg_exp < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "regularization weights must be nonnegative");
    }

    const Eigen::Index p = model.num_identity();
    const Eigen::Index d = model.num_expression();
    FitResult result;
    result.id.values = Eigen::VectorXd::Zero(p);
    result.exp.values = Eigen::VectorXd::Zero(d);

    auto landmark_vertices = [&](const IdentityCoeffs& id, const ExpressionCoeffs& exp) {
        const TriMesh shape = evaluate(model, id, exp);
        Vertices pts(k, 3);
        for (Eigen::Index i = 0; i < k; ++i) {
            pts.row(i) = shape.vertices.row(model.landmark_indices[static_cast<std::size_t>(i)]);
        }
        return pts;
    };

    Vertices current = landmark_vertices(result.id, result.exp);
    result.camera = detail::refine_camera(orthographic_procrustes(current, observed), current, observed);
    result.rms = landmark_rms(project(result.camera, current), observed);
    result.rms_history.push_back(result.rms);

    for (int it = 0; it < options.max_iterations; ++it) {
        const double before = result.rms;

        const Eigen::VectorXd coeffs = solve_coefficients(model, result.camera, observed, options.reg_id, options.reg_exp);
        IdentityCoeffs id{coeffs.head(p)};
        ExpressionCoeffs exp{coeffs.tail(d)};
        Vertices moved = landmark_vertices(id, exp);
        const double coeff_rms = landmark_rms(project(result.camera, moved), observed);
        if (coeff_rms <= result.rms) {
            result.id = std::move(id);
            result.exp = std::move(exp);
            current = std::move(moved);
            result.rms = coeff_rms;
        }

        Camera from_prev = detail::refine_camera(result.camera, current, observed);
        Camera from_procrustes = detail::refine_camera(orthographic_procrustes(current, observed), current, observed);
        const double prev_cost = detail::camera_cost(from_prev, current, observed);
        const double proc_cost = detail::camera_cost(from_procrustes, current, observed);
        const Camera& best = proc_cost < prev_cost ? from_procrustes : from_prev;
        const double cam_rms = landmark_rms(project(best, current), observed);
        if (cam_rms <= result.rms) {
            result.camera = best;
            result.rms = cam_rms;
        }

        result.iterations = it + 1;
        result.rms_history.push_back(result.rms);
        if (before - result.rms < options.tolerance) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace cariblend
