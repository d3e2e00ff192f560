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

// Shared fixtures and independent reference implementations for the tests.

#pragma once

#include "cariblend/blendshape.hpp"
#include "cariblend/mesh.hpp"
#include "cariblend/optimize.hpp"
#include "cariblend/toy_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace cariblend::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sigma = 1.0)
{
    std::normal_distribution<double> g(0.0, sigma);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = g(rng);
        }
    }
    return m;
}

inline VectorField random_field(Eigen::Index n, std::mt19937_64& rng, double sigma = 1.0)
{
    return VectorField(random_matrix(n, 3, rng, sigma));
}

/// Grid mesh with vertices jittered in all three axes.
inline TriMesh jittered_grid(int nx, int ny, std::mt19937_64& rng, double jitter = 0.02)
{
    TriMesh mesh = make_grid(nx, ny, 0.1, 0.2);
    std::uniform_real_distribution<double> u(-jitter, jitter);
    for (Eigen::Index v = 0; v < mesh.num_vertices(); ++v) {
        for (int c = 0; c < 3; ++c) {
            mesh.vertices(v, c) += u(rng);
        }
    }
    return mesh;
}

inline BlendshapeSet set_from_deltas(const TriMesh& base, const std::vector<VectorField>& deltas)
{
    BlendshapeSet set;
    set.base = base;
    for (const auto& d : deltas) {
        TriMesh s = base;
        s.vertices = base.vertices + d;
        set.shapes.push_back(std::move(s));
    }
    compute_residuals(set);
    return set;
}

/// A caricature set and a normal set on jittered grids with smooth-ish random residuals.
struct OptimizationInstance {
    BlendshapeSet caricature;
    BlendshapeSet normal;
};

inline OptimizationInstance random_instance(std::uint64_t seed, int nx, int ny, int shapes)
{
    std::mt19937_64 rng(seed);
    OptimizationInstance inst;
    const TriMesh cari_base = jittered_grid(nx, ny, rng);
    const TriMesh normal_base = jittered_grid(nx, ny, rng);
    const Eigen::Index n = cari_base.num_vertices();
    std::vector<VectorField> cari_deltas, normal_deltas;
    // Shared components make some structure weights positive and some negative.
    const VectorField shared = random_field(n, rng, 0.05);
    std::uniform_real_distribution<double> coin(-1.0, 1.0);
    for (int i = 0; i < shapes; ++i) {
        const double s = coin(rng);
        normal_deltas.push_back(s * shared + random_field(n, rng, 0.02));
        cari_deltas.push_back(1.5 * normal_deltas.back() + random_field(n, rng, 0.02));
    }
    inst.caricature = set_from_deltas(cari_base, cari_deltas);
    inst.normal = set_from_deltas(normal_base, normal_deltas);
    return inst;
}

/// Cotangent of the angle at p between rays to q and r, via atan2.
inline double cot_at(const Eigen::Vector3d& p, const Eigen::Vector3d& q, const Eigen::Vector3d& r)
{
    const Eigen::Vector3d a = q - p, b = r - p;
    const double angle = std::atan2(a.cross(b).norm(), a.dot(b));
    return 1.0 / std::tan(angle);
}

/// Dense cotangent Laplacian by visiting each face's three corners.
inline Eigen::MatrixXd laplacian_oracle(const TriMesh& mesh)
{
    const Eigen::Index n = mesh.num_vertices();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        for (int corner = 0; corner < 3; ++corner) {
            const int o = mesh.faces(f, corner);
            const int i = mesh.faces(f, (corner + 1) % 3);
            const int j = mesh.faces(f, (corner + 2) % 3);
            const double w = 0.5 * cot_at(mesh.vertices.row(o).transpose(), mesh.vertices.row(i).transpose(),
                                          mesh.vertices.row(j).transpose());
            l(i, j) -= w;
            l(j, i) -= w;
            l(i, i) += w;
            l(j, j) += w;
        }
    }
    return l;
}

/// Dense evaluation of every energy term straight from the definitions.
inline EnergyBreakdown energy_oracle(const Eigen::MatrixXd& l, const std::vector<VectorField>& x,
                                     const std::vector<VectorField>& targets, const Eigen::MatrixXd& w,
                                     const OptimizationConfig& cfg)
{
    EnergyBreakdown e;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Eigen::MatrixXd xi = x[i], ti = targets[i];
        e.def += (l * (xi - ti)).squaredNorm();
        e.smo += (l * xi).squaredNorm();
        e.prox += (xi - ti).squaredNorm();
        for (std::size_t j = 0; j < x.size(); ++j) {
            e.str += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (xi - Eigen::MatrixXd(x[j])).squaredNorm();
        }
    }
    e.total = cfg.lambda_def * e.def + cfg.lambda_str * e.str + cfg.lambda_smo * e.smo + cfg.prox_epsilon * e.prox;
    return e;
}

/**
 * Minimizer of the energy by a dense solve of its normal equations, built by
 * differentiating each term separately:
 *   (l_def + l_smo) L^T L x_i + eps x_i + 2 l_str sum_j w_ij (x_i - x_j)
 *     = l_def L^T L t_i + eps t_i.
 */
inline std::vector<VectorField> dense_minimizer_oracle(const Eigen::MatrixXd& l, const std::vector<VectorField>& targets,
                                                       const Eigen::MatrixXd& w, const OptimizationConfig& cfg)
{
    const auto b = static_cast<Eigen::Index>(targets.size());
    const Eigen::Index n = l.rows();
    const Eigen::MatrixXd ltl = l.transpose() * l;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(b * n, b * n);
    Eigen::MatrixXd rhs(b * n, 3);
    for (Eigen::Index i = 0; i < b; ++i) {
        h.block(i * n, i * n, n, n) += (cfg.lambda_def + cfg.lambda_smo) * ltl + cfg.prox_epsilon * id;
        for (Eigen::Index j = 0; j < b; ++j) {
            if (i == j) {
                continue;
            }
            const double c = 2.0 * cfg.lambda_str * w(i, j);
            h.block(i * n, i * n, n, n) += c * id;
            h.block(i * n, j * n, n, n) -= c * id;
        }
        rhs.middleRows(i * n, n) = (cfg.lambda_def * ltl + cfg.prox_epsilon * id) * Eigen::MatrixXd(targets[i]);
    }
    const Eigen::MatrixXd x = h.fullPivLu().solve(rhs);
    std::vector<VectorField> out;
    for (Eigen::Index i = 0; i < b; ++i) {
        out.emplace_back(x.middleRows(i * n, n));
    }
    return out;
}

inline double max_relative_error(const std::vector<VectorField>& got, const std::vector<VectorField>& want)
{
    double scale = 0.0;
    for (const auto& f : want) {
        scale = std::max(scale, f.cwiseAbs().maxCoeff());
    }
    double err = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
        err = std::max(err, (got[i] - want[i]).cwiseAbs().maxCoeff());
    }
    return scale > 0.0 ? err / scale : err;
}

} // namespace cariblend::testing
