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

// Identity-preserving refinement of caricature blendshapes.
//
// The unknowns are the residual fields X_i (N x 3, one per blendshape). With
// targets T_i = M_i * D_i the energy is
//
//   E = l_def sum_i |L (X_i - T_i)|^2 + l_str sum_ij w_ij |X_i - X_j|^2
//     + l_smo sum_i |L X_i|^2 + eps sum_i |X_i - T_i|^2
//
// It separates over the x, y, z channels. Per channel, E = x^T A x - 2 b^T x + c with
//
//   A = I_B (x) Q + 2 l_str (G (x) I_N),  Q = (l_def + l_smo) L^T L + eps I,
//   b_i = (l_def L^T L + eps I) T_i,      G = diag(W 1) - W,
//
// so the minimizer solves A x = b. Diagonalizing the small B x B graph
// Laplacian G = V diag(mu) V^T decouples A into B sparse systems
// Q + 2 l_str mu_k I, which serve as the preconditioner of a conjugate
// gradient iteration on the coupled system.

#pragma once

#include "cariblend/blendshape.hpp"
#include "cariblend/error.hpp"
#include "cariblend/laplacian.hpp"
#include "cariblend/mesh.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace cariblend {

enum class SolverKind {
    /// Preconditioned conjugate gradient on the coupled sparse system.
    Iterative,
    /// Dense Cholesky of the assembled system; limited to kDenseSolverLimit unknowns per channel.
    DenseDirect,
};

inline constexpr Eigen::Index kDenseSolverLimit = 2000;

struct OptimizationConfig {
    double lambda_def = 1.0;
    double lambda_str = 0.1;
    double lambda_smo = 0.05;
    /// Weight of the proximity anchor that removes the Laplacian null space.
    double prox_epsilon = 1e-6;
    SolverKind solver = SolverKind::Iterative;
    double tolerance = 1e-10;
    /// 0 selects 10 * (number of unknowns per channel).
    Eigen::Index max_iterations = 0;
};

inline void validate(const OptimizationConfig& cfg)
{
    if (cfg.lambda_def < 0.0 || cfg.lambda_str < 0.0 || cfg.lambda_smo < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "energy weights must be nonnegative");
    }
    if (!(cfg.lambda_def + cfg.lambda_str + cfg.lambda_smo > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "at least one energy weight must be positive");
    }
    if (!(cfg.prox_epsilon > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "prox_epsilon must be positive");
    }
    if (!(cfg.tolerance > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "solver tolerance must be positive");
    }
}

struct EnergyBreakdown {
    double total = 0.0;
    double def = 0.0;
    double str = 0.0;
    double smo = 0.0;
    double prox = 0.0;
};

/**
 * The quadratic objective with its targets precomputed. Weights are the
 * clamped structure weights.
 */
class BlendshapeEnergy {
public:
    BlendshapeEnergy(SparseMatrix laplacian, std::vector<VectorField> targets, Eigen::MatrixXd weights,
                     OptimizationConfig cfg)
        : laplacian_(std::move(laplacian)), targets_(std::move(targets)), weights_(std::move(weights)), cfg_(cfg)
    {
        validate(cfg_);
        const auto count = static_cast<Eigen::Index>(targets_.size());
        if (weights_.rows() != count || weights_.cols() != count) {
            throw Error(ErrorCode::DimensionMismatch, "structure weights must be " + std::to_string(count) + " x " +
                                                          std::to_string(count));
        }
        for (const auto& t : targets_) {
            if (t.rows() != laplacian_.rows()) {
                throw Error(ErrorCode::DimensionMismatch, "target field does not match the Laplacian size");
            }
        }
        if (count > 0 && ((weights_ - weights_.transpose()).cwiseAbs().maxCoeff() > 1e-12 || weights_.minCoeff() < 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "structure weights must be symmetric and nonnegative");
        }
        graph_laplacian_ = -weights_;
        graph_laplacian_.diagonal() += weights_.rowwise().sum();
    }

    Eigen::Index num_vertices() const { return laplacian_.rows(); }
    std::size_t num_shapes() const { return targets_.size(); }
    Eigen::Index unknowns_per_channel() const { return num_vertices() * static_cast<Eigen::Index>(num_shapes()); }
    const SparseMatrix& laplacian() const { return laplacian_; }
    const std::vector<VectorField>& targets() const { return targets_; }
    const Eigen::MatrixXd& weights() const { return weights_; }
    const Eigen::MatrixXd& graph_laplacian() const { return graph_laplacian_; }
    const OptimizationConfig& config() const { return cfg_; }

    EnergyBreakdown evaluate(const std::vector<VectorField>& x) const
    {
        check(x);
        EnergyBreakdown e;
        const std::size_t count = x.size();
        for (std::size_t i = 0; i < count; ++i) {
            const VectorField diff = x[i] - targets_[i];
            e.def += (laplacian_ * diff).squaredNorm();
            e.smo += (laplacian_ * x[i]).squaredNorm();
            e.prox += diff.squaredNorm();
            for (std::size_t j = 0; j < count; ++j) {
                const double w = weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (w != 0.0 && i != j) {
                    e.str += w * (x[i] - x[j]).squaredNorm();
                }
            }
        }
        e.total = cfg_.lambda_def * e.def + cfg_.lambda_str * e.str + cfg_.lambda_smo * e.smo + cfg_.prox_epsilon * e.prox;
        return e;
    }

    /// dE/dX_i for every blendshape, i.e. 2 (A x - b).
    std::vector<VectorField> gradient(const std::vector<VectorField>& x) const
    {
        check(x);
        std::vector<VectorField> ax = apply_system(x);
        const std::vector<VectorField> b = rhs();
        for (std::size_t i = 0; i < x.size(); ++i) {
            ax[i] = 2.0 * (ax[i] - b[i]);
        }
        return ax;
    }

    /// A x, blockwise.
    std::vector<VectorField> apply_system(const std::vector<VectorField>& x) const
    {
        const std::size_t count = x.size();
        std::vector<VectorField> out(count);
        const double lap_weight = cfg_.lambda_def + cfg_.lambda_smo;
        for (std::size_t i = 0; i < count; ++i) {
            const VectorField lx = laplacian_ * x[i];
            out[i] = lap_weight * VectorField(laplacian_.transpose() * lx) + cfg_.prox_epsilon * x[i];
        }
        if (cfg_.lambda_str != 0.0) {
            for (std::size_t i = 0; i < count; ++i) {
                for (std::size_t j = 0; j < count; ++j) {
                    const double g = graph_laplacian_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    if (g != 0.0) {
                        out[i] += (2.0 * cfg_.lambda_str * g) * x[j];
                    }
                }
            }
        }
        return out;
    }

    /// b_i = (l_def L^T L + eps I) T_i.
    std::vector<VectorField> rhs() const
    {
        std::vector<VectorField> b(targets_.size());
        for (std::size_t i = 0; i < targets_.size(); ++i) {
            const VectorField lt = laplacian_ * targets_[i];
            b[i] = cfg_.lambda_def * VectorField(laplacian_.transpose() * lt) + cfg_.prox_epsilon * targets_[i];
        }
        return b;
    }

    /// The per-channel system matrix A of size (B N) x (B N); block (i, j) couples shapes i and j.
    SparseMatrix assemble_system() const
    {
        const Eigen::Index n = num_vertices();
        const auto count = static_cast<Eigen::Index>(num_shapes());
        const SparseMatrix ltl = SparseMatrix(laplacian_.transpose()) * laplacian_;
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(static_cast<std::size_t>(ltl.nonZeros() * count + n * count * count));
        const double lap_weight = cfg_.lambda_def + cfg_.lambda_smo;
        for (Eigen::Index i = 0; i < count; ++i) {
            for (Eigen::Index k = 0; k < ltl.outerSize(); ++k) {
                for (SparseMatrix::InnerIterator it(ltl, k); it; ++it) {
                    triplets.emplace_back(i * n + it.row(), i * n + it.col(), lap_weight * it.value());
                }
            }
            for (Eigen::Index v = 0; v < n; ++v) {
                triplets.emplace_back(i * n + v, i * n + v, cfg_.prox_epsilon);
            }
            for (Eigen::Index j = 0; j < count; ++j) {
                const double g = 2.0 * cfg_.lambda_str * graph_laplacian_(i, j);
                if (g == 0.0) {
                    continue;
                }
                for (Eigen::Index v = 0; v < n; ++v) {
                    triplets.emplace_back(i * n + v, j * n + v, g);
                }
            }
        }
        SparseMatrix a(n * count, n * count);
        a.setFromTriplets(triplets.begin(), triplets.end());
        a.makeCompressed();
        return a;
    }

private:
    void check(const std::vector<VectorField>& x) const
    {
        if (x.size() != targets_.size()) {
            throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(targets_.size()) + " fields, got " +
                                                          std::to_string(x.size()));
        }
        for (const auto& f : x) {
            if (f.rows() != num_vertices()) {
                throw Error(ErrorCode::DimensionMismatch, "field length does not match the mesh");
            }
        }
    }

    SparseMatrix laplacian_;
    std::vector<VectorField> targets_;
    Eigen::MatrixXd weights_;
    Eigen::MatrixXd graph_laplacian_;
    OptimizationConfig cfg_;
};

/// Masked targets T_i = M_i * D_i from the caricature residuals.
inline std::vector<VectorField> masked_targets(const BlendshapeSet& caricature, const std::vector<ScalarField>& masks)
{
    if (masks.size() != caricature.deltas.size()) {
        throw Error(ErrorCode::DimensionMismatch, "mask count differs from blendshape count");
    }
    std::vector<VectorField> targets;
    targets.reserve(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) {
        targets.push_back(apply_mask(masks[i], caricature.deltas[i]));
    }
    return targets;
}

inline EnergyBreakdown energy_total(const std::vector<VectorField>& d_star, const BlendshapeSet& caricature,
                                    const std::vector<ScalarField>& masks, const StructureWeights& weights,
                                    const SparseMatrix& laplacian, const OptimizationConfig& cfg)
{
    return BlendshapeEnergy(laplacian, masked_targets(caricature, masks), weights.clamped, cfg).evaluate(d_star);
}

inline std::vector<VectorField> energy_gradient(const std::vector<VectorField>& d_star, const BlendshapeSet& caricature,
                                                const std::vector<ScalarField>& masks, const StructureWeights& weights,
                                                const SparseMatrix& laplacian, const OptimizationConfig& cfg)
{
    return BlendshapeEnergy(laplacian, masked_targets(caricature, masks), weights.clamped, cfg).gradient(d_star);
}

namespace detail {

inline double frobenius_norm(const std::vector<VectorField>& fields)
{
    double sq = 0.0;
    for (const auto& f : fields) {
        sq += f.squaredNorm();
    }
    return std::sqrt(sq);
}

inline double inner(const std::vector<VectorField>& a, const std::vector<VectorField>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i].array() * b[i].array()).sum();
    }
    return s;
}

inline void axpy(double alpha, const std::vector<VectorField>& x, std::vector<VectorField>& y)
{
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

// Exact inverse of I (x) Q + 2 l_str (V diag(mu) V^T (x) I): rotate into the
// eigenbasis of G, solve one sparse SPD system per mode, rotate back. Modes
// with equal mu share a factorization.
class DecoupledSolver {
public:
    explicit DecoupledSolver(const BlendshapeEnergy& energy)
    {
        const auto& cfg = energy.config();
        const Eigen::Index n = energy.num_vertices();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(energy.graph_laplacian());
        basis_ = eig.eigenvectors();
        const Eigen::VectorXd mu = eig.eigenvalues();

        const SparseMatrix& lap = energy.laplacian();
        const SparseMatrix q = (cfg.lambda_def + cfg.lambda_smo) * (SparseMatrix(lap.transpose()) * lap);
        // One fill-reducing ordering shared by every shift.
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> inverse;
        Eigen::AMDOrdering<int>()(q.selfadjointView<Eigen::Lower>(), inverse);
        permutation_ = inverse.inverse();
        SparseMatrix permuted;
        permuted = q.twistedBy(permutation_);
        SparseMatrix identity(n, n);
        identity.setIdentity();

        const double mu_scale = std::max(1.0, mu.cwiseAbs().maxCoeff());
        mode_factor_.resize(static_cast<std::size_t>(mu.size()));
        for (Eigen::Index k = 0; k < mu.size(); ++k) {
            const double shift = cfg.prox_epsilon + 2.0 * cfg.lambda_str * std::max(mu(k), 0.0);
            std::size_t match = factors_.size();
            for (std::size_t f = 0; f < shifts_.size(); ++f) {
                if (std::abs(shifts_[f] - shift) <= 1e-14 * mu_scale) {
                    match = f;
                    break;
                }
            }
            if (match == factors_.size()) {
                auto factor = std::make_unique<Factor>();
                const SparseMatrix system = permuted + shift * identity;
                factor->compute(system);
                if (factor->info() != Eigen::Success) {
                    throw Error(ErrorCode::SolverFailure, "sparse factorization failed for mode " + std::to_string(k));
                }
                factors_.push_back(std::move(factor));
                shifts_.push_back(shift);
            }
            mode_factor_[static_cast<std::size_t>(k)] = match;
        }
    }

    std::vector<VectorField> solve(const std::vector<VectorField>& rhs) const
    {
        const auto count = static_cast<Eigen::Index>(rhs.size());
        std::vector<VectorField> modal(rhs.size());
        for (Eigen::Index k = 0; k < count; ++k) {
            VectorField acc = VectorField::Zero(rhs[0].rows(), 3);
            for (Eigen::Index i = 0; i < count; ++i) {
                acc += basis_(i, k) * rhs[static_cast<std::size_t>(i)];
            }
            const Eigen::MatrixXd permuted = permutation_ * Eigen::MatrixXd(acc);
            const Eigen::MatrixXd solved = factors_[mode_factor_[static_cast<std::size_t>(k)]]->solve(permuted);
            modal[static_cast<std::size_t>(k)] = permutation_.inverse() * solved;
        }
        std::vector<VectorField> out(rhs.size());
        for (Eigen::Index i = 0; i < count; ++i) {
            VectorField acc = VectorField::Zero(rhs[0].rows(), 3);
            for (Eigen::Index k = 0; k < count; ++k) {
                acc += basis_(i, k) * modal[static_cast<std::size_t>(k)];
            }
            out[static_cast<std::size_t>(i)] = std::move(acc);
        }
        return out;
    }

    std::size_t num_factorizations() const { return factors_.size(); }

private:
    using Factor = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

    Eigen::MatrixXd basis_;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> permutation_;
    std::vector<std::unique_ptr<Factor>> factors_;
    std::vector<double> shifts_;
    std::vector<std::size_t> mode_factor_;
};

} // namespace detail

struct SolveReport {
    std::vector<VectorField> solution;
    Eigen::Index iterations = 0;
    double relative_residual = 0.0;
};

/// Preconditioned conjugate gradient on A x = b. Throws SolverFailure when the
/// iteration cap is reached before the relative residual drops below tolerance.
inline SolveReport solve_iterative(const BlendshapeEnergy& energy)
{
    const auto& cfg = energy.config();
    const std::vector<VectorField> b = energy.rhs();
    const double b_norm = detail::frobenius_norm(b);
    SolveReport report;
    report.solution.assign(b.size(), VectorField::Zero(energy.num_vertices(), 3));
    if (b_norm == 0.0) {
        return report;
    }
    const Eigen::Index cap = cfg.max_iterations > 0 ? cfg.max_iterations : 10 * energy.unknowns_per_channel();
    const detail::DecoupledSolver preconditioner(energy);

    std::vector<VectorField> r = b;
    std::vector<VectorField> z = preconditioner.solve(r);
    std::vector<VectorField> p = z;
    double rz = detail::inner(r, z);
    double residual = 1.0;
    for (Eigen::Index it = 0; it < cap; ++it) {
        const std::vector<VectorField> ap = energy.apply_system(p);
        const double pap = detail::inner(p, ap);
        if (!(pap > 0.0)) {
            throw Error(ErrorCode::SolverFailure, "system matrix is not positive definite along a search direction");
        }
        const double alpha = rz / pap;
        detail::axpy(alpha, p, report.solution);
        detail::axpy(-alpha, ap, r);
        report.iterations = it + 1;
        residual = detail::frobenius_norm(r) / b_norm;
        if (residual <= cfg.tolerance) {
            break;
        }
        z = preconditioner.solve(r);
        const double rz_next = detail::inner(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = z[i] + beta * p[i];
        }
    }
    // Report the true residual rather than the recursively updated one.
    const std::vector<VectorField> ax = energy.apply_system(report.solution);
    std::vector<VectorField> true_r = b;
    detail::axpy(-1.0, ax, true_r);
    report.relative_residual = detail::frobenius_norm(true_r) / b_norm;
    if (report.relative_residual > cfg.tolerance) {
        throw Error(ErrorCode::SolverFailure, "conjugate gradient stopped at relative residual " +
                                                  std::to_string(report.relative_residual) + " after " +
                                                  std::to_string(report.iterations) + " iterations");
    }
    return report;
}

/// Dense Cholesky of the assembled system.
inline SolveReport solve_dense(const BlendshapeEnergy& energy)
{
    const Eigen::Index n = energy.num_vertices();
    const Eigen::Index unknowns = energy.unknowns_per_channel();
    if (unknowns > kDenseSolverLimit) {
        throw Error(ErrorCode::InvalidArgument, "dense solver is limited to " + std::to_string(kDenseSolverLimit) +
                                                    " unknowns per channel, problem has " + std::to_string(unknowns));
    }
    const Eigen::MatrixXd a = Eigen::MatrixXd(energy.assemble_system());
    const std::vector<VectorField> b = energy.rhs();
    Eigen::MatrixXd stacked(unknowns, 3);
    for (std::size_t i = 0; i < b.size(); ++i) {
        stacked.middleRows(static_cast<Eigen::Index>(i) * n, n) = b[i];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::SolverFailure, "dense Cholesky failed; system is not positive definite");
    }
    const Eigen::MatrixXd x = llt.solve(stacked);
    SolveReport report;
    report.iterations = 1;
    for (std::size_t i = 0; i < b.size(); ++i) {
        report.solution.emplace_back(x.middleRows(static_cast<Eigen::Index>(i) * n, n));
    }
    const double b_norm = stacked.norm();
    report.relative_residual = b_norm > 0.0 ? (a * x - stacked).norm() / b_norm : 0.0;
    return report;
}

struct OptimizationResult {
    BlendshapeSet optimized;
    std::vector<ScalarField> masks;
    StructureWeights weights;
    EnergyBreakdown energy_before;
    EnergyBreakdown energy_after;
    Eigen::Index iterations = 0;
    double relative_residual = 0.0;
    /// |grad E(D*)| / |grad E(D_init)|, zero when the initial gradient vanishes.
    double gradient_ratio = 0.0;
    /// True when the solve did not lower the energy and the initial fields were kept.
    bool kept_initial = false;
};

/**
 * Refines caricature blendshapes against a parallel normal-face set. Masks and
 * structure weights come from the normal-face residuals; the Laplacian is built
 * on the caricature base. Returns S*_i = base + D*_i, with energy never above
 * the energy of the masked initial residuals.
 */
inline OptimizationResult optimize_blendshapes(const BlendshapeSet& caricature, const BlendshapeSet& normal,
                                               const OptimizationConfig& cfg = {}, Warnings* warnings = nullptr)
{
    validate(cfg);
    if (caricature.size() != normal.size() || caricature.size() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "caricature set has " + std::to_string(caricature.size()) +
                                                      " shapes, normal set has " + std::to_string(normal.size()));
    }
    if (caricature.deltas.size() != caricature.size() || normal.deltas.size() != normal.size()) {
        throw Error(ErrorCode::InvalidArgument, "residuals have not been computed");
    }
    if (caricature.base.num_vertices() != normal.base.num_vertices()) {
        throw Error(ErrorCode::DimensionMismatch, "caricature and normal meshes differ in vertex count");
    }
    for (std::size_t i = 0; i < caricature.size(); ++i) {
        if (!same_topology(caricature.shapes[i], caricature.base) || !same_topology(normal.shapes[i], normal.base)) {
            throw Error(ErrorCode::TopologyMismatch, "blendshape " + std::to_string(i) + " topology differs from its base");
        }
    }

    OptimizationResult result;
    const double eps = zero_residual_epsilon(normal.base.vertices);
    result.masks = displacement_masks(normal.deltas, eps);
    result.weights = structure_weights(normal.deltas, eps);
    BlendshapeEnergy energy(build_cotangent_laplacian(caricature.base, warnings), masked_targets(caricature, result.masks),
                            result.weights.clamped, cfg);

    const std::vector<VectorField>& initial = energy.targets();
    result.energy_before = energy.evaluate(initial);
    SolveReport solve = cfg.solver == SolverKind::DenseDirect ? solve_dense(energy) : solve_iterative(energy);
    result.iterations = solve.iterations;
    result.relative_residual = solve.relative_residual;
    result.energy_after = energy.evaluate(solve.solution);

    std::vector<VectorField> best = std::move(solve.solution);
    if (result.energy_after.total > result.energy_before.total) {
        best = initial;
        result.energy_after = result.energy_before;
        result.kept_initial = true;
    }
    const double g0 = detail::frobenius_norm(energy.gradient(initial));
    const double g1 = detail::frobenius_norm(energy.gradient(best));
    result.gradient_ratio = g0 > 0.0 ? g1 / g0 : 0.0;

    result.optimized.base = caricature.base;
    result.optimized.expression_bank = caricature.expression_bank;
    result.optimized.shapes.reserve(caricature.size());
    for (std::size_t i = 0; i < caricature.size(); ++i) {
        TriMesh shape = caricature.base;
        shape.vertices = caricature.base.vertices + best[i];
        result.optimized.shapes.push_back(std::move(shape));
    }
    result.optimized.deltas = std::move(best);
    return result;
}

} // namespace cariblend
