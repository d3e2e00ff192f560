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

// Deterministic synthetic fixtures: grid meshes and a small morphable model
// with orthonormal random bases.

#pragma once

#include "cariblend/face_model.hpp"
#include "cariblend/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace cariblend {

/// Triangulated nx-by-ny vertex grid on [0, (nx-1)*spacing] x [0, (ny-1)*spacing],
/// lifted by a smooth dome of height `bump`. UVs span [0,1]^2.
inline TriMesh make_grid(int nx, int ny, double spacing = 1.0, double bump = 0.0)
{
    TriMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(nx) * ny, 3);
    mesh.uv.resize(static_cast<Eigen::Index>(nx) * ny, 2);
    const double cx = 0.5 * (nx - 1), cy = 0.5 * (ny - 1);
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            const int i = y * nx + x;
            const double rx = cx > 0 ? (x - cx) / cx : 0.0;
            const double ry = cy > 0 ? (y - cy) / cy : 0.0;
            const double z = bump * std::exp(-1.5 * (rx * rx + ry * ry));
            mesh.vertices.row(i) << x * spacing, y * spacing, z;
            mesh.uv.row(i) << (nx > 1 ? double(x) / (nx - 1) : 0.0), (ny > 1 ? double(y) / (ny - 1) : 0.0);
        }
    }
    mesh.faces.resize(2 * static_cast<Eigen::Index>(nx - 1) * (ny - 1), 3);
    int f = 0;
    for (int y = 0; y + 1 < ny; ++y) {
        for (int x = 0; x + 1 < nx; ++x) {
            const int a = y * nx + x, b = a + 1, c = a + nx, d = c + 1;
            if ((x + y) % 2 == 0) {
                mesh.faces.row(f++) << a, b, d;
                mesh.faces.row(f++) << a, d, c;
            } else {
                mesh.faces.row(f++) << a, b, c;
                mesh.faces.row(f++) << b, d, c;
            }
        }
    }
    return mesh;
}

/// Columns of a (rows x cols) matrix with orthonormal columns drawn from a seeded Gaussian.
inline Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd g(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            g(r, c) = gauss(rng);
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    // Positive diagonal of R.
    const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).template triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < cols; ++c) {
        if (r(c, c) < 0) {
            q.col(c) *= -1.0;
        }
    }
    return q;
}

struct ToyModelOptions {
    int grid_x = 10;
    int grid_y = 10;
    Eigen::Index num_identity = 4;
    Eigen::Index num_expression = 6;
    int num_landmarks = 20;
    /// Scale applied to the orthonormal basis columns.
    double basis_scale = 1.0;
    double spacing = 0.1;
    double bump = 0.3;
    std::uint64_t seed = 42;
};

/// The default options give the 100-vertex model with P = 4, D = 6 used by the tests.
inline LinearFaceModel make_toy_model(const ToyModelOptions& options = {})
{
    LinearFaceModel model;
    model.mean = make_grid(options.grid_x, options.grid_y, options.spacing, options.bump);
    const Eigen::Index rows = 3 * model.mean.num_vertices();
    const Eigen::MatrixXd q = random_orthonormal(rows, options.num_identity + options.num_expression, options.seed);
    model.id_basis = options.basis_scale * q.leftCols(options.num_identity);
    model.exp_basis = options.basis_scale * q.rightCols(options.num_expression);

    const int n = static_cast<int>(model.mean.num_vertices());
    const int k = std::min(options.num_landmarks, n);
    // Evenly strided landmarks with a co-prime step.
    int step = std::max(1, n / k);
    while (std::gcd(step, n) != 1 && step < n) {
        ++step;
    }
    for (int i = 0; i < k; ++i) {
        model.landmark_indices.push_back(static_cast<int>((static_cast<long long>(i) * step + step / 2) % n));
    }
    return model;
}

/// A rotation from XYZ Euler angles in radians.
inline Eigen::Matrix3d euler_rotation(double rx, double ry, double rz)
{
    return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

} // namespace cariblend
