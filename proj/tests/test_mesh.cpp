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

#include "support.hpp"

#include "cariblend/laplacian.hpp"
#include "cariblend/mesh.hpp"
#include "cariblend/obj_io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace cariblend {
namespace {

TriMesh equilateral()
{
    TriMesh m;
    m.vertices.resize(3, 3);
    m.vertices << 0, 0, 0, 1, 0, 0, 0.5, std::sqrt(3.0) / 2.0, 0;
    m.faces.resize(1, 3);
    m.faces << 0, 1, 2;
    return m;
}

double max_asymmetry(const SparseMatrix& l)
{
    const Eigen::MatrixXd d(l);
    return (d - d.transpose()).cwiseAbs().maxCoeff();
}

TEST(Laplacian, EquilateralTriangleClosedForm)
{
    const Eigen::MatrixXd l(build_cotangent_laplacian(equilateral()));
    const double w = 1.0 / (2.0 * std::sqrt(3.0));
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(l(i, i), 2.0 * w, 1e-12);
        for (int j = 0; j < 3; ++j) {
            if (i != j) {
                EXPECT_NEAR(l(i, j), -w, 1e-12);
            }
        }
    }
    EXPECT_NEAR(l(0, 0), 0.577350269189626, 1e-12);
}

TEST(Laplacian, MatchesPerFaceOracleOnPlanarGrid)
{
    const TriMesh grid = make_grid(5, 5, 1.0, 0.0);
    const Eigen::MatrixXd got(build_cotangent_laplacian(grid));
    const Eigen::MatrixXd want = testing::laplacian_oracle(grid);
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Laplacian, MatchesOracleOnJitteredSurfaces)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        const TriMesh mesh = testing::jittered_grid(6, 7, rng);
        const Eigen::MatrixXd got(build_cotangent_laplacian(mesh));
        EXPECT_LE((got - testing::laplacian_oracle(mesh)).cwiseAbs().maxCoeff(), 1e-12) << "seed " << seed;
    }
}

TEST(Laplacian, SymmetricWithZeroRowSums)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const TriMesh mesh = testing::jittered_grid(8, 6, rng, 0.03);
        const SparseMatrix l = build_cotangent_laplacian(mesh);
        EXPECT_LE(max_asymmetry(l), 1e-12);
        const Eigen::VectorXd rows = l * Eigen::VectorXd::Ones(l.rows());
        EXPECT_LE(rows.cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Laplacian, ObtuseFaceKeepsNegativeWeightAndZeroRowSums)
{
    TriMesh m;
    m.vertices.resize(4, 3);
    // Vertex 2 sits just above edge (0,1): obtuse corner.
    m.vertices << 0, 0, 0, 1, 0, 0, 0.5, 0.05, 0, 0.5, -1.0, 0;
    m.faces.resize(2, 3);
    m.faces << 0, 1, 2, 1, 0, 3;
    const Eigen::MatrixXd l(build_cotangent_laplacian(m));
    const double cot2 = testing::cot_at(m.vertices.row(2).transpose(), m.vertices.row(0).transpose(),
                                        m.vertices.row(1).transpose());
    const double cot3 = testing::cot_at(m.vertices.row(3).transpose(), m.vertices.row(0).transpose(),
                                        m.vertices.row(1).transpose());
    ASSERT_LT(cot2, 0.0);
    EXPECT_NEAR(l(0, 1), -0.5 * (cot2 + cot3), 1e-12);
    EXPECT_GT(l(0, 1), 0.0);
    EXPECT_LE((l * Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((l - l.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Laplacian, BoundaryEdgeUsesSingleCotangent)
{
    const TriMesh grid = make_grid(3, 3, 1.0, 0.0);
    const Eigen::MatrixXd l(build_cotangent_laplacian(grid));
    // Boundary edge (0,1) lies in the single face (0,1,4); the corner at 4 is 45 degrees.
    EXPECT_NEAR(-l(0, 1), 0.5, 1e-12);
}

TEST(Laplacian, DegenerateFaceIsAnError)
{
    TriMesh m = equilateral();
    m.vertices.conservativeResize(4, 3);
    m.vertices.row(3) << 2.0, 0.0, 0.0;
    m.faces.conservativeResize(2, 3);
    m.faces.row(1) << 0, 1, 3; // collinear
    try {
        build_cotangent_laplacian(m);
        FAIL() << "expected DegenerateFace";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateFace);
    }
}

TEST(Laplacian, NonManifoldEdgeWarnsButAccumulates)
{
    TriMesh m;
    m.vertices.resize(5, 3);
    m.vertices << 0, 0, 0, 1, 0, 0, 0.5, 1, 0, 0.5, -1, 0, 0.5, 0, 1;
    m.faces.resize(3, 3);
    m.faces << 0, 1, 2, 1, 0, 3, 0, 1, 4;
    Warnings w;
    const Eigen::MatrixXd l(build_cotangent_laplacian(m, &w));
    ASSERT_EQ(w.size(), 1u);
    EXPECT_NE(w[0].find("non-manifold"), std::string::npos);
    EXPECT_LE((l - testing::laplacian_oracle(m)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ApplyLaplacian, ZeroAndTranslationFieldsVanish)
{
    std::mt19937_64 rng(3);
    const TriMesh mesh = testing::jittered_grid(5, 5, rng);
    const SparseMatrix l = build_cotangent_laplacian(mesh);
    const VectorField zero = VectorField::Zero(mesh.num_vertices(), 3);
    EXPECT_EQ(apply_laplacian(l, zero).cwiseAbs().maxCoeff(), 0.0);
    VectorField translation(mesh.num_vertices(), 3);
    translation.rowwise() = Eigen::RowVector3d(0.3, -1.2, 2.5);
    EXPECT_LE(apply_laplacian(l, translation).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ApplyLaplacian, MatchesDenseMultiplication)
{
    std::mt19937_64 rng(11);
    const TriMesh grid = make_grid(5, 5, 1.0, 0.0);
    const SparseMatrix l = build_cotangent_laplacian(grid);
    const Eigen::MatrixXd dense = testing::laplacian_oracle(grid);
    const VectorField f = testing::random_field(grid.num_vertices(), rng);
    const VectorField got = apply_laplacian(l, f);
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        for (int c = 0; c < 3; ++c) {
            double want = 0.0;
            for (Eigen::Index k = 0; k < f.rows(); ++k) {
                want += dense(r, k) * f(k, c);
            }
            EXPECT_NEAR(got(r, c), want, 1e-12);
        }
    }
    const ScalarField s = Eigen::VectorXd::LinSpaced(grid.num_vertices(), -1.0, 2.0);
    EXPECT_LE((apply_laplacian(l, s) - dense * s).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ApplyLaplacian, Linear)
{
    std::mt19937_64 rng(5);
    const TriMesh mesh = testing::jittered_grid(6, 6, rng);
    const SparseMatrix l = build_cotangent_laplacian(mesh);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = u(rng), b = u(rng);
        const VectorField f = testing::random_field(mesh.num_vertices(), rng);
        const VectorField g = testing::random_field(mesh.num_vertices(), rng);
        const VectorField lhs = apply_laplacian(l, VectorField(a * f + b * g));
        const VectorField rhs = a * apply_laplacian(l, f) + b * apply_laplacian(l, g);
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(ApplyLaplacian, DimensionMismatch)
{
    const SparseMatrix l = build_cotangent_laplacian(make_grid(3, 3));
    try {
        apply_laplacian(l, VectorField(VectorField::Zero(4, 3)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
    EXPECT_THROW(apply_laplacian(l, ScalarField(ScalarField::Zero(10))), Error);
}

TEST(Topology, IdenticalCopiesPass)
{
    const std::vector<TriMesh> meshes(47, make_grid(4, 4));
    EXPECT_TRUE(validate_blendshape_topology(meshes).ok());
}

TEST(Topology, ReindexedFaceIsReported)
{
    std::vector<TriMesh> meshes(2, make_grid(4, 4));
    const auto f = meshes[1].faces.row(5).eval();
    meshes[1].faces.row(5) << f(1), f(2), f(0);
    const ValidationReport report = validate_blendshape_topology(meshes);
    ASSERT_FALSE(report.ok());
    ASSERT_EQ(report.issues.size(), 1u);
    EXPECT_EQ(report.issues[0].mesh_index, 1u);
    EXPECT_EQ(report.issues[0].face_index, 5);
}

TEST(Topology, PositionsAreIgnored)
{
    std::vector<TriMesh> meshes(3, make_grid(4, 4));
    meshes[1].vertices.array() += 0.7;
    meshes[2].vertices *= 3.0;
    EXPECT_TRUE(validate_blendshape_topology(meshes).ok());
}

TEST(Topology, VertexCountMismatch)
{
    const std::vector<TriMesh> meshes{make_grid(4, 4), make_grid(4, 5)};
    const ValidationReport report = validate_blendshape_topology(meshes);
    ASSERT_FALSE(report.ok());
    EXPECT_EQ(report.issues[0].face_index, -1);
}

TEST(MeshValidation, RejectsBadFaces)
{
    TriMesh m = equilateral();
    m.faces(0, 2) = 3;
    EXPECT_THROW(validate(m), Error);
    m.faces(0, 2) = 0;
    EXPECT_THROW(validate(m), Error);
}

TEST(Obj, RoundTripWithTextureCoordinates)
{
    const auto dir = std::filesystem::temp_directory_path() / "cariblend_test_obj";
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(2);
    const TriMesh mesh = testing::jittered_grid(4, 3, rng);
    write_obj(dir / "m.obj", mesh);
    const TriMesh back = read_obj(dir / "m.obj");
    EXPECT_EQ(back.faces, mesh.faces);
    EXPECT_EQ(back.vertices, mesh.vertices);
    EXPECT_EQ(back.uv, mesh.uv);
}

TEST(Obj, ParsesCornerFormsAndNegativeIndices)
{
    const auto path = std::filesystem::temp_directory_path() / "cariblend_test_corners.obj";
    {
        std::ofstream out(path);
        out << "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvt 1 1\n"
               "vn 0 0 1\nf 1/1/1 2/2/1 3/3/1\nf -3/-3 -1/-1 -2/-2\n";
    }
    const TriMesh m = read_obj(path);
    ASSERT_EQ(m.num_faces(), 2);
    EXPECT_EQ(m.faces.row(1), Eigen::RowVector3i(1, 3, 2));
    ASSERT_TRUE(m.has_uv());
    EXPECT_EQ(m.uv.row(3), Eigen::RowVector2d(1, 1));
}

TEST(Obj, ErrorsCarryKinds)
{
    try {
        read_obj("/nonexistent/mesh.obj");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Io);
    }
    const auto path = std::filesystem::temp_directory_path() / "cariblend_test_quad.obj";
    {
        std::ofstream out(path);
        out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 4 3\n";
    }
    try {
        read_obj(path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Parse);
    }
}

} // namespace
} // namespace cariblend
