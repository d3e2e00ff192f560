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

// Seeded synthetic subjects: a toy morphable model, a ground-truth face and
// camera, an exaggerated caricature of that face, an expression bank and
// texture inputs. Everything needed to run fit/build/retarget end to end.

#pragma once

#include "cariblend/face_model.hpp"
#include "cariblend/image_io.hpp"
#include "cariblend/json_io.hpp"
#include "cariblend/landmark_mapper.hpp"
#include "cariblend/model_io.hpp"
#include "cariblend/obj_io.hpp"
#include "cariblend/texture.hpp"
#include "cariblend/toy_model.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

namespace cariblend {

struct SyntheticOptions {
    ToyModelOptions model;
    int num_shapes = 5;
    double gamma = 1.5;
    double identity_sigma = 0.5;
    double expression_sigma = 0.3;
    int texture_size = 32;
    std::uint64_t seed = 42;
};

struct SyntheticFixture {
    LinearFaceModel model;
    IdentityCoeffs id;
    ExpressionCoeffs exp;
    Camera camera;
    TriMesh caricature;
    LandmarkSet caricature_landmarks;
    std::vector<ExpressionCoeffs> bank;
    /// Blend weights used to build `target` from the bank.
    Eigen::VectorXd target_weights;
    ExpressionCoeffs target;
    TextureMap texture;
    TextureMap color;
    double gamma = 1.0;
};

/**
 * The caricature is the ground-truth face with its in-plane offsets from the
 * landmark centroid scaled by gamma. The radial mapper's forward map sends its
 * projected landmarks exactly onto those of the ground-truth face.
 */
inline SyntheticFixture make_synthetic_fixture(const SyntheticOptions& options = {})
{
    if (options.num_shapes < 2) {
        throw Error(ErrorCode::InvalidArgument, "synthetic fixture needs at least two blendshapes");
    }
    SyntheticFixture fx;
    fx.model = make_toy_model(options.model);
    fx.gamma = options.gamma;
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](Eigen::Index n, double sigma) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v(i) = sigma * gauss(rng);
        }
        return v;
    };
    fx.id.values = draw(fx.model.num_identity(), options.identity_sigma);
    fx.exp.values = draw(fx.model.num_expression(), options.expression_sigma);
    fx.camera.scale = 100.0;
    fx.camera.rotation = euler_rotation(0.1, -0.2, 0.05);
    fx.camera.translation = Eigen::Vector2d(200.0, 150.0);

    const TriMesh face = evaluate(fx.model, fx.id, fx.exp);
    Eigen::RowVector3d center = Eigen::RowVector3d::Zero();
    for (int v : fx.model.landmark_indices) {
        center += face.vertices.row(v);
    }
    center /= static_cast<double>(fx.model.landmark_indices.size());
    const Eigen::Matrix3d& r = fx.camera.rotation;
    const Eigen::Matrix3d stretch = r.transpose() * Eigen::Vector3d(options.gamma, options.gamma, 1.0).asDiagonal() * r;
    fx.caricature = face;
    for (Eigen::Index v = 0; v < face.num_vertices(); ++v) {
        fx.caricature.vertices.row(v) = center + (face.vertices.row(v) - center) * stretch.transpose();
    }
    fx.caricature_landmarks = project(fx.camera, fx.caricature, fx.model.landmark_indices);

    fx.bank.push_back({Eigen::VectorXd::Zero(fx.model.num_expression())});
    for (int i = 1; i < options.num_shapes; ++i) {
        fx.bank.push_back({draw(fx.model.num_expression(), options.expression_sigma)});
    }
    fx.target_weights.resize(options.num_shapes - 1);
    fx.target.values = fx.bank[0].values;
    for (int i = 1; i < options.num_shapes; ++i) {
        fx.target_weights(i - 1) = unit(rng);
        fx.target.values += fx.target_weights(i - 1) * (fx.bank[static_cast<std::size_t>(i)].values - fx.bank[0].values);
    }

    const int size = options.texture_size;
    fx.texture = TextureMap(size, size);
    fx.color = TextureMap(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5) / size, v = (y + 0.5) / size;
            fx.texture.at(y, x, 0) = 0.6 + 0.3 * u;
            fx.texture.at(y, x, 1) = 0.45 + 0.25 * v;
            fx.texture.at(y, x, 2) = 0.35 + 0.2 * std::sin(6.0 * u) * std::cos(6.0 * v);
            fx.color.at(y, x, 0) = 0.8;
            fx.color.at(y, x, 1) = 0.25 + 0.1 * u;
            fx.color.at(y, x, 2) = 0.3;
        }
    }
    return fx;
}

/// Writes the fixture and a ready-to-run config.json into `dir`.
inline void write_synthetic_fixture(const std::filesystem::path& dir, const SyntheticFixture& fx, std::uint64_t seed = 42)
{
    std::filesystem::create_directories(dir);
    write_face_model(dir / "model" / "model.json", fx.model);
    write_obj(dir / "caricature.obj", fx.caricature);
    write_json(dir / "landmarks.json", landmarks_to_json(fx.caricature_landmarks));
    json bank = json::array();
    for (const auto& e : fx.bank) {
        bank.push_back(vector_to_json(e.values));
    }
    write_json(dir / "bank.json", bank);
    write_json(dir / "target.json", vector_to_json(fx.target.values));
    write_ppm(dir / "texture.ppm", fx.texture);
    write_ppm(dir / "color.ppm", fx.color);
    write_json(dir / "ground_truth.json", json{{"identity", vector_to_json(fx.id.values)},
                                               {"expression", vector_to_json(fx.exp.values)},
                                               {"camera", camera_to_json(fx.camera)},
                                               {"target_weights", vector_to_json(fx.target_weights)}});
    write_json(dir / "config.json", json{{"model", "model/model.json"},
                                         {"caricature_mesh", "caricature.obj"},
                                         {"caricature_landmarks", "landmarks.json"},
                                         {"expression_bank", "bank.json"},
                                         {"texture", "texture.ppm"},
                                         {"color_mask", "color.ppm"},
                                         {"output_dir", "out"},
                                         {"seed", seed},
                                         {"mapper", json{{"type", "radial"}, {"gamma", fx.gamma}, {"center", nullptr}}}});
}

} // namespace cariblend
