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

// On-disk layout of a LinearFaceModel:
//
//   model.json          manifest: dimensions, landmark indices, faces, file names
//   mean.f64            3N little-endian doubles, interleaved xyz
//   identity.f64        3N x P, column-major
//   expression.f64      3N x D, column-major
//
// File names in the manifest are relative to the manifest's directory.

#pragma once

#include "cariblend/error.hpp"
#include "cariblend/face_model.hpp"
#include "cariblend/json_io.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cariblend {

inline constexpr const char* kModelFormat = "cariblend-linear-face-model";

/// Reads rows x cols little-endian doubles stored column-major.
inline Eigen::MatrixXd read_f64_matrix(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    const auto count = static_cast<std::size_t>(rows * cols);
    std::vector<unsigned char> bytes(count * 8);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw Error(ErrorCode::Parse, path.string() + ": expected " + std::to_string(count) + " doubles");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw Error(ErrorCode::Parse, path.string() + ": trailing data after " + std::to_string(count) + " doubles");
    }
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b) {
            bits = (bits << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
        }
        m.data()[i] = std::bit_cast<double>(bits);
    }
    return m;
}

inline void write_f64_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
    std::vector<unsigned char> bytes(static_cast<std::size_t>(m.size()) * 8);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
        for (int b = 0; b < 8; ++b) {
            bytes[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits & 0xff);
            bits >>= 8;
        }
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorCode::Io, "write failed for " + path.string());
    }
}

inline LinearFaceModel read_face_model(const std::filesystem::path& manifest_path)
{
    const json manifest = read_json(manifest_path);
    const auto dir = manifest_path.parent_path();
    LinearFaceModel model;
    try {
        const auto n = manifest.at("num_vertices").get<Eigen::Index>();
        const auto p = manifest.at("num_identity").get<Eigen::Index>();
        const auto d = manifest.at("num_expression").get<Eigen::Index>();
        model.mean.vertices = unflatten(read_f64_matrix(dir / manifest.at("mean").get<std::string>(), 3 * n, 1));
        model.id_basis = read_f64_matrix(dir / manifest.at("identity_basis").get<std::string>(), 3 * n, p);
        model.exp_basis = read_f64_matrix(dir / manifest.at("expression_basis").get<std::string>(), 3 * n, d);
        const Eigen::MatrixXd faces = matrix_from_json(manifest.at("faces"), "model.faces");
        if (faces.rows() > 0 && faces.cols() != 3) {
            throw Error(ErrorCode::Parse, manifest_path.string() + ": faces must be index triples");
        }
        model.mean.faces = faces.cast<int>();
        model.landmark_indices = manifest.at("landmark_indices").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, manifest_path.string() + ": " + e.what());
    }
    try {
        validate(model);
    } catch (const Error& e) {
        throw Error(ErrorCode::Parse, manifest_path.string() + ": " + e.what());
    }
    return model;
}

inline void write_face_model(const std::filesystem::path& manifest_path, const LinearFaceModel& model)
{
    const auto dir = manifest_path.parent_path();
    if (!dir.empty()) {
        std::filesystem::create_directories(dir);
    }
    write_f64_matrix(dir / "mean.f64", Eigen::MatrixXd(flatten(model.mean.vertices)));
    write_f64_matrix(dir / "identity.f64", model.id_basis);
    write_f64_matrix(dir / "expression.f64", model.exp_basis);
    json faces = json::array();
    for (Eigen::Index f = 0; f < model.mean.num_faces(); ++f) {
        faces.push_back({model.mean.faces(f, 0), model.mean.faces(f, 1), model.mean.faces(f, 2)});
    }
    write_json(manifest_path, json{{"format", kModelFormat},
                                   {"num_vertices", model.num_vertices()},
                                   {"num_identity", model.num_identity()},
                                   {"num_expression", model.num_expression()},
                                   {"landmark_indices", model.landmark_indices},
                                   {"mean", "mean.f64"},
                                   {"identity_basis", "identity.f64"},
                                   {"expression_basis", "expression.f64"},
                                   {"faces", faces}});
}

/// Coefficient vectors are plain JSON arrays.
inline Eigen::VectorXd read_coefficients(const std::filesystem::path& path)
{
    return vector_from_json(read_json(path), path.string());
}

} // namespace cariblend
