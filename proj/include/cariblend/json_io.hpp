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

// JSON helpers. Output is produced by a small writer rather than json::dump so
// that every floating-point value carries 17 significant digits and reruns are
// byte-identical.

#pragma once

#include "cariblend/error.hpp"
#include "cariblend/face_model.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace cariblend {

using json = nlohmann::json;

/// Parses a JSON file; parse errors carry the 1-based line number.
inline json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t offset = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n');
        throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line) + ": malformed JSON (line " +
                                          std::to_string(line) + ")");
    }
}

namespace detail {

inline void write_json_string(std::string& out, const std::string& s)
{
    out += json(s).dump();
}

inline void write_json_value(std::string& out, const json& value, int indent, int depth)
{
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (value.type()) {
    case json::value_t::object: {
        if (value.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (!first) {
                out += ",\n";
            }
            first = false;
            out += pad;
            write_json_string(out, it.key());
            out += ": ";
            write_json_value(out, it.value(), indent, depth + 1);
        }
        out += "\n" + close_pad + "}";
        return;
    }
    case json::value_t::array: {
        if (value.empty()) {
            out += "[]";
            return;
        }
        // Arrays of scalars stay on one line.
        const bool flat = std::none_of(value.begin(), value.end(),
                                       [](const json& v) { return v.is_array() || v.is_object(); });
        out += flat ? "[" : "[\n";
        bool first = true;
        for (const auto& v : value) {
            if (!first) {
                out += flat ? ", " : ",\n";
            }
            first = false;
            if (!flat) {
                out += pad;
            }
            write_json_value(out, v, indent, depth + 1);
        }
        out += flat ? "]" : "\n" + close_pad + "]";
        return;
    }
    case json::value_t::number_float: {
        const double d = value.get<double>();
        if (!std::isfinite(d)) {
            out += "null";
            return;
        }
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", d);
        out += buf;
        return;
    }
    default:
        out += value.dump();
        return;
    }
}

} // namespace detail

inline std::string to_json_text(const json& value)
{
    std::string out;
    detail::write_json_value(out, value, 2, 0);
    out += "\n";
    return out;
}

inline void write_json(const std::filesystem::path& path, const json& value)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
    out << to_json_text(value);
    if (!out) {
        throw Error(ErrorCode::Io, "write failed for " + path.string());
    }
}

inline json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v)
{
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        arr.push_back(v(i));
    }
    return arr;
}

/// Row-major nested arrays.
inline json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m)
{
    json arr = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        arr.push_back(std::move(row));
    }
    return arr;
}

inline Eigen::VectorXd vector_from_json(const json& j, const std::string& what)
{
    if (!j.is_array()) {
        throw Error(ErrorCode::Parse, what + ": expected an array of numbers");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw Error(ErrorCode::Parse, what + ": entry " + std::to_string(i) + " is not a number");
        }
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what)
{
    if (!j.is_array()) {
        throw Error(ErrorCode::Parse, what + ": expected an array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = rows > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::VectorXd row = vector_from_json(j[static_cast<std::size_t>(r)], what);
        if (row.size() != cols) {
            throw Error(ErrorCode::Parse, what + ": ragged rows");
        }
        m.row(r) = row.transpose();
    }
    return m;
}

/// Landmarks as [[x, y], ...].
inline json landmarks_to_json(const LandmarkSet& landmarks)
{
    return matrix_to_json(Eigen::MatrixXd(landmarks.points));
}

inline LandmarkSet landmarks_from_json(const json& j, const std::string& what)
{
    const Eigen::MatrixXd m = matrix_from_json(j, what);
    if (m.rows() > 0 && m.cols() != 2) {
        throw Error(ErrorCode::Parse, what + ": landmarks need two coordinates each");
    }
    LandmarkSet out;
    out.points = m;
    return out;
}

inline json camera_to_json(const Camera& cam)
{
    return json{{"scale", cam.scale},
                {"rotation", matrix_to_json(cam.rotation)},
                {"translation", vector_to_json(cam.translation)}};
}

inline Camera camera_from_json(const json& j)
{
    Camera cam;
    if (!j.is_object() || !j.contains("scale") || !j.contains("rotation") || !j.contains("translation")) {
        throw Error(ErrorCode::Parse, "camera needs scale, rotation and translation");
    }
    cam.scale = j.at("scale").get<double>();
    const Eigen::MatrixXd r = matrix_from_json(j.at("rotation"), "camera.rotation");
    const Eigen::VectorXd t = vector_from_json(j.at("translation"), "camera.translation");
    if (r.rows() != 3 || r.cols() != 3 || t.size() != 2) {
        throw Error(ErrorCode::Parse, "camera rotation must be 3x3 and translation length 2");
    }
    cam.rotation = r;
    cam.translation = t;
    return cam;
}

} // namespace cariblend
