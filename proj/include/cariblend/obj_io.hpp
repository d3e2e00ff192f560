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

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace cariblend {

namespace detail {

// Parses one "v", "v/vt", "v//vn" or "v/vt/vn" corner. Indices are 1-based;
// negative indices count back from the current end of the list.
inline std::pair<int, int> parse_obj_corner(const std::string& token, int num_v, int num_vt,
                                            const std::string& where)
{
    auto resolve = [&](const std::string& text, int count) -> int {
        int value = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || ptr != text.data() + text.size() || value == 0) {
            throw Error(ErrorCode::Parse, where + ": bad face index '" + token + "'");
        }
        return value > 0 ? value - 1 : count + value;
    };
    const auto slash = token.find('/');
    const int v = resolve(token.substr(0, slash), num_v);
    int vt = -1;
    if (slash != std::string::npos) {
        const auto second = token.find('/', slash + 1);
        const std::string vt_text = token.substr(slash + 1, second == std::string::npos ? std::string::npos
                                                                                        : second - slash - 1);
        if (!vt_text.empty()) {
            vt = resolve(vt_text, num_vt);
        }
    }
    return {v, vt};
}

} // namespace detail

/// Reads an ASCII OBJ with triangle faces. Texture coordinates become per-vertex
/// UVs; a vertex referenced with two different vt indices keeps the first one
/// and a warning is emitted.
inline TriMesh read_obj(const std::filesystem::path& path, Warnings* warnings = nullptr)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    std::vector<std::array<double, 3>> positions;
    std::vector<std::array<double, 2>> texcoords;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<int, 3>> face_vt;
    bool any_vt_ref = false;

    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const std::string where = path.string() + ":" + std::to_string(line_number);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') {
            continue;
        }
        if (tag == "v") {
            std::array<double, 3> p{};
            if (!(ls >> p[0] >> p[1] >> p[2])) {
                throw Error(ErrorCode::Parse, where + ": malformed vertex");
            }
            positions.push_back(p);
        } else if (tag == "vt") {
            std::array<double, 2> t{};
            if (!(ls >> t[0] >> t[1])) {
                throw Error(ErrorCode::Parse, where + ": malformed texture coordinate");
            }
            texcoords.push_back(t);
        } else if (tag == "f") {
            std::vector<std::string> corners;
            std::string token;
            while (ls >> token) {
                corners.push_back(token);
            }
            if (corners.size() != 3) {
                throw Error(ErrorCode::Parse, where + ": only triangle faces are supported");
            }
            std::array<int, 3> f{};
            std::array<int, 3> t{};
            for (int k = 0; k < 3; ++k) {
                const auto [v, vt] = detail::parse_obj_corner(corners[k], static_cast<int>(positions.size()),
                                                              static_cast<int>(texcoords.size()), where);
                f[k] = v;
                t[k] = vt;
                any_vt_ref = any_vt_ref || vt >= 0;
            }
            faces.push_back(f);
            face_vt.push_back(t);
        }
    }

    TriMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(positions.size()), 3);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        mesh.vertices.row(static_cast<Eigen::Index>(i)) << positions[i][0], positions[i][1], positions[i][2];
    }
    mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        mesh.faces.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
    }

    if (any_vt_ref) {
        mesh.uv = UVs::Constant(mesh.num_vertices(), 2, 0.0);
        std::vector<int> assigned(positions.size(), -1);
        for (std::size_t f = 0; f < faces.size(); ++f) {
            for (int k = 0; k < 3; ++k) {
                const int v = faces[f][k];
                const int vt = face_vt[f][k];
                if (vt < 0 || v < 0 || v >= static_cast<int>(positions.size())) {
                    continue;
                }
                if (vt >= static_cast<int>(texcoords.size())) {
                    throw Error(ErrorCode::Parse, path.string() + ": texture index out of range in face " +
                                                      std::to_string(f));
                }
                if (assigned[v] < 0) {
                    assigned[v] = vt;
                    mesh.uv.row(v) << texcoords[vt][0], texcoords[vt][1];
                } else if (assigned[v] != vt && (texcoords[assigned[v]] != texcoords[vt])) {
                    warn(warnings, "vertex " + std::to_string(v) + " has multiple texture coordinates");
                }
            }
        }
    } else if (!texcoords.empty() && texcoords.size() == positions.size()) {
        mesh.uv.resize(mesh.num_vertices(), 2);
        for (std::size_t i = 0; i < texcoords.size(); ++i) {
            mesh.uv.row(static_cast<Eigen::Index>(i)) << texcoords[i][0], texcoords[i][1];
        }
    }
    try {
        validate(mesh);
    } catch (const Error& e) {
        throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
    return mesh;
}

/// Writes v (and vt when the mesh carries UVs) records with 17 significant digits.
inline void write_obj(const std::filesystem::path& path, const TriMesh& mesh)
{
    std::FILE* file = std::fopen(path.string().c_str(), "wb");
    if (file == nullptr) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
    for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
        std::fprintf(file, "v %.17g %.17g %.17g\n", mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2));
    }
    const bool uv = mesh.has_uv();
    if (uv) {
        for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
            std::fprintf(file, "vt %.17g %.17g\n", mesh.uv(i, 0), mesh.uv(i, 1));
        }
    }
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        const int a = mesh.faces(f, 0) + 1, b = mesh.faces(f, 1) + 1, c = mesh.faces(f, 2) + 1;
        if (uv) {
            std::fprintf(file, "f %d/%d %d/%d %d/%d\n", a, a, b, b, c, c);
        } else {
            std::fprintf(file, "f %d %d %d\n", a, b, c);
        }
    }
    const bool failed = std::ferror(file) != 0;
    std::fclose(file);
    if (failed) {
        throw Error(ErrorCode::Io, "write failed for " + path.string());
    }
}

} // namespace cariblend
