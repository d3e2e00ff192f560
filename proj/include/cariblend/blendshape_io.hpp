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

// A blendshape set on disk is a directory holding base.obj, shape_XX.obj
// and manifest.json (ordering, neutral index, expression bank).

#pragma once

#include "cariblend/blendshape.hpp"
#include "cariblend/error.hpp"
#include "cariblend/json_io.hpp"
#include "cariblend/obj_io.hpp"

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace cariblend {

inline void write_blendshape_set(const std::filesystem::path& dir, const BlendshapeSet& set)
{
    std::filesystem::create_directories(dir);
    write_obj(dir / "base.obj", set.base);
    json shapes = json::array();
    for (std::size_t i = 0; i < set.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "shape_%02zu.obj", i);
        write_obj(dir / name, set.shapes[i]);
        shapes.push_back(name);
    }
    json bank = json::array();
    for (const auto& e : set.expression_bank) {
        bank.push_back(vector_to_json(e.values));
    }
    write_json(dir / "manifest.json", json{{"count", set.size()},
                                          {"neutral_index", 0},
                                          {"base", "base.obj"},
                                          {"shapes", shapes},
                                          {"expression_bank", bank}});
}

inline BlendshapeSet read_blendshape_set(const std::filesystem::path& dir)
{
    const auto manifest_path = dir / "manifest.json";
    const json manifest = read_json(manifest_path);
    BlendshapeSet set;
    try {
        set.base = read_obj(dir / manifest.at("base").get<std::string>());
        for (const auto& name : manifest.at("shapes")) {
            set.shapes.push_back(read_obj(dir / name.get<std::string>()));
        }
        if (manifest.contains("expression_bank")) {
            for (const auto& e : manifest.at("expression_bank")) {
                set.expression_bank.push_back({vector_from_json(e, "expression_bank")});
            }
        }
        if (manifest.value("neutral_index", 0) != 0) {
            throw Error(ErrorCode::Parse, manifest_path.string() + ": only neutral_index 0 is supported");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, manifest_path.string() + ": " + e.what());
    }
    if (!set.expression_bank.empty() && set.expression_bank.size() != set.shapes.size()) {
        throw Error(ErrorCode::Parse, manifest_path.string() + ": expression bank length differs from shape count");
    }
    compute_residuals(set);
    return set;
}

} // namespace cariblend
