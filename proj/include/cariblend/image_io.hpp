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

// Binary PPM (P6) and PGM (P5) with maxval 255. Byte values map linearly to [0, 1].

#pragma once

#include "cariblend/error.hpp"
#include "cariblend/texture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cariblend {

namespace detail {

inline int read_netpbm_int(std::istream& in, const std::string& path)
{
    // Skip whitespace and '#' comments between header fields.
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    if (!(in >> value)) {
        throw Error(ErrorCode::Parse, path + ": malformed netpbm header");
    }
    return value;
}

template <int Channels>
Image<Channels> read_netpbm(const std::filesystem::path& path, const char* magic)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    std::string header(2, '\0');
    in.read(header.data(), 2);
    if (header != magic) {
        throw Error(ErrorCode::Parse, path.string() + ": expected " + magic + " header");
    }
    const int width = read_netpbm_int(in, path.string());
    const int height = read_netpbm_int(in, path.string());
    const int maxval = read_netpbm_int(in, path.string());
    if (width < 1 || height < 1 || maxval != 255) {
        throw Error(ErrorCode::Parse, path.string() + ": unsupported dimensions or maxval (need maxval 255)");
    }
    in.get(); // single whitespace byte before the raster
    std::vector<unsigned char> raster(static_cast<std::size_t>(width) * height * Channels);
    in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (in.gcount() != static_cast<std::streamsize>(raster.size())) {
        throw Error(ErrorCode::Parse, path.string() + ": truncated raster");
    }
    Image<Channels> image(height, width);
    for (std::size_t i = 0; i < raster.size(); ++i) {
        image.data[i] = raster[i] / 255.0;
    }
    return image;
}

template <int Channels>
void write_netpbm(const std::filesystem::path& path, const Image<Channels>& image, const char* magic)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
    out << magic << "\n" << image.width << " " << image.height << "\n255\n";
    std::vector<unsigned char> raster(image.data.size());
    for (std::size_t i = 0; i < raster.size(); ++i) {
        raster[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!out) {
        throw Error(ErrorCode::Io, "write failed for " + path.string());
    }
}

} // namespace detail

inline TextureMap read_ppm(const std::filesystem::path& path) { return detail::read_netpbm<3>(path, "P6"); }
inline AttentionMap read_pgm(const std::filesystem::path& path) { return detail::read_netpbm<1>(path, "P5"); }
inline void write_ppm(const std::filesystem::path& path, const TextureMap& image) { detail::write_netpbm(path, image, "P6"); }
inline void write_pgm(const std::filesystem::path& path, const AttentionMap& image) { detail::write_netpbm(path, image, "P5"); }

} // namespace cariblend
