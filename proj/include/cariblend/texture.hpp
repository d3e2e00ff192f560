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

#include "cariblend/blendshape.hpp"
#include "cariblend/error.hpp"
#include "cariblend/face_model.hpp"
#include "cariblend/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace cariblend {

/// Row-major H x W image with C interleaved channels in [0, 1].
template <int Channels>
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    static constexpr int channels = Channels;

    Image() = default;
    Image(int h, int w, double fill = 0.0) : height(h), width(w), data(static_cast<std::size_t>(h) * w * Channels, fill)
    {
        if (h < 1 || w < 1) {
            throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
        }
    }

    double& at(int y, int x, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * Channels + c]; }
    double at(int y, int x, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * Channels + c]; }
    std::size_t num_texels() const { return static_cast<std::size_t>(height) * width; }
};

using TextureMap = Image<3>;
using AttentionMap = Image<1>;

namespace detail {

template <int A, int B>
void require_same_size(const Image<A>& a, const Image<B>& b, const char* what)
{
    if (a.height != b.height || a.width != b.width) {
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": " + std::to_string(a.height) + "x" +
                                                      std::to_string(a.width) + " vs " + std::to_string(b.height) +
                                                      "x" + std::to_string(b.width));
    }
}

} // namespace detail

/// T_out = A * source + (1 - A) * color, per texel and channel.
inline TextureMap composite_texture(const TextureMap& source, const TextureMap& color, const AttentionMap& attention)
{
    detail::require_same_size(source, color, "composite_texture");
    detail::require_same_size(source, attention, "composite_texture");
    TextureMap out(source.height, source.width);
    for (int y = 0; y < source.height; ++y) {
        for (int x = 0; x < source.width; ++x) {
            const double a = attention.at(y, x);
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = a * source.at(y, x, c) + (1.0 - a) * color.at(y, x, c);
            }
        }
    }
    return out;
}

/// Texel centre in UV space. Row 0 is the top of the image, i.e. v = 1.
inline Eigen::Vector2d texel_center_uv(int y, int x, int height, int width)
{
    return {(x + 0.5) / width, 1.0 - (y + 0.5) / height};
}

/**
 * Supervised attention target from a per-vertex displacement: the normalized
 * displacement m is interpolated barycentrically over the UV triangles and
 * the attention is 1 - m. Texels outside the chart keep attention 1. Where
 * triangles overlap, the later face wins. UV triangles with zero area are
 * skipped with a warning.
 */
inline AttentionMap attention_target(const VectorField& delta, const TriMesh& mesh, int height, int width,
                                     Warnings* warnings = nullptr)
{
    if (!mesh.has_uv()) {
        throw Error(ErrorCode::InvalidArgument, "attention_target needs per-vertex UVs");
    }
    if (delta.rows() != mesh.num_vertices()) {
        throw Error(ErrorCode::DimensionMismatch, "displacement does not match the mesh");
    }
    const ScalarField m = displacement_mask(delta, zero_residual_epsilon(mesh.vertices));
    AttentionMap out(height, width, 1.0);

    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        const int i0 = mesh.faces(f, 0), i1 = mesh.faces(f, 1), i2 = mesh.faces(f, 2);
        const Eigen::Vector2d a = mesh.uv.row(i0), b = mesh.uv.row(i1), c = mesh.uv.row(i2);
        const double area2 = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        if (std::abs(area2) < 1e-14) {
            warn(warnings, "skipping degenerate UV triangle " + std::to_string(f));
            continue;
        }
        // Pixel rows/columns whose centres can fall inside the UV bounding box.
        const double umin = std::min({a.x(), b.x(), c.x()}), umax = std::max({a.x(), b.x(), c.x()});
        const double vmin = std::min({a.y(), b.y(), c.y()}), vmax = std::max({a.y(), b.y(), c.y()});
        const int x0 = std::max(0, static_cast<int>(std::floor(umin * width - 0.5)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(umax * width - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor((1.0 - vmax) * height - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil((1.0 - vmin) * height - 0.5)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector2d p = texel_center_uv(y, x, height, width);
                const double w1 = ((p - a).x() * (c - a).y() - (p - a).y() * (c - a).x()) / area2;
                const double w2 = ((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x()) / area2;
                const double w0 = 1.0 - w1 - w2;
                constexpr double kInside = -1e-12;
                if (w0 < kInside || w1 < kInside || w2 < kInside) {
                    continue;
                }
                const double value = w0 * m(i0) + w1 * m(i1) + w2 * m(i2);
                out.at(y, x) = std::clamp(1.0 - value, 0.0, 1.0);
            }
        }
    }
    return out;
}

/// Mean absolute difference over texels.
inline double loss_att(const AttentionMap& pred, const AttentionMap& target)
{
    detail::require_same_size(pred, target, "loss_att");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        sum += std::abs(pred.data[i] - target.data[i]);
    }
    return sum / static_cast<double>(pred.data.size());
}

/// Mean absolute difference over texels and channels.
inline double loss_color(const TextureMap& pred, const TextureMap& target)
{
    detail::require_same_size(pred, target, "loss_color");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        sum += std::abs(pred.data[i] - target.data[i]);
    }
    return sum / static_cast<double>(pred.data.size());
}

/// Squared Euclidean distance between coefficient vectors.
inline double loss_exp(const ExpressionCoeffs& pred, const ExpressionCoeffs& target)
{
    if (pred.values.size() != target.values.size()) {
        throw Error(ErrorCode::DimensionMismatch, "expression coefficient lengths differ");
    }
    return (pred.values - target.values).squaredNorm();
}

} // namespace cariblend
