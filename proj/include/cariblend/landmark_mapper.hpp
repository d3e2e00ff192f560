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
#include "cariblend/face_model.hpp"

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <optional>
#include <string>

namespace cariblend {

/**
 * Translates landmarks between the caricature and normal-face domains.
 * forward: caricature -> normal face. inverse: normal face -> caricature.
 * Implementations must preserve the landmark count and be safe to call
 * concurrently.
 */
class LandmarkMapper {
public:
    virtual ~LandmarkMapper() = default;

    virtual LandmarkSet forward(const LandmarkSet& caricature) const = 0;
    virtual LandmarkSet inverse(const LandmarkSet& normal) const = 0;
    virtual std::string name() const = 0;
};

class IdentityMapper final : public LandmarkMapper {
public:
    LandmarkSet forward(const LandmarkSet& caricature) const override { return caricature; }
    LandmarkSet inverse(const LandmarkSet& normal) const override { return normal; }
    std::string name() const override { return "identity"; }
};

/// Caricature offsets from a center are gamma times their normal-face
/// counterparts. Without an explicit center, the centroid of each input is used.
class RadialExaggerationMapper final : public LandmarkMapper {
public:
    explicit RadialExaggerationMapper(double gamma, std::optional<Eigen::Vector2d> center = std::nullopt)
        : gamma_(gamma), center_(center)
    {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) {
            throw Error(ErrorCode::InvalidArgument, "exaggeration gamma must be positive");
        }
    }

    LandmarkSet forward(const LandmarkSet& caricature) const override { return scale_about_center(caricature, 1.0 / gamma_); }
    LandmarkSet inverse(const LandmarkSet& normal) const override { return scale_about_center(normal, gamma_); }
    std::string name() const override { return "radial"; }

    double gamma() const { return gamma_; }
    const std::optional<Eigen::Vector2d>& center() const { return center_; }

private:
    LandmarkSet scale_about_center(const LandmarkSet& in, double factor) const
    {
        if (in.size() == 0) {
            return in;
        }
        const Eigen::RowVector2d c = center_ ? Eigen::RowVector2d(center_->transpose())
                                             : Eigen::RowVector2d(in.points.colwise().mean());
        LandmarkSet out;
        out.points = ((in.points.rowwise() - c) * factor).rowwise() + c;
        return out;
    }

    double gamma_;
    std::optional<Eigen::Vector2d> center_;
};

inline LandmarkSet map_forward(const LandmarkMapper& mapper, const LandmarkSet& landmarks)
{
    return mapper.forward(landmarks);
}

inline LandmarkSet map_inverse(const LandmarkMapper& mapper, const LandmarkSet& landmarks)
{
    return mapper.inverse(landmarks);
}

} // namespace cariblend
