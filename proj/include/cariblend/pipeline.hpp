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

// End-to-end caricature blendshape construction and retargeting:
//
//   fit:      caricature landmarks -> mapper.forward -> morphable model fit
//   build:    for each bank expression e_i: swap expression, project, mapper.inverse,
//             handle-deform the caricature mesh, then jointly optimize all shapes
//   retarget: regress weights on the normal-face set, compose on the
//             caricature set, build the attention target and composite texture

#pragma once

#include "cariblend/blendshape.hpp"
#include "cariblend/blendshape_io.hpp"
#include "cariblend/error.hpp"
#include "cariblend/face_model.hpp"
#include "cariblend/fitting.hpp"
#include "cariblend/handle_deform.hpp"
#include "cariblend/image_io.hpp"
#include "cariblend/json_io.hpp"
#include "cariblend/landmark_mapper.hpp"
#include "cariblend/model_io.hpp"
#include "cariblend/obj_io.hpp"
#include "cariblend/optimize.hpp"
#include "cariblend/retarget.hpp"
#include "cariblend/texture.hpp"

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cariblend {

namespace fs = std::filesystem;

struct MapperConfig {
    std::string type = "identity";
    double gamma = 2.0;
    std::optional<Eigen::Vector2d> center;
};

inline std::unique_ptr<LandmarkMapper> make_mapper(const MapperConfig& cfg)
{
    if (cfg.type == "identity") {
        return std::make_unique<IdentityMapper>();
    }
    if (cfg.type == "radial") {
        return std::make_unique<RadialExaggerationMapper>(cfg.gamma, cfg.center);
    }
    throw Error(ErrorCode::Parse, "unknown mapper type '" + cfg.type + "' (expected identity or radial)");
}

struct PipelineConfig {
    fs::path model;
    fs::path caricature_mesh;
    fs::path caricature_landmarks;
    fs::path expression_bank;
    fs::path texture;
    fs::path color_mask;
    fs::path output_dir = "out";
    std::uint64_t seed = 42;
    MapperConfig mapper;
    FitOptions fit;
    double handle_weight = 1e3;
    OptimizationConfig optimization;
    RegressOptions retarget;
};

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

inline void apply_override(json& root, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCode::Parse, "override '" + assignment + "' must have the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw Error(ErrorCode::Parse, "override key '" + key + "' has an empty component");
        }
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        if (!node->contains(part) || !(*node)[part].is_object()) {
            (*node)[part] = json::object();
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

inline void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where)
{
    if (!obj.is_object()) {
        throw Error(ErrorCode::Parse, where + " must be an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.contains(it.key())) {
            throw Error(ErrorCode::Parse, "unknown config key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
        }
    }
}

} // namespace detail

/**
 * Converts a parsed config document. Relative paths are resolved against
 * `base_dir` (normally the directory of the config file).
 */
inline PipelineConfig config_from_json(const json& doc, const fs::path& base_dir)
{
    PipelineConfig cfg;
    try {
        detail::reject_unknown(doc,
                               {"model", "caricature_mesh", "caricature_landmarks", "expression_bank", "texture",
                                "color_mask", "output_dir", "seed", "mapper", "fit", "deform", "optimization",
                                "retarget"},
                               "");
        auto path_of = [&](const char* key) -> fs::path {
            if (!doc.contains(key) || doc.at(key).is_null()) {
                return {};
            }
            const fs::path p = doc.at(key).get<std::string>();
            return p.is_absolute() ? p : base_dir / p;
        };
        cfg.model = path_of("model");
        cfg.caricature_mesh = path_of("caricature_mesh");
        cfg.caricature_landmarks = path_of("caricature_landmarks");
        cfg.expression_bank = path_of("expression_bank");
        cfg.texture = path_of("texture");
        cfg.color_mask = path_of("color_mask");
        cfg.output_dir = doc.contains("output_dir") ? path_of("output_dir") : base_dir / "out";
        cfg.seed = doc.value("seed", std::uint64_t{42});

        if (doc.contains("mapper")) {
            const json& m = doc.at("mapper");
            detail::reject_unknown(m, {"type", "gamma", "center"}, "mapper");
            cfg.mapper.type = m.value("type", cfg.mapper.type);
            cfg.mapper.gamma = m.value("gamma", cfg.mapper.gamma);
            if (m.contains("center") && !m.at("center").is_null()) {
                const Eigen::VectorXd c = vector_from_json(m.at("center"), "mapper.center");
                if (c.size() != 2) {
                    throw Error(ErrorCode::Parse, "mapper.center must have two entries");
                }
                cfg.mapper.center = Eigen::Vector2d(c(0), c(1));
            }
        }
        if (doc.contains("fit")) {
            const json& f = doc.at("fit");
            detail::reject_unknown(f, {"reg_id", "reg_exp", "max_iterations", "tolerance"}, "fit");
            cfg.fit.reg_id = f.value("reg_id", cfg.fit.reg_id);
            cfg.fit.reg_exp = f.value("reg_exp", cfg.fit.reg_exp);
            cfg.fit.max_iterations = f.value("max_iterations", cfg.fit.max_iterations);
            cfg.fit.tolerance = f.value("tolerance", cfg.fit.tolerance);
        }
        if (doc.contains("deform")) {
            const json& d = doc.at("deform");
            detail::reject_unknown(d, {"handle_weight"}, "deform");
            cfg.handle_weight = d.value("handle_weight", cfg.handle_weight);
        }
        if (doc.contains("optimization")) {
            const json& o = doc.at("optimization");
            detail::reject_unknown(o, {"lambda_def", "lambda_str", "lambda_smo", "prox_epsilon", "solver", "tolerance",
                                       "max_iterations"},
                                   "optimization");
            auto& opt = cfg.optimization;
            opt.lambda_def = o.value("lambda_def", opt.lambda_def);
            opt.lambda_str = o.value("lambda_str", opt.lambda_str);
            opt.lambda_smo = o.value("lambda_smo", opt.lambda_smo);
            opt.prox_epsilon = o.value("prox_epsilon", opt.prox_epsilon);
            opt.tolerance = o.value("tolerance", opt.tolerance);
            opt.max_iterations = o.value("max_iterations", opt.max_iterations);
            const std::string solver = o.value("solver", std::string("iterative"));
            if (solver == "iterative") {
                opt.solver = SolverKind::Iterative;
            } else if (solver == "dense") {
                opt.solver = SolverKind::DenseDirect;
            } else {
                throw Error(ErrorCode::Parse, "optimization.solver must be 'iterative' or 'dense'");
            }
        }
        if (doc.contains("retarget")) {
            const json& r = doc.at("retarget");
            detail::reject_unknown(r, {"clamp", "ridge"}, "retarget");
            cfg.retarget.clamp = r.value("clamp", cfg.retarget.clamp);
            cfg.retarget.ridge = r.value("ridge", cfg.retarget.ridge);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("config: ") + e.what());
    }

    const auto& opt = cfg.optimization;
    if (opt.lambda_def < 0.0 || opt.lambda_str < 0.0 || opt.lambda_smo < 0.0) {
        throw Error(ErrorCode::Parse, "config: optimization lambdas must be nonnegative");
    }
    for (const fs::path* p : {&cfg.model, &cfg.caricature_mesh, &cfg.caricature_landmarks, &cfg.expression_bank,
                              &cfg.texture, &cfg.color_mask}) {
        if (!p->empty() && !fs::exists(*p)) {
            throw Error(ErrorCode::Io, "config references missing file " + p->string());
        }
    }
    return cfg;
}

/// Loads a config file, applies `key=value` overrides (dotted keys, values
/// parsed as JSON when possible) and an optional output directory override.
inline PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {},
                                  const std::optional<fs::path>& output_dir = std::nullopt)
{
    json doc = read_json(path);
    for (const auto& o : overrides) {
        detail::apply_override(doc, o);
    }
    PipelineConfig cfg = config_from_json(doc, path.parent_path());
    if (output_dir) {
        cfg.output_dir = *output_dir;
    }
    return cfg;
}

inline void require_path(const fs::path& p, const char* key)
{
    if (p.empty()) {
        throw Error(ErrorCode::Io, std::string("config does not set '") + key + "'");
    }
    if (!fs::exists(p)) {
        throw Error(ErrorCode::Io, "missing file " + p.string());
    }
}

// ---------------------------------------------------------------------------
// In-memory stages

inline std::vector<ExpressionCoeffs> expression_bank_from_json(const json& doc, Eigen::Index expected_dim)
{
    const json& arr = doc.is_object() && doc.contains("expressions") ? doc.at("expressions") : doc;
    if (!arr.is_array() || arr.empty()) {
        throw Error(ErrorCode::Parse, "expression bank must be a non-empty array of coefficient arrays");
    }
    std::vector<ExpressionCoeffs> bank;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        ExpressionCoeffs e{vector_from_json(arr[i], "expression_bank[" + std::to_string(i) + "]")};
        if (e.values.size() != expected_dim) {
            throw Error(ErrorCode::DimensionMismatch, "expression_bank[" + std::to_string(i) + "] has length " +
                                                          std::to_string(e.values.size()) + ", model expects " +
                                                          std::to_string(expected_dim));
        }
        bank.push_back(std::move(e));
    }
    return bank;
}

struct FitStage {
    LandmarkSet mapped;
    FitResult fit;
};

inline FitStage run_fit(const LinearFaceModel& model, const LandmarkSet& caricature_landmarks,
                        const LandmarkMapper& mapper, const FitOptions& options)
{
    FitStage stage;
    stage.mapped = map_forward(mapper, caricature_landmarks);
    stage.fit = fit_landmarks(model, stage.mapped, options);
    return stage;
}

struct ConstructionStage {
    /// Normal-domain landmarks per expression.
    std::vector<LandmarkSet> normal_landmarks;
    /// Caricature-domain landmarks per expression.
    std::vector<LandmarkSet> caricature_landmarks;
    BlendshapeSet normal;
    BlendshapeSet initial;
};

/**
 * Builds the parallel normal-face set and the initial caricature set.
 *
 * Handle targets lift the 2D landmark motion back to 3D through the fitted
 * camera: the image-plane offset of each caricature landmark (relative to the
 * mapped projection of the fitted face) gives the in-plane motion, and the
 * normal face's own displacement supplies the depth component, which the
 * projection cannot observe.
 */
inline ConstructionStage construct_initial_blendshapes(const LinearFaceModel& model, const FitResult& fit,
                                                       const TriMesh& caricature, const std::vector<ExpressionCoeffs>& bank,
                                                       const LandmarkMapper& mapper, double handle_weight,
                                                       Warnings* warnings = nullptr)
{
    if (!same_topology(caricature, model.mean)) {
        throw Error(ErrorCode::TopologyMismatch, "caricature mesh must share the morphable model topology");
    }
    const std::vector<int>& indices = model.landmark_indices;
    const Camera& cam = fit.camera;
    const Eigen::Matrix3d& rot = cam.rotation;

    ConstructionStage stage;
    stage.normal.base = evaluate(model, fit.id, fit.exp);
    const LandmarkSet reference = map_inverse(mapper, project(cam, stage.normal.base, indices));

    const HandleDeformer deformer(caricature, indices, handle_weight, warnings);
    for (const auto& e : bank) {
        TriMesh normal_shape = swap_expression(model, fit.id, e);
        LandmarkSet normal_lm = project(cam, normal_shape, indices);
        LandmarkSet cari_lm = map_inverse(mapper, normal_lm);

        Vertices targets(static_cast<Eigen::Index>(indices.size()), 3);
        for (std::size_t k = 0; k < indices.size(); ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            const int v = indices[k];
            const Eigen::Vector2d planar = (cari_lm.points.row(row) - reference.points.row(row)).transpose() / cam.scale;
            const Eigen::Vector3d normal_motion = (normal_shape.vertices.row(v) - stage.normal.base.vertices.row(v)).transpose();
            const Eigen::Vector3d camera_motion(planar.x(), planar.y(), rot.row(2).dot(normal_motion));
            targets.row(row) = caricature.vertices.row(v) + (rot.transpose() * camera_motion).transpose();
        }
        stage.initial.shapes.push_back(deformer.deform(targets));
        stage.normal.shapes.push_back(std::move(normal_shape));
        stage.normal_landmarks.push_back(std::move(normal_lm));
        stage.caricature_landmarks.push_back(std::move(cari_lm));
    }
    stage.initial.base = caricature;
    stage.initial.expression_bank = bank;
    stage.normal.expression_bank = bank;
    compute_residuals(stage.normal);
    compute_residuals(stage.initial);
    return stage;
}

struct ShapePipelineResult {
    FitStage fit;
    ConstructionStage construction;
    OptimizationResult optimization;
};

/// fit + construct + optimize, without touching the filesystem.
inline ShapePipelineResult run_shape_pipeline(const LinearFaceModel& model, const LandmarkSet& caricature_landmarks,
                                              const TriMesh& caricature, const std::vector<ExpressionCoeffs>& bank,
                                              const PipelineConfig& cfg, Warnings* warnings = nullptr)
{
    const auto mapper = make_mapper(cfg.mapper);
    ShapePipelineResult result;
    result.fit = run_fit(model, caricature_landmarks, *mapper, cfg.fit);
    result.construction = construct_initial_blendshapes(model, result.fit.fit, caricature, bank, *mapper,
                                                        cfg.handle_weight, warnings);
    result.optimization = optimize_blendshapes(result.construction.initial, result.construction.normal,
                                               cfg.optimization, warnings);
    return result;
}

struct RetargetResult {
    TriMesh normal_target;
    BlendWeights weights;
    TriMesh shape;
    LandmarkSet landmarks;
    AttentionMap attention;
    TextureMap texture;
};

inline RetargetResult retarget_expression(const LinearFaceModel& model, const FitResult& fit, const BlendshapeSet& normal,
                                          const BlendshapeSet& optimized, const ExpressionCoeffs& target,
                                          const TextureMap& source, const TextureMap& color, const RegressOptions& options,
                                          Warnings* warnings = nullptr)
{
    RetargetResult r;
    r.normal_target = swap_expression(model, fit.id, target);
    r.weights = regress_weights(normal, r.normal_target, options);
    r.shape = compose_shape(optimized, r.weights);
    r.landmarks = project(fit.camera, r.shape, model.landmark_indices);
    TriMesh chart = optimized.base;
    if (!chart.has_uv()) {
        throw Error(ErrorCode::InvalidArgument, "caricature mesh has no texture coordinates");
    }
    r.attention = attention_target(r.shape.vertices - optimized.base.vertices, chart, source.height, source.width, warnings);
    r.texture = composite_texture(source, color, r.attention);
    return r;
}

/// Composited texture with projected landmarks drawn as small red squares.
inline TextureMap render_landmark_overlay(const TextureMap& texture, const LandmarkSet& landmarks)
{
    TextureMap out = texture;
    for (Eigen::Index k = 0; k < landmarks.size(); ++k) {
        const auto cx = static_cast<int>(std::lround(landmarks.points(k, 0)));
        const auto cy = static_cast<int>(std::lround(landmarks.points(k, 1)));
        for (int y = cy - 1; y <= cy + 1; ++y) {
            for (int x = cx - 1; x <= cx + 1; ++x) {
                if (x >= 0 && y >= 0 && x < out.width && y < out.height) {
                    out.at(y, x, 0) = 1.0;
                    out.at(y, x, 1) = 0.0;
                    out.at(y, x, 2) = 0.0;
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands

/// Exit codes shared by every command.
enum ExitCode : int {
    kExitOk = 0,
    kExitIo = 1,
    kExitNumerical = 2,
};

class Log {
public:
    explicit Log(bool quiet, std::ostream& out = std::cerr) : quiet_(quiet), out_(out) {}

    void info(const std::string& message) const
    {
        if (!quiet_) {
            out_ << message << "\n";
        }
    }
    void warnings(const Warnings& w) const
    {
        for (const auto& m : w) {
            info("warning: " + m);
        }
    }
    void error(const std::string& message) const { out_ << "error: " << message << "\n"; }

private:
    bool quiet_;
    std::ostream& out_;
};

namespace detail {

inline EnergyBreakdown energy_from_json(const json& j)
{
    return {j.at("total").get<double>(), j.at("def").get<double>(), j.at("str").get<double>(),
            j.at("smo").get<double>(), j.at("prox").get<double>()};
}

inline json energy_to_json(const EnergyBreakdown& e)
{
    return json{{"total", e.total}, {"def", e.def}, {"str", e.str}, {"smo", e.smo}, {"prox", e.prox}};
}

inline LandmarkSet read_landmarks(const fs::path& path)
{
    const json doc = read_json(path);
    const json& arr = doc.is_object() && doc.contains("landmarks") ? doc.at("landmarks") : doc;
    return landmarks_from_json(arr, path.string());
}

struct FitFile {
    FitResult fit;
    std::string mapper;
};

inline FitFile read_fit(const fs::path& path)
{
    if (!fs::exists(path)) {
        throw Error(ErrorCode::Io, "missing fit output " + path.string() + " (run 'fit' first)");
    }
    const json doc = read_json(path);
    FitFile out;
    try {
        out.fit.id.values = vector_from_json(doc.at("identity"), "identity");
        out.fit.exp.values = vector_from_json(doc.at("expression"), "expression");
        out.fit.camera = camera_from_json(doc.at("camera"));
        out.fit.rms = doc.at("rms").get<double>();
        out.fit.iterations = doc.at("iterations").get<int>();
        out.fit.converged = doc.at("converged").get<bool>();
        out.mapper = doc.value("mapper", std::string("identity"));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
    return out;
}

template <typename Body>
int run_command(const Log& log, Body&& body)
{
    try {
        body();
        return kExitOk;
    } catch (const Error& e) {
        log.error(e.what());
        return e.is_io() ? kExitIo : kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        log.error(e.what());
        return kExitIo;
    } catch (const json::exception& e) {
        log.error(e.what());
        return kExitIo;
    }
}

} // namespace detail

/// Writes <out>/fit.json with coefficients, camera and landmark RMS.
inline int cmd_fit(const PipelineConfig& cfg, const Log& log)
{
    return detail::run_command(log, [&] {
        require_path(cfg.model, "model");
        require_path(cfg.caricature_landmarks, "caricature_landmarks");
        const LinearFaceModel model = read_face_model(cfg.model);
        const LandmarkSet landmarks = detail::read_landmarks(cfg.caricature_landmarks);
        const auto mapper = make_mapper(cfg.mapper);

        const FitStage stage = run_fit(model, landmarks, *mapper, cfg.fit);
        fs::create_directories(cfg.output_dir);
        json rms_history = json::array();
        for (double r : stage.fit.rms_history) {
            rms_history.push_back(r);
        }
        write_json(cfg.output_dir / "fit.json", json{{"identity", vector_to_json(stage.fit.id.values)},
                                                     {"expression", vector_to_json(stage.fit.exp.values)},
                                                     {"camera", camera_to_json(stage.fit.camera)},
                                                     {"rms", stage.fit.rms},
                                                     {"iterations", stage.fit.iterations},
                                                     {"converged", stage.fit.converged},
                                                     {"rms_history", rms_history},
                                                     {"mapper", mapper->name()},
                                                     {"seed", cfg.seed}});
        write_json(cfg.output_dir / "mapped_landmarks.json", landmarks_to_json(stage.mapped));
        log.info("fit: rms " + std::to_string(stage.fit.rms) + " px after " + std::to_string(stage.fit.iterations) +
                 " iterations" + (stage.fit.converged ? "" : " (iteration cap reached)"));
    });
}

/// Writes the normal, initial and optimized sets plus masks, weights and an energy report.
inline int cmd_build(const PipelineConfig& cfg, const Log& log)
{
    return detail::run_command(log, [&] {
        require_path(cfg.model, "model");
        require_path(cfg.caricature_mesh, "caricature_mesh");
        require_path(cfg.expression_bank, "expression_bank");
        const LinearFaceModel model = read_face_model(cfg.model);
        const detail::FitFile fit = detail::read_fit(cfg.output_dir / "fit.json");
        const TriMesh caricature = read_obj(cfg.caricature_mesh);
        const auto bank = expression_bank_from_json(read_json(cfg.expression_bank), model.num_expression());
        const auto mapper = make_mapper(cfg.mapper);

        Warnings warnings;
        const ConstructionStage stage =
            construct_initial_blendshapes(model, fit.fit, caricature, bank, *mapper, cfg.handle_weight, &warnings);
        const OptimizationResult opt = optimize_blendshapes(stage.initial, stage.normal, cfg.optimization, &warnings);
        log.warnings(warnings);

        write_blendshape_set(cfg.output_dir / "normal", stage.normal);
        write_blendshape_set(cfg.output_dir / "initial", stage.initial);
        write_blendshape_set(cfg.output_dir / "optimized", opt.optimized);

        json landmarks = json::array();
        for (std::size_t i = 0; i < bank.size(); ++i) {
            landmarks.push_back(json{{"index", i},
                                     {"normal", landmarks_to_json(stage.normal_landmarks[i])},
                                     {"caricature", landmarks_to_json(stage.caricature_landmarks[i])}});
        }
        write_json(cfg.output_dir / "landmarks.json", landmarks);

        json masks = json::array();
        for (const auto& m : opt.masks) {
            masks.push_back(vector_to_json(m));
        }
        write_json(cfg.output_dir / "masks.json", masks);
        write_json(cfg.output_dir / "structure_weights.json",
                   json{{"raw", matrix_to_json(opt.weights.raw)}, {"clamped", matrix_to_json(opt.weights.clamped)}});
        write_json(cfg.output_dir / "energy.json", json{{"before", detail::energy_to_json(opt.energy_before)},
                                                        {"after", detail::energy_to_json(opt.energy_after)},
                                                        {"iterations", opt.iterations},
                                                        {"relative_residual", opt.relative_residual},
                                                        {"gradient_ratio", opt.gradient_ratio},
                                                        {"kept_initial", opt.kept_initial},
                                                        {"lambda_def", cfg.optimization.lambda_def},
                                                        {"lambda_str", cfg.optimization.lambda_str},
                                                        {"lambda_smo", cfg.optimization.lambda_smo},
                                                        {"prox_epsilon", cfg.optimization.prox_epsilon}});
        log.info("build: " + std::to_string(bank.size()) + " blendshapes, energy " +
                 std::to_string(opt.energy_before.total) + " -> " + std::to_string(opt.energy_after.total));
    });
}

/// Composes the target expression on the optimized set and writes mesh, texture, attention and overlay.
inline int cmd_retarget(const PipelineConfig& cfg, const fs::path& target_path, const Log& log)
{
    return detail::run_command(log, [&] {
        require_path(cfg.model, "model");
        require_path(cfg.texture, "texture");
        require_path(cfg.color_mask, "color_mask");
        if (!fs::exists(target_path)) {
            throw Error(ErrorCode::Io, "missing target expression " + target_path.string());
        }
        const LinearFaceModel model = read_face_model(cfg.model);
        const detail::FitFile fit = detail::read_fit(cfg.output_dir / "fit.json");
        const BlendshapeSet normal = read_blendshape_set(cfg.output_dir / "normal");
        const BlendshapeSet optimized = read_blendshape_set(cfg.output_dir / "optimized");
        const ExpressionCoeffs target{read_coefficients(target_path)};
        const TextureMap source = read_ppm(cfg.texture);
        const TextureMap color = read_ppm(cfg.color_mask);

        Warnings warnings;
        const RetargetResult r =
            retarget_expression(model, fit.fit, normal, optimized, target, source, color, cfg.retarget, &warnings);
        log.warnings(warnings);

        const fs::path dir = cfg.output_dir / "retarget";
        fs::create_directories(dir);
        write_obj(dir / "mesh.obj", r.shape);
        write_ppm(dir / "texture.ppm", r.texture);
        write_pgm(dir / "attention.pgm", r.attention);
        write_ppm(dir / "overlay.ppm", render_landmark_overlay(r.texture, r.landmarks));
        write_json(dir / "retarget.json", json{{"target_expression", vector_to_json(target.values)},
                                               {"weights", vector_to_json(r.weights.values)},
                                               {"landmarks", landmarks_to_json(r.landmarks)},
                                               {"clamp", cfg.retarget.clamp},
                                               {"ridge", cfg.retarget.ridge}});
        log.info("retarget: wrote " + dir.string());
    });
}

} // namespace cariblend
