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

// Runs the cariblend executable end to end on synthetic subjects.

#include "cariblend/blendshape_io.hpp"
#include "cariblend/json_io.hpp"
#include "cariblend/obj_io.hpp"
#include "cariblend/pipeline.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace cariblend {
namespace {

namespace fs = std::filesystem;

struct CliRun {
    int code = -1;
    std::string err;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CliRun cli(const std::string& args, const fs::path& workdir)
{
    const fs::path err = workdir / "stderr.txt";
    const std::string cmd = std::string(CARIBLEND_CLI) + " " + args + " 2> " + err.string() + " > /dev/null";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
}

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("cariblend_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path synth(const std::string& name, const std::string& extra = "")
{
    const fs::path dir = fresh_dir(name);
    const CliRun r = cli("synth --out " + (dir / "fx").string() + " " + extra, dir);
    EXPECT_EQ(r.code, 0) << r.err;
    return dir;
}

std::string config(const fs::path& dir) { return "--config " + (dir / "fx" / "config.json").string(); }

double relative(const Eigen::VectorXd& got, const Eigen::VectorXd& want) { return (got - want).norm() / want.norm(); }

TEST(Cli, FitRecoversSeededCoefficients)
{
    const fs::path dir = synth("fit");
    const CliRun r = cli("fit --quiet " + config(dir) + " --set fit.reg_id=1e-6 --set fit.reg_exp=1e-6", dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const json fit = read_json(dir / "fx" / "out" / "fit.json");
    const json truth = read_json(dir / "fx" / "ground_truth.json");
    EXPECT_LE(relative(vector_from_json(fit["identity"], "id"), vector_from_json(truth["identity"], "id")), 1e-3);
    EXPECT_LE(relative(vector_from_json(fit["expression"], "exp"), vector_from_json(truth["expression"], "exp")), 1e-3);
    EXPECT_EQ(fit["mapper"], "radial");
    EXPECT_TRUE(fs::exists(dir / "fx" / "out" / "mapped_landmarks.json"));
}

TEST(Cli, MissingFileExitsOneWithPath)
{
    const fs::path dir = synth("missing");
    fs::remove(dir / "fx" / "landmarks.json");
    const CliRun r = cli("fit " + config(dir), dir);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find((dir / "fx" / "landmarks.json").string()), std::string::npos) << r.err;

    const CliRun no_config = cli("fit --config " + (dir / "nope.json").string(), dir);
    EXPECT_EQ(no_config.code, 1);
    EXPECT_NE(no_config.err.find("nope.json"), std::string::npos);
}

TEST(Cli, MalformedJsonReportsLine)
{
    const fs::path dir = synth("malformed");
    {
        std::ofstream out(dir / "fx" / "landmarks.json");
        out << "[\n  [1, 2],\n  [3, 4],\n  [5 6]\n]\n";
    }
    const CliRun r = cli("fit " + config(dir), dir);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
}

TEST(Cli, ConfigErrorsExitOne)
{
    const fs::path dir = synth("config_errors");
    EXPECT_EQ(cli("fit " + config(dir) + " --set fit.bogus=1", dir).code, 1);
    EXPECT_EQ(cli("fit " + config(dir) + " --set mapper.type=warp", dir).code, 1);
    EXPECT_EQ(cli("fit " + config(dir) + " --set optimization.lambda_str=-1", dir).code, 1);
    EXPECT_EQ(cli("build " + config(dir), dir).code, 1) << "build without fit output";
}

TEST(Cli, NumericalFailureExitsTwo)
{
    const fs::path dir = synth("numerical", "--landmarks 4");
    const CliRun r = cli("fit " + config(dir) + " --set fit.reg_id=0 --set fit.reg_exp=0", dir);
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_NE(r.err.find("RankDeficient"), std::string::npos) << r.err;
}

TEST(Cli, BuildLowersEnergyAndIsDeterministic)
{
    const fs::path dir = synth("build");
    ASSERT_EQ(cli("fit --quiet " + config(dir), dir).code, 0);
    ASSERT_EQ(cli("build --quiet " + config(dir), dir).code, 0);
    const fs::path out = dir / "fx" / "out";
    const json energy = read_json(out / "energy.json");
    EXPECT_LE(energy["after"]["total"].get<double>(), energy["before"]["total"].get<double>());
    for (const char* f : {"masks.json", "structure_weights.json", "landmarks.json", "normal/manifest.json",
                          "initial/manifest.json", "optimized/shape_04.obj"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }

    const fs::path rerun = dir / "rerun";
    ASSERT_EQ(cli("fit --quiet " + config(dir) + " --out " + rerun.string(), dir).code, 0);
    ASSERT_EQ(cli("build --quiet " + config(dir) + " --out " + rerun.string(), dir).code, 0);
    for (const char* f : {"fit.json", "mapped_landmarks.json", "energy.json", "masks.json", "structure_weights.json",
                          "landmarks.json", "normal/manifest.json", "initial/manifest.json", "optimized/manifest.json",
                          "optimized/shape_03.obj", "initial/shape_02.obj"}) {
        EXPECT_EQ(slurp(out / f), slurp(rerun / f)) << f;
    }
}

TEST(Cli, DegeneratePipelineReproducesMaskedNormalDeltas)
{
    // Caricature = the normal face, identity mapper, every vertex a stiff handle,
    // and only the deformation and proximity terms active.
    const fs::path dir = synth("degenerate", "--landmarks 100 --gamma 1");
    const std::string sets = " --set mapper.type=identity --set deform.handle_weight=1e12"
                             " --set optimization.lambda_str=0 --set optimization.lambda_smo=0";
    ASSERT_EQ(cli("fit --quiet " + config(dir) + sets, dir).code, 0);
    const CliRun r = cli("build --quiet " + config(dir) + sets, dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const fs::path out = dir / "fx" / "out";
    const BlendshapeSet normal = read_blendshape_set(out / "normal");
    const BlendshapeSet optimized = read_blendshape_set(out / "optimized");
    const json masks = read_json(out / "masks.json");
    ASSERT_EQ(normal.size(), optimized.size());
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < normal.size(); ++i) {
        const ScalarField m = vector_from_json(masks[i], "mask");
        const VectorField want = apply_mask(m, normal.deltas[i]);
        scale = std::max(scale, want.cwiseAbs().maxCoeff());
        err = std::max(err, (optimized.deltas[i] - want).cwiseAbs().maxCoeff());
    }
    ASSERT_GT(scale, 0.0);
    EXPECT_LE(err / scale, 1e-6);
}

class CliRetarget : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        dir_ = synth("retarget");
        ASSERT_EQ(cli("fit --quiet " + config(dir_), dir_).code, 0);
        ASSERT_EQ(cli("build --quiet " + config(dir_), dir_).code, 0);
    }

    static TriMesh retarget(const Eigen::VectorXd& e, const std::string& name)
    {
        const fs::path target = dir_ / (name + ".json");
        write_json(target, vector_to_json(e));
        const CliRun r = cli("retarget --quiet " + config(dir_) + " --target " + target.string(), dir_);
        EXPECT_EQ(r.code, 0) << r.err;
        return read_obj(dir_ / "fx" / "out" / "retarget" / "mesh.obj");
    }

    static double max_diff(const TriMesh& a, const TriMesh& b) { return (a.vertices - b.vertices).cwiseAbs().maxCoeff(); }

    static inline fs::path dir_;
};

TEST_F(CliRetarget, BankExpressionsReproduceOptimizedShapes)
{
    const BlendshapeSet optimized = read_blendshape_set(dir_ / "fx" / "out" / "optimized");
    const json bank = read_json(dir_ / "fx" / "bank.json");
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const TriMesh out = retarget(vector_from_json(bank[i], "e"), "bank_" + std::to_string(i));
        EXPECT_LE(max_diff(out, optimized.shapes[i]), 1e-8) << "e_" << i;
    }
}

TEST_F(CliRetarget, SpanTargetMatchesDenseComposition)
{
    const BlendshapeSet optimized = read_blendshape_set(dir_ / "fx" / "out" / "optimized");
    const json truth = read_json(dir_ / "fx" / "ground_truth.json");
    const Eigen::VectorXd w_star = vector_from_json(truth["target_weights"], "w");
    const TriMesh out = retarget(read_coefficients(dir_ / "fx" / "target.json"), "span");
    Vertices want = optimized.shapes[0].vertices;
    for (Eigen::Index i = 0; i < w_star.size(); ++i) {
        want += w_star(i) * (optimized.shapes[static_cast<std::size_t>(i + 1)].vertices - optimized.shapes[0].vertices);
    }
    EXPECT_LE((out.vertices - want).cwiseAbs().maxCoeff(), 1e-8);

    const fs::path rt = dir_ / "fx" / "out" / "retarget";
    const json report = read_json(rt / "retarget.json");
    EXPECT_LE((vector_from_json(report["weights"], "w") - w_star).cwiseAbs().maxCoeff(), 1e-8);
    const TextureMap texture = read_ppm(rt / "texture.ppm");
    const AttentionMap attention = read_pgm(rt / "attention.pgm");
    const TextureMap overlay = read_ppm(rt / "overlay.ppm");
    EXPECT_EQ(texture.height, 32);
    EXPECT_EQ(attention.width, 32);
    EXPECT_EQ(overlay.width, texture.width);
    EXPECT_LT(*std::min_element(attention.data.begin(), attention.data.end()), 1.0);
}

TEST(Cli, RetargetRankDeficientWithoutRidgeExitsTwo)
{
    const fs::path dir = synth("rank", "--shapes 9");
    ASSERT_EQ(cli("fit --quiet " + config(dir), dir).code, 0);
    ASSERT_EQ(cli("build --quiet " + config(dir), dir).code, 0);
    const std::string target = " --target " + (dir / "fx" / "target.json").string();
    const CliRun r = cli("retarget " + config(dir) + target, dir);
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_NE(r.err.find("RankDeficient"), std::string::npos);
    EXPECT_EQ(cli("retarget --quiet " + config(dir) + target + " --set retarget.ridge=1e-8", dir).code, 0);
}

TEST(Config, OverridesAndRelativePaths)
{
    const fs::path dir = synth("overrides");
    const PipelineConfig cfg = load_config(dir / "fx" / "config.json",
                                           {"optimization.lambda_str=0.5", "mapper.gamma=3", "retarget.clamp=true",
                                            "optimization.solver=dense", "seed=7"});
    EXPECT_EQ(cfg.optimization.lambda_str, 0.5);
    EXPECT_EQ(cfg.optimization.lambda_def, 1.0);
    EXPECT_EQ(cfg.optimization.solver, SolverKind::DenseDirect);
    EXPECT_EQ(cfg.mapper.gamma, 3.0);
    EXPECT_TRUE(cfg.retarget.clamp);
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_EQ(cfg.model, dir / "fx" / "model/model.json");
    EXPECT_EQ(cfg.output_dir, dir / "fx" / "out");

    const PipelineConfig defaults = load_config(dir / "fx" / "config.json");
    EXPECT_EQ(defaults.seed, 42u);
    EXPECT_EQ(defaults.optimization.lambda_str, 0.1);
    EXPECT_THROW(load_config(dir / "fx" / "config.json", {"noequals"}), Error);
}

} // namespace
} // namespace cariblend
