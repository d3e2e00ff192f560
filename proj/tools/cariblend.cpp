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

// cariblend: fit | build | retarget | synth

#include "cariblend/pipeline.hpp"
#include "cariblend/synthetic.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonFlags {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags)
{
    cmd->add_option("--config", flags.config, "Pipeline config (JSON)")->required();
    cmd->add_option("--set", flags.overrides, "Override a config value, key=value (repeatable)");
    cmd->add_option("--out", flags.out, "Output directory (overrides output_dir)");
    cmd->add_flag("--quiet", flags.quiet, "Only report errors");
}

int with_config(const CommonFlags& flags, const std::function<int(const cariblend::PipelineConfig&, const cariblend::Log&)>& run)
{
    const cariblend::Log log(flags.quiet);
    try {
        std::optional<std::filesystem::path> out;
        if (!flags.out.empty()) {
            out = flags.out;
        }
        const auto cfg = cariblend::load_config(flags.config, flags.overrides, out);
        return run(cfg, log);
    } catch (const cariblend::Error& e) {
        log.error(e.what());
        return e.is_io() ? cariblend::kExitIo : cariblend::kExitNumerical;
    } catch (const std::exception& e) {
        log.error(e.what());
        return cariblend::kExitIo;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Caricature expression blendshapes: fit, build, retarget"};
    app.require_subcommand(1);

    CommonFlags fit_flags, build_flags, retarget_flags;
    auto* fit = app.add_subcommand("fit", "Fit the morphable model to mapped caricature landmarks");
    add_common(fit, fit_flags);
    auto* build = app.add_subcommand("build", "Construct and optimize the caricature blendshapes");
    add_common(build, build_flags);
    auto* retarget = app.add_subcommand("retarget", "Apply a target expression to the caricature");
    add_common(retarget, retarget_flags);
    std::string target;
    retarget->add_option("--target", target, "Target expression coefficients (JSON array)")->required();

    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic subject and config");
    std::string synth_out;
    cariblend::SyntheticOptions synth_options;
    int grid = synth_options.model.grid_x;
    synth->add_option("--out", synth_out, "Fixture directory")->required();
    synth->add_option("--grid", grid, "Vertices per grid side");
    synth->add_option("--shapes", synth_options.num_shapes, "Blendshape count (including the neutral)");
    synth->add_option("--identity", synth_options.model.num_identity, "Identity basis size");
    synth->add_option("--expression", synth_options.model.num_expression, "Expression basis size");
    synth->add_option("--landmarks", synth_options.model.num_landmarks, "Landmark count");
    synth->add_option("--gamma", synth_options.gamma, "Caricature exaggeration factor");
    synth->add_option("--seed", synth_options.seed, "Random seed");

    CLI11_PARSE(app, argc, argv);

    if (*fit) {
        return with_config(fit_flags, [](const auto& cfg, const auto& log) { return cariblend::cmd_fit(cfg, log); });
    }
    if (*build) {
        return with_config(build_flags, [](const auto& cfg, const auto& log) { return cariblend::cmd_build(cfg, log); });
    }
    if (*retarget) {
        return with_config(retarget_flags, [&](const auto& cfg, const auto& log) {
            return cariblend::cmd_retarget(cfg, target, log);
        });
    }
    const cariblend::Log log(false);
    try {
        synth_options.model.grid_x = synth_options.model.grid_y = grid;
        synth_options.model.seed = synth_options.seed;
        cariblend::write_synthetic_fixture(synth_out, cariblend::make_synthetic_fixture(synth_options), synth_options.seed);
        log.info("synth: wrote " + synth_out);
        return cariblend::kExitOk;
    } catch (const cariblend::Error& e) {
        log.error(e.what());
        return e.is_io() ? cariblend::kExitIo : cariblend::kExitNumerical;
    } catch (const std::exception& e) {
        log.error(e.what());
        return cariblend::kExitIo;
    }
}
