// SPDX-License-Identifier: Apache-2.0
//
// cfmimo: consumption-aware precoding for cell-free massive MIMO OFDM downlink
// Copyright (C) 2026 the cfmimo authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cfmimo/harness.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 1;
    arma::uword realizations = 0; // 0 = experiment default
    std::string out;
    bool quick = false;
    unsigned workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON system configuration file");
    cmd->add_option("--seed", args.seed, "root seed of the run")->capture_default_str();
    cmd->add_option("--realizations", args.realizations, "Monte-Carlo realizations per point");
    cmd->add_option("--out", args.out, "output CSV path");
    cmd->add_flag("--quick", args.quick, "desk-scale profile: band <= 64, 20 realizations");
    cmd->add_option("--workers", args.workers, "worker threads (0 = all cores)");
}

cfmimo::ExperimentSpec build_spec(cfmimo::ExperimentSpec spec, const CommonArgs& args,
                                  const std::string& default_out) {
    if (!args.config_path.empty())
        spec.base = cfmimo::load_config(args.config_path);
    spec.seed = args.seed;
    if (args.realizations > 0)
        spec.realizations = args.realizations;
    spec.workers = args.workers;
    spec.output_path = args.out.empty() ? default_out : args.out;
    if (args.quick)
        spec.apply_quick_profile();
    return spec;
}

int finish(const cfmimo::ExperimentSpec& spec, const cfmimo::MonteCarloResult& result) {
    std::cout << "wrote " << spec.output_path << " (" << result.table.rows.size() << " rows)"
              << std::endl;
    if (result.skipped_points > 0)
        std::cerr << "note: " << result.skipped_points << " infeasible sweep points skipped"
                  << std::endl;
    if (result.excluded_records > 0)
        std::cerr << "note: " << result.excluded_records
                  << " realizations excluded (solver did not converge)" << std::endl;
    if (result.violation_records > 0) {
        std::cerr << "error: " << result.violation_records << " realizations violated invariants"
                  << std::endl;
        for (const auto& rec : result.records)
            if (rec.violation)
                std::cerr << "  [" << rec.sweep_key << " r" << rec.realization << "] " << rec.error
                          << std::endl;
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cell-free massive MIMO consumption-aware precoding experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("cfmimo-sim ") + cfmimo::kVersion);

    CommonArgs profile_args, sweep_args, load_args, validate_args;

    auto* profile = app.add_subcommand(
        "antenna-profile", "per-antenna powers of all precoders for one channel realization");
    add_common(profile, profile_args);

    auto* sweep = app.add_subcommand(
        "subcarrier-sweep", "PA consumption ratio (statistics-based over optimal) versus band size");
    add_common(sweep, sweep_args);
    std::vector<arma::uword> q_list;
    sweep->add_option("--q-list", q_list, "subcarrier counts to sweep");

    auto* load = app.add_subcommand("load-sweep",
                                    "network power gain versus user count and AP count");
    add_common(load, load_args);
    std::vector<arma::uword> k_list, l_list;
    load->add_option("--k-list", k_list, "user counts to sweep");
    load->add_option("--l-list", l_list, "AP counts to sweep");

    auto* validate = app.add_subcommand("validate", "run the library invariant battery");
    validate->add_option("--config", validate_args.config_path, "JSON system configuration file");
    validate->add_option("--seed", validate_args.seed, "seed of the battery")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (profile->parsed()) {
            auto spec = build_spec(cfmimo::ExperimentSpec::antenna_profile_default(), profile_args,
                                   "antenna-profile.csv");
            return finish(spec, cfmimo::run_experiment(spec));
        }
        if (sweep->parsed()) {
            auto spec = build_spec(cfmimo::ExperimentSpec::subcarrier_sweep_default(), sweep_args,
                                   "subcarrier-sweep.csv");
            if (!q_list.empty())
                spec.q_values = q_list;
            if (sweep_args.quick)
                spec.apply_quick_profile();
            return finish(spec, cfmimo::run_experiment(spec));
        }
        if (load->parsed()) {
            auto spec = build_spec(cfmimo::ExperimentSpec::load_sweep_default(), load_args,
                                   "load-sweep.csv");
            if (!k_list.empty())
                spec.k_values = k_list;
            if (!l_list.empty())
                spec.l_values = l_list;
            return finish(spec, cfmimo::run_experiment(spec));
        }
        if (validate->parsed()) {
            cfmimo::SystemConfig cfg;
            if (!validate_args.config_path.empty())
                cfg = cfmimo::load_config(validate_args.config_path);
            else
                cfg.num_subcarriers = 32; // keep the default battery quick
            const bool ok = cfmimo::run_validation(cfg, validate_args.seed, std::cout);
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
