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

#ifndef CFMIMO_HARNESS_HPP
#define CFMIMO_HARNESS_HPP

#include <armadillo>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/consumption.hpp"
#include "cfmimo/precoding.hpp"
#include "cfmimo/rmt.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo {

inline constexpr const char* kVersion = "0.1.0";

// Seeded Monte-Carlo experiment description. Results are byte-identical for
// a given (spec, seed) regardless of the worker count: every realization owns
// a stream derived from (seed, flat job index) and the reduction is ordered.
struct ExperimentSpec {
    enum class Kind { antenna_profile, subcarrier_sweep, load_sweep };

    Kind kind = Kind::antenna_profile;
    SystemConfig base;
    std::vector<arma::uword> q_values; // subcarrier sweep
    std::vector<arma::uword> k_values; // load sweep
    std::vector<arma::uword> l_values; // load sweep
    arma::uword realizations = 100;
    std::uint64_t seed = 1;
    unsigned workers = 0; // 0 = hardware concurrency
    std::string output_path;

    static ExperimentSpec antenna_profile_default();
    static ExperimentSpec subcarrier_sweep_default();
    static ExperimentSpec load_sweep_default();
    // Desk-scale profile: caps the band at 64 subcarriers and runs 20
    // realizations so a full sweep stays under a few minutes.
    void apply_quick_profile();
    void validate() const;
    const char* kind_name() const;
};

struct RealizationRecord {
    arma::uword realization = 0;
    std::string sweep_key;
    std::string scenario_digest;
    std::map<std::string, ConsumptionReport> reports;    // conventional / optimal / rmt
    std::map<std::string, FixedPointReport> diagnostics; // optimal / rmt
    std::map<std::string, double> values;                // derived per-record metrics
    bool ok = true;
    bool excluded_unconverged = false; // unconverged solver, not a violation
    bool violation = false;            // invariant broken or solver error
    std::string error;
};

struct AggregateRow {
    std::vector<std::pair<std::string, std::string>> keys; // sweep vars, method, metric
    double mean = 0.0;
    double std_error = 0.0;
    arma::uword n = 0;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string to_string() const;
};

struct MonteCarloResult {
    CsvTable table;
    std::vector<RealizationRecord> records;
    std::vector<AggregateRow> aggregates;
    arma::uword skipped_points = 0;     // infeasible sweep points
    arma::uword excluded_records = 0;   // solver did not converge, excluded from means
    arma::uword violation_records = 0;  // invariant violations and solver errors

    const AggregateRow* find(std::initializer_list<std::pair<std::string, std::string>> keys) const;
};

MonteCarloResult run_antenna_profile(const ExperimentSpec& spec);
MonteCarloResult run_subcarrier_sweep(const ExperimentSpec& spec);
MonteCarloResult run_load_sweep(const ExperimentSpec& spec);

// Dispatches on kind and, when output_path is set, writes the CSV and the
// run-metadata sidecar (output_path + ".meta.txt").
MonteCarloResult run_experiment(const ExperimentSpec& spec);

void write_output(const ExperimentSpec& spec, const MonteCarloResult& result);

// Library-level invariant battery used by the `validate` subcommand; prints
// one line per check and returns false if anything failed.
bool run_validation(const SystemConfig& cfg, std::uint64_t seed, std::ostream& log);

// Shared deterministic plumbing.
std::string format_double(double v);
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t basis = 14695981039346656037ULL);
std::string scenario_digest(const Geometry& geom, const LargeScale& lsf,
                            const TargetProfile& targets);
void parallel_for(arma::uword count, unsigned workers, const std::function<void(arma::uword)>& fn);

} // namespace cfmimo

#endif
