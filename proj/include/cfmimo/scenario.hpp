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

#ifndef CFMIMO_SCENARIO_HPP
#define CFMIMO_SCENARIO_HPP

#include <armadillo>
#include <cstdint>
#include <string>
#include <vector>

#include "cfmimo/rng.hpp"

namespace cfmimo {

// Static system description: everything that changes only with the
// second-order statistics of the network, never with a channel realization.
//
// Powers are linear Watts; quantities with a _db suffix are decibel values.
struct SystemConfig {
    arma::uword num_aps = 8;                    // L
    std::vector<arma::uword> antennas_per_ap;   // M_l, length L; empty = 8 each
    arma::uword num_users = 8;                  // K
    arma::uword num_subcarriers = 256;          // Q
    double noise_power = 2.511886431509582e-13; // sigma_nu^2, i.e. -96 dBm
    double target_snr_min_db = 1.0;
    double target_snr_max_db = 20.0;
    double pa_max_power = 3.0;                  // p_max
    double pa_max_efficiency = 0.34;            // eta_max
    double p_fix = 15.0;                        // per active AP
    double p_circuit = 0.7;                     // per active antenna
    double corr_coeff = 0.7;                    // rho of the exponential model
    double area_side = 1000.0;                  // deployment square, meters
    arma::uword grid_points = 16;               // candidate AP sites
    double min_user_ap_distance = 10.0;         // meters
    double shadow_std_db = 4.0;
    double activation_threshold_rel = 1e-6;     // AP on/off rule, rel. to max
    std::uint64_t rng_seed = 1;

    // M_l with the "empty means 8 each" default applied.
    std::vector<arma::uword> antenna_counts() const;
    arma::uword total_antennas() const; // N
    // Throws std::invalid_argument on the first violated constraint.
    void validate() const;
};

// JSON (de)serialization. Unknown keys are rejected.
SystemConfig load_config(const std::string& path);
SystemConfig config_from_json(const std::string& json_text);
std::string config_to_json(const SystemConfig& cfg); // compact, stable key order
void save_config(const SystemConfig& cfg, const std::string& path);

struct Geometry {
    arma::mat ap_positions;   // L x 2, meters
    arma::mat user_positions; // K x 2, meters
};

struct LargeScale {
    arma::mat beta;      // K x L, linear power gain
    arma::mat shadow_db; // K x L, the shadow-fading draws
};

struct CorrelationSet {
    std::vector<arma::cx_mat> c_ap;        // per AP, M_l x M_l Hermitian
    std::vector<arma::vec> eigenvalues;    // per AP, ascending
    std::vector<arma::cx_mat> sqrt_c_ap;   // Hermitian square roots, cached
};

struct TargetProfile {
    arma::vec gamma;         // per user, linear target SNR
    arma::vec d_tilde_gamma; // gamma / Q
    arma::uword q_count = 1; // Q used to build d_tilde_gamma
};

// AP sites are the cell centers of the regular sqrt(grid)^2 partition of the
// deployment square; L distinct sites are picked uniformly at random. Users
// are uniform over the square, redrawn until the minimum AP distance holds
// (at most 10^4 attempts per user).
Geometry generate_geometry(const SystemConfig& cfg, RandomStream& rng);

// Path gain in dB: -30.5 - 37.6 log10(d) + F, with F ~ N(0, shadow_std_db^2)
// drawn independently per (user, AP) pair in user-major order.
LargeScale compute_lsf(const Geometry& geom, const SystemConfig& cfg, RandomStream& rng);

// Exponential antenna correlation, entry (i,j) = rho^|i-j|.
arma::cx_mat exponential_correlation(arma::uword m, double rho);

// Per-AP correlation matrices with eigenvalues and Hermitian square roots.
// Eigenvalues below 1e-12 are clamped to zero; a negative eigenvalue beyond
// round-off rejects the matrix as non-PSD.
CorrelationSet build_correlation_set(const SystemConfig& cfg);
CorrelationSet correlation_set_from_matrices(const std::vector<arma::cx_mat>& c_ap);

// Per-user target SNRs, uniform in dB over the configured range.
TargetProfile draw_targets(const SystemConfig& cfg, RandomStream& rng);
TargetProfile make_targets(const arma::vec& gamma, arma::uword q_count);

} // namespace cfmimo

#endif
