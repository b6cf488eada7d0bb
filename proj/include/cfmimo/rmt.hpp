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

#ifndef CFMIMO_RMT_HPP
#define CFMIMO_RMT_HPP

#include <armadillo>
#include <utility>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/precoding.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo {

// Second-order statistics feeding the deterministic equivalents. Everything
// here is derived from large-scale fading, correlation eigenvalues and the
// target profile; no instantaneous channel coefficients enter.
struct RmtInput {
    std::vector<arma::vec> d_norm;            // per AP: beta(:,l) / (sigma^2 gamma/Q)
    std::vector<arma::vec> xi;                // per AP: correlation eigenvalues
    arma::vec c;                              // per AP: K / M_l
    std::vector<arma::uword> antennas_per_ap; // M_l
    arma::uword num_users = 0;                // K
    arma::uword q_count = 1;                  // Q

    arma::uword num_aps() const { return antennas_per_ap.size(); }
    arma::uword total_antennas() const;
    void validate() const;
};

RmtInput make_rmt_input(const LargeScale& lsf, const CorrelationSet& corr,
                        const TargetProfile& targets, double noise_power);

// Auxiliaries of the deterministic equivalent: the coupled scalars b_l, their
// derivatives b_dot_l from the L x L linear system (I - A) b_dot = v, the
// matrix A and the K-vector diagonal of B.
struct RmtAuxiliaries {
    arma::vec b;
    arma::vec b_dot;
    arma::mat a_matrix;
    arma::vec b_diag;
};

// Per-AP per-antenna powers (uniform inside an AP, Watts, totalled over the
// Q-subcarrier band) together with the surviving AP set.
struct ApPowerVector {
    arma::vec p_ap;
    std::vector<arma::uword> active_set;
};

struct RmtOptions {
    double pbar_tolerance = 1e-8;
    arma::uword pbar_max_iterations = 10000;
    double b_tolerance = 1e-12;
    arma::uword b_max_iterations = 10000;
    double damping = 1.0;
    double floor_rel = 1e-14;
    double deactivation_rel = 1e-9;
    double activation_threshold_rel = 1e-6; // the AP on/off epsilon rule
};

// Picard solution of the coupled system
//   b_l = (1/K) sum_k sqrt(p_l) d_l[k] / B[k],
//   B[k] = sum_l' w_l' sqrt(p_l') d_l'[k],
//   w_l  = (1/M_l) sum_m xi_lm / (1 + c_l xi_lm b_l),
// started from all ones. APs with p_l = 0 get b_l = 0.
arma::vec solve_b(const RmtInput& input, const arma::vec& p_ap, const RmtOptions& opts = {});

// Closed-form b_dot given b, assembling B, D'_l and A and solving
// (I - A) b_dot = [ (1/K) sqrt(p_l) tr(D_l B^{-2}) ]_l. Throws when I - A is
// singular (invalid regime).
RmtAuxiliaries solve_b_dot(const RmtInput& input, const arma::vec& p_ap, const arma::vec& b);

// The per-AP power map evaluated in the correlation eigenbasis,
//   pbar_l = Q sqrt(p_l) c_l b_dot_l (1/M_l^2) sum_m xi_lm / (1 + c_l b_l xi_lm)^2.
// The map is invariant to uniform scaling of p; the factor Q turns the
// per-subcarrier equivalent into a band total, consistently with the power
// solvers which sum over the band.
arma::vec pbar_map(const RmtInput& input, const arma::vec& p_ap, const RmtOptions& opts = {});

// Outer fixed point p = pbar_map(p) from a uniform 1 W start. Entries below
// the deactivation floor are reported as exactly 0; the active set applies
// the epsilon rule relative to the largest AP power.
std::pair<ApPowerVector, FixedPointReport> solve_pbar(const RmtInput& input,
                                                      const RmtOptions& opts = {});

// {l : p_ap[l] > rel_threshold * max(p_ap)}. Throws when empty or when the
// surviving antennas cannot serve the user count.
std::vector<arma::uword> select_active_aps(const arma::vec& p_ap, double rel_threshold,
                                           const std::vector<arma::uword>& antennas_per_ap,
                                           arma::uword num_users);

// Length-N expansion: every antenna of an active AP carries that AP's
// per-antenna power, inactive APs carry exactly zero.
arma::vec expand_ap_powers(const ApPowerVector& powers,
                           const std::vector<arma::uword>& antennas_per_ap);

// Power-weighted zero forcer driven by the statistics-only powers: rows of
// inactive APs are exactly zero, active APs transmit with uniform weights.
PrecoderSet rmt_induced_precoder(const ChannelRealization& ch, const TargetProfile& targets,
                                 double noise_power, const ApPowerVector& powers);

} // namespace cfmimo

#endif
