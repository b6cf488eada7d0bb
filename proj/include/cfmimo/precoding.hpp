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

#ifndef CFMIMO_PRECODING_HPP
#define CFMIMO_PRECODING_HPP

#include <armadillo>
#include <utility>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo {

enum class PrecoderKind { conventional, consumed_power_optimal, rmt_induced };

// Per-subcarrier precoding matrices, N x K each. Every kind satisfies the
// per-subcarrier zero-forcing constraint H_q W_q = diag(sqrt(gamma/Q)) sigma_nu.
struct PrecoderSet {
    PrecoderKind kind = PrecoderKind::conventional;
    std::vector<arma::cx_mat> w;

    arma::uword num_subcarriers() const { return w.size(); }
    arma::uword num_antennas() const { return w.empty() ? 0 : w[0].n_rows; }
    arma::uword num_users() const { return w.empty() ? 0 : w[0].n_cols; }
};

// Per-antenna transmit powers, Watts, totalled over the subcarrier band.
// active_mask(n) is 1 iff p(n) lies above the deactivation floor.
struct AntennaPowerVector {
    arma::vec p;
    arma::uvec active_mask;

    arma::uword active_count() const { return arma::accu(active_mask); }
};

struct FixedPointReport {
    arma::uword iterations = 0;
    double final_residual = arma::datum::inf; // relative sup-norm change
    bool converged = false;
    std::vector<double> objective_trace; // sum_n sqrt(p_n) per iteration
};

struct FixedPointOptions {
    double tolerance = 1e-8;            // relative sup-norm change
    arma::uword max_iterations = 20000;
    arma::uword polish_max_iterations = 4000; // re-convergence budget after masking
    double damping = 1.0;               // Picard step weight; halved on divergence
    double iteration_floor_rel = 1e-14; // keeps the K x K solves well-posed
    double deactivation_rel = 1e-9;     // entries below this (rel. to max) report as 0
};

// Minimum-transmit-power zero forcer: W_q = H^H (H H^H)^{-1} diag(sqrt(gamma/Q)) sigma.
PrecoderSet zf_precoder(const ChannelRealization& ch, const TargetProfile& targets,
                        double noise_power);

// Power-weighted zero forcer
//   W_q = D_p^{1/2} H^H (H D_p^{1/2} H^H)^{-1} diag(sqrt(gamma/Q)) sigma,
// the minimizer of the PA consumption under the ZF constraint once p solves
// the per-antenna self-consistency system. Rows with p_n = 0 are exactly zero.
PrecoderSet optimal_precoder(const ChannelRealization& ch, const TargetProfile& targets,
                             double noise_power, const AntennaPowerVector& p);

// Solves the self-consistency system
//   p_n = sum_q [ D_p^{1/2} Ht^H (Ht D_p^{1/2} Ht^H)^{-2} Ht D_p^{1/2} ]_nn
// by Picard iteration started from the conventional ZF power profile. The
// squared inverse is applied through Hermitian linear solves, never formed.
// Non-convergence is reported through the FixedPointReport, not thrown.
std::pair<AntennaPowerVector, FixedPointReport>
solve_antenna_powers(const NormalizedChannel& nch, const FixedPointOptions& opts = {});

// p_n = sum_q [W_q W_q^H]_nn; the mask floors at deactivation_rel * max(p).
AntennaPowerVector per_antenna_powers(const PrecoderSet& ws, double deactivation_rel = 1e-9);

// max over q of ||H_q W_q - diag(sqrt(gamma/Q)) sigma||_F relative to the
// target's norm; the feasibility invariant asserts this stays below 1e-9.
double zf_constraint_error(const ChannelRealization& ch, const PrecoderSet& ws,
                           const TargetProfile& targets, double noise_power);

// Relative sup-norm gap between p and the per-antenna powers of the
// power-weighted precoder built from p; the fixed-point consistency check.
double self_consistency_error(const ChannelRealization& ch, const TargetProfile& targets,
                              double noise_power, const AntennaPowerVector& p);

} // namespace cfmimo

#endif
