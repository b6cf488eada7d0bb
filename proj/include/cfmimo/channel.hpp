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

#ifndef CFMIMO_CHANNEL_HPP
#define CFMIMO_CHANNEL_HPP

#include <armadillo>
#include <iosfwd>
#include <string>
#include <vector>

#include "cfmimo/rng.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo {

// Per-subcarrier aggregated channel. The K x N matrix at subcarrier q is the
// horizontal concatenation of the per-AP K x M_l blocks in AP order; blocks
// are views into the aggregated storage, so the two representations cannot
// drift apart.
struct ChannelRealization {
    std::vector<arma::uword> antennas_per_ap; // M_l
    std::vector<arma::uword> ap_offsets;      // column offset of each AP block
    std::vector<arma::cx_mat> h;              // per q: K x N
    arma::uword rank_redraws = 0;             // subcarriers redrawn as rank-deficient

    arma::uword num_aps() const { return antennas_per_ap.size(); }
    arma::uword num_users() const { return h.empty() ? 0 : h[0].n_rows; }
    arma::uword num_antennas() const { return h.empty() ? 0 : h[0].n_cols; }
    arma::uword num_subcarriers() const { return h.size(); }
    arma::cx_mat ap_block(arma::uword q, arma::uword l) const;
};

// Assemble a realization from per-AP blocks: blocks[q][l] is K x M_l.
ChannelRealization channel_from_blocks(const std::vector<std::vector<arma::cx_mat>>& blocks);

// Normalized form used by the power solvers: rows of the channel scaled by
// 1 / (sigma_nu * sqrt(gamma_k / Q)), plus the per-AP diagonal weights
// d_norm[l][k] = beta(k,l) / (sigma_nu^2 * gamma_k / Q).
struct NormalizedChannel {
    std::vector<arma::uword> antennas_per_ap;
    std::vector<arma::uword> ap_offsets;
    std::vector<arma::cx_mat> h_tilde; // per q: K x N
    std::vector<arma::vec> d_norm;     // per AP: length K

    arma::uword num_aps() const { return antennas_per_ap.size(); }
    arma::uword num_users() const { return h_tilde.empty() ? 0 : h_tilde[0].n_rows; }
    arma::uword num_antennas() const { return h_tilde.empty() ? 0 : h_tilde[0].n_cols; }
    arma::uword num_subcarriers() const { return h_tilde.size(); }
};

// Draw q_count independent subcarriers of the per-AP Kronecker model
// H_{l,q} = D_beta,l^{1/2} G_{l,q} C_l^{1/2}, G i.i.d. CN(0,1). A subcarrier
// whose smallest singular value falls below 1e-10 of its largest is redrawn
// (counted in rank_redraws, at most 100 attempts each).
ChannelRealization draw_channel(const LargeScale& lsf, const CorrelationSet& corr,
                                arma::uword q_count, RandomStream& rng);

NormalizedChannel normalize(const ChannelRealization& ch, const LargeScale& lsf,
                            const TargetProfile& targets, double noise_power);

// Binary snapshot, little-endian:
//   magic "CFCH", u32 version = 1,
//   u64 L, u64 K, u64 Q, then L x u64 M_l,
//   then for each AP l, for each subcarrier q, the K x M_l block in row-major
//   order as float32 (re, im) pairs.
void dump_channel(const ChannelRealization& ch, std::ostream& out);
void dump_channel(const ChannelRealization& ch, const std::string& path);
ChannelRealization load_channel(std::istream& in);
ChannelRealization load_channel(const std::string& path);

} // namespace cfmimo

#endif
