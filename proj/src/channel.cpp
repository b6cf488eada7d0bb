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

#include "cfmimo/channel.hpp"

#include <cstring>
#include <fstream>

namespace cfmimo {

namespace {

std::vector<arma::uword> offsets_of(const std::vector<arma::uword>& counts) {
    std::vector<arma::uword> off(counts.size(), 0);
    for (std::size_t l = 1; l < counts.size(); ++l)
        off[l] = off[l - 1] + counts[l - 1];
    return off;
}

bool well_conditioned(const arma::cx_mat& h) {
    const arma::vec sv = arma::svd(h);
    return sv.min() > 1e-10 * sv.max();
}

} // namespace

arma::cx_mat ChannelRealization::ap_block(arma::uword q, arma::uword l) const {
    return h.at(q).cols(ap_offsets.at(l), ap_offsets.at(l) + antennas_per_ap.at(l) - 1);
}

ChannelRealization channel_from_blocks(const std::vector<std::vector<arma::cx_mat>>& blocks) {
    if (blocks.empty() || blocks[0].empty())
        throw std::invalid_argument("channel_from_blocks: empty block list");
    ChannelRealization ch;
    for (const auto& blk : blocks[0])
        ch.antennas_per_ap.push_back(blk.n_cols);
    ch.ap_offsets = offsets_of(ch.antennas_per_ap);
    const arma::uword num_users = blocks[0][0].n_rows;
    arma::uword n = 0;
    for (arma::uword m : ch.antennas_per_ap)
        n += m;
    ch.h.reserve(blocks.size());
    for (const auto& per_ap : blocks) {
        if (per_ap.size() != ch.antennas_per_ap.size())
            throw std::invalid_argument("channel_from_blocks: AP count varies across subcarriers");
        arma::cx_mat agg(num_users, n);
        for (std::size_t l = 0; l < per_ap.size(); ++l) {
            if (per_ap[l].n_rows != num_users || per_ap[l].n_cols != ch.antennas_per_ap[l])
                throw std::invalid_argument("channel_from_blocks: inconsistent block shape");
            agg.cols(ch.ap_offsets[l], ch.ap_offsets[l] + ch.antennas_per_ap[l] - 1) = per_ap[l];
        }
        ch.h.push_back(std::move(agg));
    }
    return ch;
}

ChannelRealization draw_channel(const LargeScale& lsf, const CorrelationSet& corr,
                                arma::uword q_count, RandomStream& rng) {
    const arma::uword num_users = lsf.beta.n_rows;
    const arma::uword num_aps = lsf.beta.n_cols;
    if (corr.c_ap.size() != num_aps)
        throw std::invalid_argument("draw_channel: correlation set does not match AP count");
    if (q_count < 1)
        throw std::invalid_argument("draw_channel: q_count must be >= 1");
    if (lsf.beta.min() <= 0.0)
        throw std::invalid_argument("draw_channel: large-scale coefficients must be positive");

    ChannelRealization ch;
    for (const auto& c : corr.c_ap)
        ch.antennas_per_ap.push_back(c.n_rows);
    ch.ap_offsets = offsets_of(ch.antennas_per_ap);
    arma::uword n = 0;
    for (arma::uword m : ch.antennas_per_ap)
        n += m;

    ch.h.reserve(q_count);
    for (arma::uword q = 0; q < q_count; ++q) {
        arma::cx_mat agg(num_users, n);
        constexpr arma::uword kMaxRedraws = 100;
        arma::uword attempt = 0;
        for (;; ++attempt) {
            if (attempt >= kMaxRedraws)
                throw std::runtime_error("draw_channel: subcarrier persistently rank-deficient");
            for (arma::uword l = 0; l < num_aps; ++l) {
                const arma::uword m = ch.antennas_per_ap[l];
                arma::cx_mat g(num_users, m);
                for (arma::uword j = 0; j < m; ++j)
                    for (arma::uword i = 0; i < num_users; ++i)
                        g(i, j) = rng.cnormal();
                g.each_col() %= arma::cx_vec(arma::sqrt(lsf.beta.col(l)),
                                             arma::vec(num_users, arma::fill::zeros));
                agg.cols(ch.ap_offsets[l], ch.ap_offsets[l] + m - 1) = g * corr.sqrt_c_ap[l];
            }
            if (well_conditioned(agg))
                break;
            ++ch.rank_redraws;
        }
        ch.h.push_back(std::move(agg));
    }
    return ch;
}

NormalizedChannel normalize(const ChannelRealization& ch, const LargeScale& lsf,
                            const TargetProfile& targets, double noise_power) {
    if (!(noise_power > 0.0))
        throw std::invalid_argument("normalize: noise power must be positive");
    if (targets.gamma.n_elem != ch.num_users())
        throw std::invalid_argument("normalize: target count does not match users");
    if (targets.gamma.min() <= 0.0)
        throw std::invalid_argument("normalize: targets must be positive");
    if (lsf.beta.n_rows != ch.num_users() || lsf.beta.n_cols != ch.num_aps())
        throw std::invalid_argument("normalize: large-scale dimensions do not match channel");

    NormalizedChannel nch;
    nch.antennas_per_ap = ch.antennas_per_ap;
    nch.ap_offsets = ch.ap_offsets;

    const double sigma = std::sqrt(noise_power);
    const arma::vec row_scale = 1.0 / (sigma * arma::sqrt(targets.d_tilde_gamma));
    nch.h_tilde.reserve(ch.h.size());
    for (const auto& hq : ch.h) {
        arma::cx_mat ht = hq;
        ht.each_col() %= arma::cx_vec(row_scale, arma::vec(row_scale.n_elem, arma::fill::zeros));
        nch.h_tilde.push_back(std::move(ht));
    }
    nch.d_norm.reserve(ch.num_aps());
    for (arma::uword l = 0; l < ch.num_aps(); ++l)
        nch.d_norm.push_back(lsf.beta.col(l) / (noise_power * targets.d_tilde_gamma));
    return nch;
}

namespace {

template <typename T>
void write_raw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in)
        throw std::runtime_error("load_channel: truncated stream");
    return value;
}

constexpr char kMagic[4] = {'C', 'F', 'C', 'H'};

} // namespace

void dump_channel(const ChannelRealization& ch, std::ostream& out) {
    out.write(kMagic, 4);
    write_raw<std::uint32_t>(out, 1);
    write_raw<std::uint64_t>(out, ch.num_aps());
    write_raw<std::uint64_t>(out, ch.num_users());
    write_raw<std::uint64_t>(out, ch.num_subcarriers());
    for (arma::uword m : ch.antennas_per_ap)
        write_raw<std::uint64_t>(out, m);
    for (arma::uword l = 0; l < ch.num_aps(); ++l) {
        for (arma::uword q = 0; q < ch.num_subcarriers(); ++q) {
            const arma::cx_mat blk = ch.ap_block(q, l);
            for (arma::uword i = 0; i < blk.n_rows; ++i) {
                for (arma::uword j = 0; j < blk.n_cols; ++j) {
                    write_raw<float>(out, static_cast<float>(blk(i, j).real()));
                    write_raw<float>(out, static_cast<float>(blk(i, j).imag()));
                }
            }
        }
    }
    if (!out)
        throw std::runtime_error("dump_channel: write failed");
}

void dump_channel(const ChannelRealization& ch, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("dump_channel: cannot open '" + path + "'");
    dump_channel(ch, out);
}

ChannelRealization load_channel(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_channel: bad magic");
    if (read_raw<std::uint32_t>(in) != 1)
        throw std::runtime_error("load_channel: unsupported version");
    const auto num_aps = read_raw<std::uint64_t>(in);
    const auto num_users = read_raw<std::uint64_t>(in);
    const auto q_count = read_raw<std::uint64_t>(in);
    std::vector<arma::uword> counts(num_aps);
    for (auto& m : counts)
        m = read_raw<std::uint64_t>(in);

    std::vector<std::vector<arma::cx_mat>> blocks(q_count, std::vector<arma::cx_mat>(num_aps));
    for (std::uint64_t l = 0; l < num_aps; ++l) {
        for (std::uint64_t q = 0; q < q_count; ++q) {
            arma::cx_mat blk(num_users, counts[l]);
            for (arma::uword i = 0; i < num_users; ++i) {
                for (arma::uword j = 0; j < counts[l]; ++j) {
                    const float re = read_raw<float>(in);
                    const float im = read_raw<float>(in);
                    blk(i, j) = std::complex<double>(re, im);
                }
            }
            blocks[q][l] = std::move(blk);
        }
    }
    return channel_from_blocks(blocks);
}

ChannelRealization load_channel(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_channel: cannot open '" + path + "'");
    return load_channel(in);
}

} // namespace cfmimo
