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

#include "cfmimo/consumption.hpp"

namespace cfmimo {

ApPartition ApPartition::from_counts(const std::vector<arma::uword>& counts) {
    ApPartition part;
    part.antennas_per_ap = counts;
    part.ap_offsets.assign(counts.size(), 0);
    for (std::size_t l = 1; l < counts.size(); ++l)
        part.ap_offsets[l] = part.ap_offsets[l - 1] + counts[l - 1];
    return part;
}

arma::uword ApPartition::total_antennas() const {
    arma::uword n = 0;
    for (arma::uword m : antennas_per_ap)
        n += m;
    return n;
}

double total_transmit_power(const AntennaPowerVector& p) {
    return arma::accu(p.p);
}

double pa_consumed_power(const AntennaPowerVector& p, const PaParams& pa) {
    if (!(pa.max_power > 0.0) || !(pa.max_efficiency > 0.0) || pa.max_efficiency > 1.0)
        throw std::invalid_argument("pa_consumed_power: invalid amplifier parameters");
    double sum = 0.0;
    for (arma::uword n = 0; n < p.p.n_elem; ++n)
        if (p.active_mask(n))
            sum += std::sqrt(p.p(n));
    return std::sqrt(pa.max_power) / pa.max_efficiency * sum;
}

ConsumptionReport network_power(const AntennaPowerVector& p, const ApPartition& partition,
                                const PaParams& pa, const NetworkCosts& costs,
                                const TargetProfile* targets) {
    if (partition.total_antennas() != p.p.n_elem)
        throw std::invalid_argument("network_power: partition does not cover the power vector");
    ConsumptionReport report;
    report.p_tx = total_transmit_power(p);
    report.p_pas = pa_consumed_power(p, pa);
    report.active_antenna_counts.set_size(partition.num_aps());
    double overhead = 0.0;
    for (arma::uword l = 0; l < partition.num_aps(); ++l) {
        arma::uword active = 0;
        for (arma::uword i = 0; i < partition.antennas_per_ap[l]; ++i)
            active += p.active_mask(partition.ap_offsets[l] + i) ? 1 : 0;
        report.active_antenna_counts(l) = active;
        if (active > 0) {
            ++report.active_ap_count;
            overhead += costs.fixed_per_ap + costs.circuit_per_antenna * static_cast<double>(active);
        }
    }
    report.p_net = report.p_pas + overhead;
    if (targets != nullptr)
        report.rates = achievable_rates(*targets).per_subcarrier;
    return report;
}

RateSet achievable_rates(const TargetProfile& targets) {
    RateSet rates;
    rates.per_subcarrier = arma::log2(1.0 + targets.d_tilde_gamma);
    rates.band_total = static_cast<double>(targets.q_count) * rates.per_subcarrier;
    return rates;
}

arma::mat effective_snr(const ChannelRealization& ch, const PrecoderSet& ws, double noise_power) {
    if (!(noise_power > 0.0))
        throw std::invalid_argument("effective_snr: noise power must be positive");
    const arma::uword num_users = ch.num_users();
    arma::mat snr(num_users, ch.num_subcarriers());
    for (arma::uword q = 0; q < ch.num_subcarriers(); ++q) {
        const arma::cx_mat effective = ch.h[q] * ws.w[q]; // K x K
        for (arma::uword k = 0; k < num_users; ++k) {
            const double signal = std::norm(effective(k, k));
            double interference = 0.0;
            for (arma::uword j = 0; j < num_users; ++j)
                if (j != k)
                    interference += std::norm(effective(k, j));
            snr(k, q) = signal / (noise_power + interference);
        }
    }
    return snr;
}

std::pair<double, double> gain(const ConsumptionReport& candidate,
                               const ConsumptionReport& baseline) {
    if (!(candidate.p_net > 0.0) || !(candidate.p_pas > 0.0))
        throw std::invalid_argument("gain: candidate consumption must be positive");
    return {baseline.p_net / candidate.p_net, baseline.p_pas / candidate.p_pas};
}

ConsumptionReport with_gain(ConsumptionReport candidate, const ConsumptionReport& baseline) {
    const auto [g_net, g_pas] = gain(candidate, baseline);
    candidate.gain_net = g_net;
    candidate.gain_pas = g_pas;
    return candidate;
}

} // namespace cfmimo
