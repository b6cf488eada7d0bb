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

#ifndef CFMIMO_CONSUMPTION_HPP
#define CFMIMO_CONSUMPTION_HPP

#include <armadillo>
#include <optional>
#include <utility>
#include <vector>

#include "cfmimo/precoding.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo {

struct PaParams {
    double max_power = 3.0;      // Watts
    double max_efficiency = 0.34;
};

struct NetworkCosts {
    double fixed_per_ap = 15.0;       // Watts per active AP
    double circuit_per_antenna = 0.7; // Watts per active antenna
};

// Antenna-to-AP assignment used to attribute circuit and fixed costs.
struct ApPartition {
    std::vector<arma::uword> antennas_per_ap;
    std::vector<arma::uword> ap_offsets;

    static ApPartition from_counts(const std::vector<arma::uword>& counts);
    arma::uword num_aps() const { return antennas_per_ap.size(); }
    arma::uword total_antennas() const;
};

struct ConsumptionReport {
    double p_tx = 0.0;  // total transmit power
    double p_pas = 0.0; // power drawn by the amplifiers
    double p_net = 0.0; // network level: PAs + per-AP fixed + per-antenna circuit
    arma::uword active_ap_count = 0;
    arma::uvec active_antenna_counts; // per AP
    arma::vec rates;                  // per user, bits per channel use per subcarrier
    std::optional<double> gain_net;   // baseline / candidate, when a baseline exists
    std::optional<double> gain_pas;
};

double total_transmit_power(const AntennaPowerVector& p);

// Amplifier model: (sqrt(p_max) / eta_max) * sum_n sqrt(p_n). Concave in the
// per-antenna powers, which is why concentrating power saves consumption.
double pa_consumed_power(const AntennaPowerVector& p, const PaParams& pa);

// An AP is active iff at least one of its antennas is active; it is charged
// the fixed cost plus the circuit cost of its active antennas only.
ConsumptionReport network_power(const AntennaPowerVector& p, const ApPartition& partition,
                                const PaParams& pa, const NetworkCosts& costs,
                                const TargetProfile* targets = nullptr);

struct RateSet {
    arma::vec per_subcarrier; // log2(1 + gamma_k / Q)
    arma::vec band_total;     // Q * log2(1 + gamma_k / Q)
};

RateSet achievable_rates(const TargetProfile& targets);

// SNR[k][q] = |[H W]_kk|^2 / (sigma^2 + sum_{j != k} |[H W]_kj|^2); equals
// gamma_k / Q for every subcarrier under an exact zero forcer.
arma::mat effective_snr(const ChannelRealization& ch, const PrecoderSet& ws, double noise_power);

// (gain_net, gain_pas) = baseline figures divided by candidate figures.
std::pair<double, double> gain(const ConsumptionReport& candidate,
                               const ConsumptionReport& baseline);

ConsumptionReport with_gain(ConsumptionReport candidate, const ConsumptionReport& baseline);

} // namespace cfmimo

#endif
