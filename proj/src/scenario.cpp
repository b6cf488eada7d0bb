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

#include "cfmimo/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cfmimo {

std::vector<arma::uword> SystemConfig::antenna_counts() const {
    if (!antennas_per_ap.empty())
        return antennas_per_ap;
    return std::vector<arma::uword>(num_aps, 8);
}

arma::uword SystemConfig::total_antennas() const {
    arma::uword n = 0;
    for (arma::uword m : antenna_counts())
        n += m;
    return n;
}

void SystemConfig::validate() const {
    if (num_aps < 1)
        throw std::invalid_argument("config: num_aps must be >= 1");
    if (num_users < 1)
        throw std::invalid_argument("config: num_users must be >= 1");
    if (num_subcarriers < 1)
        throw std::invalid_argument("config: num_subcarriers must be >= 1");
    const auto m = antenna_counts();
    if (m.size() != num_aps)
        throw std::invalid_argument("config: antennas_per_ap length must equal num_aps");
    for (arma::uword ml : m)
        if (ml < 1)
            throw std::invalid_argument("config: every AP needs at least one antenna");
    if (total_antennas() <= num_users)
        throw std::invalid_argument("config: total antennas must exceed num_users");
    if (!(noise_power > 0.0))
        throw std::invalid_argument("config: noise_power must be positive");
    if (!(pa_max_power > 0.0))
        throw std::invalid_argument("config: pa_max_power must be positive");
    if (!(pa_max_efficiency > 0.0) || pa_max_efficiency > 1.0)
        throw std::invalid_argument("config: pa_max_efficiency must be in (0, 1]");
    if (p_fix < 0.0 || p_circuit < 0.0)
        throw std::invalid_argument("config: consumption constants must be non-negative");
    if (corr_coeff < 0.0 || corr_coeff >= 1.0)
        throw std::invalid_argument("config: corr_coeff must be in [0, 1)");
    if (!(area_side > 0.0))
        throw std::invalid_argument("config: area_side must be positive");
    if (grid_points < 1)
        throw std::invalid_argument("config: grid_points must be >= 1");
    const auto g = static_cast<arma::uword>(std::llround(std::sqrt(static_cast<double>(grid_points))));
    if (g * g != grid_points)
        throw std::invalid_argument("config: grid_points must be a perfect square");
    if (num_aps > grid_points)
        throw std::invalid_argument("config: num_aps exceeds grid_points");
    if (!(min_user_ap_distance > 0.0))
        throw std::invalid_argument("config: min_user_ap_distance must be positive");
    if (shadow_std_db < 0.0)
        throw std::invalid_argument("config: shadow_std_db must be non-negative");
    if (!(target_snr_min_db <= target_snr_max_db))
        throw std::invalid_argument("config: target SNR range is empty");
    if (!(activation_threshold_rel > 0.0) || activation_threshold_rel >= 1.0)
        throw std::invalid_argument("config: activation_threshold_rel must be in (0, 1)");
}

namespace {

using nlohmann::json;

constexpr const char* kKeys[] = {
    "num_aps", "antennas_per_ap", "num_users", "num_subcarriers", "noise_power",
    "target_snr_min_db", "target_snr_max_db", "pa_max_power", "pa_max_efficiency",
    "p_fix", "p_circuit", "corr_coeff", "area_side", "grid_points",
    "min_user_ap_distance", "shadow_std_db", "activation_threshold_rel", "rng_seed"};

} // namespace

SystemConfig config_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    if (!j.is_object())
        throw std::invalid_argument("config: top level must be a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : kKeys)
            known = known || (item.key() == k);
        if (!known)
            throw std::invalid_argument("config: unknown key '" + item.key() + "'");
    }
    SystemConfig cfg;
    if (j.contains("num_aps")) cfg.num_aps = j["num_aps"].get<arma::uword>();
    if (j.contains("antennas_per_ap")) {
        const auto& v = j["antennas_per_ap"];
        if (v.is_number()) {
            cfg.antennas_per_ap.assign(cfg.num_aps, v.get<arma::uword>());
        } else {
            cfg.antennas_per_ap = v.get<std::vector<arma::uword>>();
        }
    }
    if (j.contains("num_users")) cfg.num_users = j["num_users"].get<arma::uword>();
    if (j.contains("num_subcarriers")) cfg.num_subcarriers = j["num_subcarriers"].get<arma::uword>();
    if (j.contains("noise_power")) cfg.noise_power = j["noise_power"].get<double>();
    if (j.contains("target_snr_min_db")) cfg.target_snr_min_db = j["target_snr_min_db"].get<double>();
    if (j.contains("target_snr_max_db")) cfg.target_snr_max_db = j["target_snr_max_db"].get<double>();
    if (j.contains("pa_max_power")) cfg.pa_max_power = j["pa_max_power"].get<double>();
    if (j.contains("pa_max_efficiency")) cfg.pa_max_efficiency = j["pa_max_efficiency"].get<double>();
    if (j.contains("p_fix")) cfg.p_fix = j["p_fix"].get<double>();
    if (j.contains("p_circuit")) cfg.p_circuit = j["p_circuit"].get<double>();
    if (j.contains("corr_coeff")) cfg.corr_coeff = j["corr_coeff"].get<double>();
    if (j.contains("area_side")) cfg.area_side = j["area_side"].get<double>();
    if (j.contains("grid_points")) cfg.grid_points = j["grid_points"].get<arma::uword>();
    if (j.contains("min_user_ap_distance")) cfg.min_user_ap_distance = j["min_user_ap_distance"].get<double>();
    if (j.contains("shadow_std_db")) cfg.shadow_std_db = j["shadow_std_db"].get<double>();
    if (j.contains("activation_threshold_rel")) cfg.activation_threshold_rel = j["activation_threshold_rel"].get<double>();
    if (j.contains("rng_seed")) cfg.rng_seed = j["rng_seed"].get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::string config_to_json(const SystemConfig& cfg) {
    json j = json::object();
    j["num_aps"] = cfg.num_aps;
    j["antennas_per_ap"] = cfg.antenna_counts();
    j["num_users"] = cfg.num_users;
    j["num_subcarriers"] = cfg.num_subcarriers;
    j["noise_power"] = cfg.noise_power;
    j["target_snr_min_db"] = cfg.target_snr_min_db;
    j["target_snr_max_db"] = cfg.target_snr_max_db;
    j["pa_max_power"] = cfg.pa_max_power;
    j["pa_max_efficiency"] = cfg.pa_max_efficiency;
    j["p_fix"] = cfg.p_fix;
    j["p_circuit"] = cfg.p_circuit;
    j["corr_coeff"] = cfg.corr_coeff;
    j["area_side"] = cfg.area_side;
    j["grid_points"] = cfg.grid_points;
    j["min_user_ap_distance"] = cfg.min_user_ap_distance;
    j["shadow_std_db"] = cfg.shadow_std_db;
    j["activation_threshold_rel"] = cfg.activation_threshold_rel;
    j["rng_seed"] = cfg.rng_seed;
    return j.dump();
}

void save_config(const SystemConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("config: cannot write '" + path + "'");
    out << config_to_json(cfg) << "\n";
}

Geometry generate_geometry(const SystemConfig& cfg, RandomStream& rng) {
    cfg.validate();
    const auto g = static_cast<arma::uword>(std::llround(std::sqrt(static_cast<double>(cfg.grid_points))));
    const double spacing = cfg.area_side / static_cast<double>(g);

    // Partial Fisher-Yates over the site indices.
    std::vector<arma::uword> sites(cfg.grid_points);
    for (arma::uword i = 0; i < cfg.grid_points; ++i)
        sites[i] = i;
    Geometry geom;
    geom.ap_positions.set_size(cfg.num_aps, 2);
    for (arma::uword l = 0; l < cfg.num_aps; ++l) {
        const arma::uword j = l + rng.uniform_index(cfg.grid_points - l);
        std::swap(sites[l], sites[j]);
        const arma::uword row = sites[l] / g;
        const arma::uword col = sites[l] % g;
        geom.ap_positions(l, 0) = (static_cast<double>(col) + 0.5) * spacing;
        geom.ap_positions(l, 1) = (static_cast<double>(row) + 0.5) * spacing;
    }

    constexpr arma::uword kMaxAttempts = 10000;
    geom.user_positions.set_size(cfg.num_users, 2);
    for (arma::uword k = 0; k < cfg.num_users; ++k) {
        bool placed = false;
        for (arma::uword attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            const double x = rng.uniform(0.0, cfg.area_side);
            const double y = rng.uniform(0.0, cfg.area_side);
            placed = true;
            for (arma::uword l = 0; l < cfg.num_aps && placed; ++l) {
                const double dx = x - geom.ap_positions(l, 0);
                const double dy = y - geom.ap_positions(l, 1);
                placed = std::hypot(dx, dy) >= cfg.min_user_ap_distance;
            }
            if (placed) {
                geom.user_positions(k, 0) = x;
                geom.user_positions(k, 1) = y;
            }
        }
        if (!placed)
            throw std::runtime_error("generate_geometry: could not place user " + std::to_string(k) +
                                     " after 10^4 attempts; min_user_ap_distance too tight");
    }
    return geom;
}

LargeScale compute_lsf(const Geometry& geom, const SystemConfig& cfg, RandomStream& rng) {
    const arma::uword num_users = geom.user_positions.n_rows;
    const arma::uword num_aps = geom.ap_positions.n_rows;
    LargeScale lsf;
    lsf.beta.set_size(num_users, num_aps);
    lsf.shadow_db.set_size(num_users, num_aps);
    for (arma::uword k = 0; k < num_users; ++k) {
        for (arma::uword l = 0; l < num_aps; ++l) {
            const double dx = geom.user_positions(k, 0) - geom.ap_positions(l, 0);
            const double dy = geom.user_positions(k, 1) - geom.ap_positions(l, 1);
            const double d = std::hypot(dx, dy);
            if (!(d > 0.0))
                throw std::domain_error("compute_lsf: zero user-AP distance");
            const double f = cfg.shadow_std_db > 0.0 ? rng.normal(0.0, cfg.shadow_std_db) : 0.0;
            lsf.shadow_db(k, l) = f;
            const double gain_db = -30.5 - 37.6 * std::log10(d) + f;
            lsf.beta(k, l) = std::pow(10.0, gain_db / 10.0);
        }
    }
    return lsf;
}

arma::cx_mat exponential_correlation(arma::uword m, double rho) {
    if (rho < 0.0 || rho >= 1.0)
        throw std::invalid_argument("exponential_correlation: rho must be in [0, 1)");
    arma::mat c(m, m);
    for (arma::uword i = 0; i < m; ++i)
        for (arma::uword j = 0; j < m; ++j)
            c(i, j) = std::pow(rho, std::abs(static_cast<double>(i) - static_cast<double>(j)));
    return arma::cx_mat(c, arma::mat(m, m, arma::fill::zeros));
}

CorrelationSet correlation_set_from_matrices(const std::vector<arma::cx_mat>& c_ap) {
    CorrelationSet set;
    set.c_ap = c_ap;
    set.eigenvalues.reserve(c_ap.size());
    set.sqrt_c_ap.reserve(c_ap.size());
    for (const auto& c : c_ap) {
        if (c.n_rows != c.n_cols)
            throw std::invalid_argument("correlation_set: matrix not square");
        if (arma::norm(c - c.t(), "fro") > 1e-10 * std::max(1.0, arma::norm(c, "fro")))
            throw std::invalid_argument("correlation_set: matrix not Hermitian");
        arma::vec xi;
        arma::cx_mat v;
        if (!arma::eig_sym(xi, v, c))
            throw std::runtime_error("correlation_set: eigendecomposition failed");
        if (xi.min() < -1e-9 * std::max(1.0, std::abs(xi.max())))
            throw std::invalid_argument("correlation_set: matrix not positive semi-definite");
        xi.transform([](double x) { return x < 1e-12 ? 0.0 : x; });
        set.eigenvalues.push_back(xi);
        set.sqrt_c_ap.push_back(v * arma::diagmat(arma::sqrt(xi)) * v.t());
    }
    return set;
}

CorrelationSet build_correlation_set(const SystemConfig& cfg) {
    std::vector<arma::cx_mat> mats;
    for (arma::uword m : cfg.antenna_counts())
        mats.push_back(exponential_correlation(m, cfg.corr_coeff));
    return correlation_set_from_matrices(mats);
}

TargetProfile draw_targets(const SystemConfig& cfg, RandomStream& rng) {
    arma::vec gamma(cfg.num_users);
    for (arma::uword k = 0; k < cfg.num_users; ++k) {
        const double u = rng.uniform(cfg.target_snr_min_db, cfg.target_snr_max_db);
        gamma(k) = std::pow(10.0, u / 10.0);
    }
    return make_targets(gamma, cfg.num_subcarriers);
}

TargetProfile make_targets(const arma::vec& gamma, arma::uword q_count) {
    if (gamma.n_elem == 0 || gamma.min() <= 0.0)
        throw std::invalid_argument("make_targets: targets must be positive");
    if (q_count < 1)
        throw std::invalid_argument("make_targets: q_count must be >= 1");
    TargetProfile t;
    t.gamma = gamma;
    t.d_tilde_gamma = gamma / static_cast<double>(q_count);
    t.q_count = q_count;
    return t;
}

} // namespace cfmimo
