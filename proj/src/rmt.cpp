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

#include "cfmimo/rmt.hpp"

#include <string>

namespace cfmimo {

arma::uword RmtInput::total_antennas() const {
    arma::uword n = 0;
    for (arma::uword m : antennas_per_ap)
        n += m;
    return n;
}

void RmtInput::validate() const {
    const arma::uword num_aps = antennas_per_ap.size();
    if (num_aps == 0 || num_users == 0 || q_count == 0)
        throw std::invalid_argument("rmt: empty input");
    if (d_norm.size() != num_aps || xi.size() != num_aps || c.n_elem != num_aps)
        throw std::invalid_argument("rmt: per-AP field lengths disagree");
    for (arma::uword l = 0; l < num_aps; ++l) {
        if (d_norm[l].n_elem != num_users || d_norm[l].min() <= 0.0)
            throw std::invalid_argument("rmt: d_norm must be positive, length K");
        if (xi[l].n_elem != antennas_per_ap[l] || xi[l].min() < 0.0)
            throw std::invalid_argument("rmt: eigenvalues must be non-negative, length M_l");
        const double trace = arma::accu(xi[l]);
        if (std::abs(trace - static_cast<double>(antennas_per_ap[l])) >
            1e-6 * static_cast<double>(antennas_per_ap[l]))
            throw std::invalid_argument("rmt: correlation eigenvalues must sum to M_l");
        const double c_expected = static_cast<double>(num_users) /
                                  static_cast<double>(antennas_per_ap[l]);
        if (std::abs(c(l) - c_expected) > 1e-12 * c_expected)
            throw std::invalid_argument("rmt: ratio c_l inconsistent with K / M_l");
    }
}

RmtInput make_rmt_input(const LargeScale& lsf, const CorrelationSet& corr,
                        const TargetProfile& targets, double noise_power) {
    if (!(noise_power > 0.0))
        throw std::invalid_argument("make_rmt_input: noise power must be positive");
    RmtInput input;
    input.num_users = lsf.beta.n_rows;
    input.q_count = targets.q_count;
    const arma::uword num_aps = lsf.beta.n_cols;
    input.c.set_size(num_aps);
    for (arma::uword l = 0; l < num_aps; ++l) {
        input.antennas_per_ap.push_back(corr.c_ap.at(l).n_rows);
        input.d_norm.push_back(lsf.beta.col(l) / (noise_power * targets.d_tilde_gamma));
        input.xi.push_back(corr.eigenvalues.at(l));
        input.c(l) = static_cast<double>(input.num_users) /
                     static_cast<double>(input.antennas_per_ap[l]);
    }
    input.validate();
    return input;
}

namespace {

// w_l(b_l) = (1/M_l) sum_m xi_lm / (1 + c_l xi_lm b_l)
arma::vec resolvent_weights(const RmtInput& input, const arma::vec& b) {
    arma::vec w(input.num_aps());
    for (arma::uword l = 0; l < input.num_aps(); ++l)
        w(l) = arma::accu(input.xi[l] / (1.0 + input.c(l) * input.xi[l] * b(l))) /
               static_cast<double>(input.antennas_per_ap[l]);
    return w;
}

// B[k] = sum_l w_l sqrt(p_l) d_l[k]
arma::vec b_denominator(const RmtInput& input, const arma::vec& sqrt_p, const arma::vec& w) {
    arma::vec denom(input.num_users, arma::fill::zeros);
    for (arma::uword l = 0; l < input.num_aps(); ++l)
        if (sqrt_p(l) > 0.0)
            denom += w(l) * sqrt_p(l) * input.d_norm[l];
    return denom;
}

arma::vec b_map(const RmtInput& input, const arma::vec& sqrt_p, const arma::vec& b) {
    const arma::vec w = resolvent_weights(input, b);
    const arma::vec denom = b_denominator(input, sqrt_p, w);
    arma::vec next(input.num_aps(), arma::fill::zeros);
    for (arma::uword l = 0; l < input.num_aps(); ++l)
        if (sqrt_p(l) > 0.0)
            next(l) = arma::accu(sqrt_p(l) * input.d_norm[l] / denom) /
                      static_cast<double>(input.num_users);
    return next;
}

} // namespace

arma::vec solve_b(const RmtInput& input, const arma::vec& p_ap, const RmtOptions& opts) {
    input.validate();
    if (p_ap.n_elem != input.num_aps())
        throw std::invalid_argument("solve_b: power vector length mismatch");
    if (p_ap.min() < 0.0)
        throw std::invalid_argument("solve_b: negative AP power");
    if (p_ap.max() <= 0.0)
        throw std::invalid_argument("solve_b: all AP powers are zero");

    const arma::vec sqrt_p = arma::sqrt(p_ap);
    arma::vec b(input.num_aps(), arma::fill::ones);
    double damping = opts.damping;
    double prev_residual = arma::datum::inf;
    arma::uword growth_streak = 0;
    for (arma::uword it = 0; it < opts.b_max_iterations; ++it) {
        const arma::vec next = b_map(input, sqrt_p, b);
        const arma::vec updated = damping < 1.0 ? arma::vec((1.0 - damping) * b + damping * next)
                                                : next;
        const double scale = std::max(b.max(), std::numeric_limits<double>::min());
        const double residual = arma::abs(updated - b).max() / scale;
        b = updated;
        if (residual <= opts.b_tolerance)
            return b;
        growth_streak = residual > prev_residual ? growth_streak + 1 : 0;
        if (growth_streak >= 5 && damping > 0.5)
            damping = 0.5;
        prev_residual = residual;
    }
    throw std::runtime_error("solve_b: no convergence within iteration budget");
}

RmtAuxiliaries solve_b_dot(const RmtInput& input, const arma::vec& p_ap, const arma::vec& b) {
    input.validate();
    const arma::uword num_aps = input.num_aps();
    const arma::vec sqrt_p = arma::sqrt(p_ap);
    const arma::vec w = resolvent_weights(input, b);

    RmtAuxiliaries aux;
    aux.b = b;
    aux.b_diag = b_denominator(input, sqrt_p, w);

    // s_l = (1/M_l) sum_m c_l xi_lm^2 / (1 + c_l xi_lm b_l)^2, the scalar in
    // front of D_l inside D'_l.
    arma::vec s(num_aps);
    for (arma::uword l = 0; l < num_aps; ++l) {
        const arma::vec denom = 1.0 + input.c(l) * input.xi[l] * b(l);
        s(l) = arma::accu(input.c(l) * arma::square(input.xi[l]) / arma::square(denom)) /
               static_cast<double>(input.antennas_per_ap[l]);
    }

    const arma::vec inv_b2 = 1.0 / arma::square(aux.b_diag);
    aux.a_matrix.set_size(num_aps, num_aps);
    arma::vec rhs(num_aps);
    for (arma::uword l = 0; l < num_aps; ++l) {
        rhs(l) = sqrt_p(l) * arma::accu(input.d_norm[l] % inv_b2) /
                 static_cast<double>(input.num_users);
        for (arma::uword lp = 0; lp < num_aps; ++lp)
            aux.a_matrix(l, lp) = sqrt_p(l) * sqrt_p(lp) * s(lp) *
                                  arma::accu(input.d_norm[l] % input.d_norm[lp] % inv_b2) /
                                  static_cast<double>(input.num_users);
    }

    arma::mat eye_minus_a = arma::eye(num_aps, num_aps) - aux.a_matrix;
    arma::vec b_dot;
    if (!arma::solve(b_dot, eye_minus_a, rhs, arma::solve_opts::no_approx) ||
        !b_dot.is_finite())
        throw std::runtime_error("solve_b_dot: I - A is singular");
    aux.b_dot = b_dot;
    return aux;
}

arma::vec pbar_map(const RmtInput& input, const arma::vec& p_ap, const RmtOptions& opts) {
    const arma::vec b = solve_b(input, p_ap, opts);
    const RmtAuxiliaries aux = solve_b_dot(input, p_ap, b);
    const arma::vec sqrt_p = arma::sqrt(p_ap);
    arma::vec pbar(input.num_aps(), arma::fill::zeros);
    for (arma::uword l = 0; l < input.num_aps(); ++l) {
        if (sqrt_p(l) <= 0.0)
            continue;
        const arma::vec denom = arma::square(1.0 + input.c(l) * b(l) * input.xi[l]);
        const double m = static_cast<double>(input.antennas_per_ap[l]);
        pbar(l) = static_cast<double>(input.q_count) * sqrt_p(l) * input.c(l) * aux.b_dot(l) *
                  arma::accu(input.xi[l] / denom) / (m * m);
    }
    return pbar;
}

std::pair<ApPowerVector, FixedPointReport> solve_pbar(const RmtInput& input,
                                                      const RmtOptions& opts) {
    input.validate();
    if (input.total_antennas() <= input.num_users)
        throw std::invalid_argument("solve_pbar: total antennas must exceed user count");

    FixedPointReport report;
    arma::vec p(input.num_aps(), arma::fill::ones);
    double damping = opts.damping;
    double prev_residual = arma::datum::inf;
    arma::uword growth_streak = 0;

    const auto objective = [&input](const arma::vec& v) {
        double sum = 0.0;
        for (arma::uword l = 0; l < input.num_aps(); ++l)
            sum += static_cast<double>(input.antennas_per_ap[l]) * std::sqrt(v(l));
        return sum;
    };
    report.objective_trace.push_back(objective(p));

    for (arma::uword it = 0; it < opts.pbar_max_iterations; ++it) {
        const double floor = opts.floor_rel * p.max();
        p.transform([floor](double v) { return v < floor ? floor : v; });

        const arma::vec next = pbar_map(input, p, opts);
        const arma::vec updated = damping < 1.0 ? arma::vec((1.0 - damping) * p + damping * next)
                                                : next;
        const double scale = std::max(p.max(), std::numeric_limits<double>::min());
        const double residual = arma::abs(updated - p).max() / scale;

        p = updated;
        report.iterations = it + 1;
        report.final_residual = residual;
        report.objective_trace.push_back(objective(p));

        if (residual <= opts.pbar_tolerance) {
            report.converged = true;
            break;
        }
        growth_streak = residual > prev_residual ? growth_streak + 1 : 0;
        if (growth_streak >= 5 && damping > 0.5)
            damping = 0.5;
        prev_residual = residual;
    }

    const double deactivation = opts.deactivation_rel * p.max();
    p.transform([deactivation](double v) { return v > deactivation ? v : 0.0; });

    ApPowerVector out;
    out.p_ap = p;
    out.active_set = select_active_aps(p, opts.activation_threshold_rel, input.antennas_per_ap,
                                       input.num_users);
    return {std::move(out), std::move(report)};
}

std::vector<arma::uword> select_active_aps(const arma::vec& p_ap, double rel_threshold,
                                           const std::vector<arma::uword>& antennas_per_ap,
                                           arma::uword num_users) {
    if (p_ap.n_elem != antennas_per_ap.size())
        throw std::invalid_argument("select_active_aps: length mismatch");
    const double top = p_ap.n_elem ? p_ap.max() : 0.0;
    if (!(top > 0.0))
        throw std::runtime_error("select_active_aps: no AP carries power");
    const double eps = rel_threshold * top;
    std::vector<arma::uword> active;
    arma::uword antennas = 0;
    for (arma::uword l = 0; l < p_ap.n_elem; ++l) {
        if (p_ap(l) > eps) {
            active.push_back(l);
            antennas += antennas_per_ap[l];
        }
    }
    if (active.empty())
        throw std::runtime_error("select_active_aps: empty active set");
    if (antennas < num_users)
        throw std::runtime_error("select_active_aps: active antennas cannot serve " +
                                 std::to_string(num_users) + " users");
    return active;
}

arma::vec expand_ap_powers(const ApPowerVector& powers,
                           const std::vector<arma::uword>& antennas_per_ap) {
    if (powers.p_ap.n_elem != antennas_per_ap.size())
        throw std::invalid_argument("expand_ap_powers: length mismatch");
    arma::uword n = 0;
    for (arma::uword m : antennas_per_ap)
        n += m;
    arma::vec p(n, arma::fill::zeros);
    arma::uword offset = 0;
    for (arma::uword l = 0; l < antennas_per_ap.size(); ++l) {
        const bool active = std::find(powers.active_set.begin(), powers.active_set.end(), l) !=
                            powers.active_set.end();
        if (active)
            p.subvec(offset, offset + antennas_per_ap[l] - 1).fill(powers.p_ap(l));
        offset += antennas_per_ap[l];
    }
    return p;
}

PrecoderSet rmt_induced_precoder(const ChannelRealization& ch, const TargetProfile& targets,
                                 double noise_power, const ApPowerVector& powers) {
    AntennaPowerVector expanded;
    expanded.p = expand_ap_powers(powers, ch.antennas_per_ap);
    expanded.active_mask = arma::conv_to<arma::uvec>::from(expanded.p > 0.0);
    PrecoderSet ws = optimal_precoder(ch, targets, noise_power, expanded);
    ws.kind = PrecoderKind::rmt_induced;
    return ws;
}

} // namespace cfmimo
