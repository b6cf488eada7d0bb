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

#include "cfmimo/precoding.hpp"

#include <string>

namespace cfmimo {

namespace {

arma::cx_mat hermitian_solve(const arma::cx_mat& s, const arma::cx_mat& rhs, arma::uword q) {
    arma::cx_mat x;
    const bool ok = arma::solve(x, s, rhs,
                                arma::solve_opts::likely_sympd + arma::solve_opts::no_approx);
    if (!ok || !x.is_finite())
        throw std::runtime_error("precoding: singular Gram matrix at subcarrier " +
                                 std::to_string(q));
    return x;
}

arma::cx_mat target_matrix(const TargetProfile& targets, double noise_power) {
    const arma::vec d = arma::sqrt(targets.d_tilde_gamma) * std::sqrt(noise_power);
    return arma::cx_mat(arma::diagmat(d), arma::mat(d.n_elem, d.n_elem, arma::fill::zeros));
}

// In-place lower Cholesky of a Hermitian positive definite matrix; only the
// lower triangle is referenced. Returns false if a pivot is not positive.
bool cholesky_lower(arma::cx_mat& a) {
    const arma::uword k = a.n_rows;
    for (arma::uword j = 0; j < k; ++j) {
        double d = a(j, j).real();
        for (arma::uword t = 0; t < j; ++t)
            d -= std::norm(a(j, t));
        if (!(d > 0.0) || !std::isfinite(d))
            return false;
        const double pivot = std::sqrt(d);
        a(j, j) = pivot;
        for (arma::uword i = j + 1; i < k; ++i) {
            std::complex<double> s = a(i, j);
            for (arma::uword t = 0; t < j; ++t)
                s -= a(i, t) * std::conj(a(j, t));
            a(i, j) = s / pivot;
        }
    }
    return true;
}

// Solves (L L^H) X = B column by column, overwriting B.
void cholesky_solve_inplace(const arma::cx_mat& l, arma::cx_mat& b) {
    const arma::uword k = l.n_rows;
    for (arma::uword c = 0; c < b.n_cols; ++c) {
        std::complex<double>* col = b.colptr(c);
        for (arma::uword i = 0; i < k; ++i) {
            std::complex<double> s = col[i];
            for (arma::uword t = 0; t < i; ++t)
                s -= l(i, t) * col[t];
            col[i] = s / l(i, i).real();
        }
        for (arma::uword i = k; i-- > 0;) {
            std::complex<double> s = col[i];
            for (arma::uword t = i + 1; t < k; ++t)
                s -= std::conj(l(t, i)) * col[t];
            col[i] = s / l(i, i).real();
        }
    }
}

// Scratch buffers reused across subcarriers and iterations; the power map is
// the hot loop of the solver, so it avoids per-call allocations and LAPACK
// dispatch overhead on the small K x K systems.
struct PowerMapWorkspace {
    arma::cx_mat y; // K x N, scaled channel, later overwritten by the solve
    arma::cx_mat s; // K x K Gram matrix
};

// One application of the per-antenna power map: given weights p (length N),
// returns sum_q of the diagonal of D_p^{1/2} Ht^H (Ht D_p^{1/2} Ht^H)^{-2} Ht D_p^{1/2},
// computed per subcarrier as sqrt(p_n) * || (S^{-1} Y) e_n ||^2 with
// Y = Ht diag(p^{1/4}) and S = Y Y^H. Terms are accumulated in ascending q so
// the result does not depend on how callers distribute work.
void power_map_into(const std::vector<arma::cx_mat>& h_tilde, const arma::vec& p,
                    arma::vec& next, PowerMapWorkspace& ws) {
    const arma::uword k = h_tilde[0].n_rows;
    const arma::uword n = h_tilde[0].n_cols;
    const arma::vec quarter = arma::sqrt(arma::sqrt(p));
    const arma::vec half = arma::sqrt(p);
    next.zeros(n);
    ws.y.set_size(k, n);
    ws.s.set_size(k, k);
    for (arma::uword q = 0; q < h_tilde.size(); ++q) {
        for (arma::uword c = 0; c < n; ++c) {
            const std::complex<double>* src = h_tilde[q].colptr(c);
            std::complex<double>* dst = ws.y.colptr(c);
            const double f = quarter(c);
            for (arma::uword i = 0; i < k; ++i)
                dst[i] = src[i] * f;
        }
        ws.s.zeros();
        for (arma::uword c = 0; c < n; ++c) {
            const std::complex<double>* yc = ws.y.colptr(c);
            for (arma::uword j = 0; j < k; ++j) {
                const std::complex<double> yj = std::conj(yc[j]);
                for (arma::uword i = j; i < k; ++i)
                    ws.s(i, j) += yc[i] * yj;
            }
        }
        if (!cholesky_lower(ws.s)) {
            // Rare ill-conditioned Gram: rebuild and fall back to a pivoted solve.
            const arma::cx_mat gram = ws.y * ws.y.t();
            arma::cx_mat solved;
            if (!arma::solve(solved, gram, ws.y, arma::solve_opts::no_approx) ||
                !solved.is_finite())
                throw std::runtime_error("precoding: singular Gram matrix at subcarrier " +
                                         std::to_string(q));
            ws.y = std::move(solved);
        } else {
            cholesky_solve_inplace(ws.s, ws.y);
        }
        for (arma::uword c = 0; c < n; ++c) {
            const std::complex<double>* yc = ws.y.colptr(c);
            double acc = 0.0;
            for (arma::uword i = 0; i < k; ++i)
                acc += std::norm(yc[i]);
            next(c) += half(c) * acc;
        }
    }
}

} // namespace

PrecoderSet zf_precoder(const ChannelRealization& ch, const TargetProfile& targets,
                        double noise_power) {
    if (!(noise_power > 0.0))
        throw std::invalid_argument("zf_precoder: noise power must be positive");
    if (targets.gamma.n_elem != ch.num_users())
        throw std::invalid_argument("zf_precoder: target count does not match users");
    const arma::cx_mat rhs = target_matrix(targets, noise_power);
    PrecoderSet ws;
    ws.kind = PrecoderKind::conventional;
    ws.w.reserve(ch.num_subcarriers());
    for (arma::uword q = 0; q < ch.num_subcarriers(); ++q) {
        const arma::cx_mat& hq = ch.h[q];
        const arma::cx_mat s = hq * hq.t();
        ws.w.push_back(hq.t() * hermitian_solve(s, rhs, q));
    }
    return ws;
}

PrecoderSet optimal_precoder(const ChannelRealization& ch, const TargetProfile& targets,
                             double noise_power, const AntennaPowerVector& p) {
    if (!(noise_power > 0.0))
        throw std::invalid_argument("optimal_precoder: noise power must be positive");
    if (p.p.n_elem != ch.num_antennas())
        throw std::invalid_argument("optimal_precoder: power vector length mismatch");
    if (p.p.min() < 0.0)
        throw std::invalid_argument("optimal_precoder: negative antenna power");
    if (arma::accu(p.p > 0.0) < ch.num_users())
        throw std::invalid_argument("optimal_precoder: fewer strictly positive powers than users");

    const arma::uword n = ch.num_antennas();
    const arma::cx_vec quarter(arma::sqrt(arma::sqrt(p.p)), arma::vec(n, arma::fill::zeros));
    const arma::cx_vec half(arma::sqrt(p.p), arma::vec(n, arma::fill::zeros));
    const arma::cx_mat rhs = target_matrix(targets, noise_power);

    PrecoderSet ws;
    ws.kind = PrecoderKind::consumed_power_optimal;
    ws.w.reserve(ch.num_subcarriers());
    for (arma::uword q = 0; q < ch.num_subcarriers(); ++q) {
        const arma::cx_mat& hq = ch.h[q];
        const arma::cx_mat y = hq * arma::diagmat(quarter);
        const arma::cx_mat s = y * y.t(); // H D_p^{1/2} H^H
        const arma::cx_mat z = hermitian_solve(s, rhs, q);
        ws.w.push_back(arma::diagmat(half) * (hq.t() * z));
    }
    return ws;
}

std::pair<AntennaPowerVector, FixedPointReport>
solve_antenna_powers(const NormalizedChannel& nch, const FixedPointOptions& opts) {
    const arma::uword n = nch.num_antennas();
    const arma::uword num_users = nch.num_users();
    if (nch.h_tilde.empty())
        throw std::invalid_argument("solve_antenna_powers: no subcarriers");
    if (n < num_users)
        throw std::invalid_argument("solve_antenna_powers: fewer antennas than users");

    FixedPointReport report;
    PowerMapWorkspace ws;
    arma::vec p, next;
    // The map applied to uniform weights is exactly the conventional ZF
    // power profile, which is the prescribed starting point.
    power_map_into(nch.h_tilde, arma::vec(n, arma::fill::ones), p, ws);
    report.objective_trace.push_back(arma::accu(arma::sqrt(p)));

    double damping = opts.damping;
    double prev_residual = arma::datum::inf;
    arma::uword growth_streak = 0;

    const auto step = [&](bool with_floor) {
        if (with_floor) {
            const double floor = opts.iteration_floor_rel * p.max();
            p.transform([floor](double v) { return v < floor ? floor : v; });
            if (arma::accu(p > floor) < num_users)
                throw std::runtime_error("solve_antenna_powers: fewer active antennas than users");
        } else if (arma::accu(p > 0.0) < num_users) {
            throw std::runtime_error("solve_antenna_powers: fewer active antennas than users");
        }
        power_map_into(nch.h_tilde, p, next, ws);
        if (damping < 1.0)
            next = (1.0 - damping) * p + damping * next;
        const double scale = std::max(p.max(), std::numeric_limits<double>::min());
        const double residual = arma::abs(next - p).max() / scale;
        p.swap(next);
        ++report.iterations;
        report.final_residual = residual;
        report.objective_trace.push_back(arma::accu(arma::sqrt(p)));
        growth_streak = residual > prev_residual ? growth_streak + 1 : 0;
        if (growth_streak >= 5 && damping > 0.5)
            damping = 0.5;
        prev_residual = residual;
        return residual;
    };

    for (arma::uword it = 0; it < opts.max_iterations; ++it) {
        if (step(true) <= opts.tolerance) {
            report.converged = true;
            break;
        }
    }

    // Deactivate the floored tail, then re-converge on the surviving support
    // so the reported vector is a fixed point of the masked map as well (the
    // map keeps exact zeros at zero). Without this the mask perturbation can
    // exceed the consistency tolerance.
    const auto apply_mask = [&]() {
        const double deactivation = opts.deactivation_rel * p.max();
        arma::uword masked = 0;
        for (arma::uword i = 0; i < p.n_elem; ++i) {
            if (p(i) > 0.0 && p(i) <= deactivation) {
                p(i) = 0.0;
                ++masked;
            }
        }
        return masked;
    };

    if (apply_mask() > 0) {
        report.converged = false;
        for (arma::uword it = 0; it < opts.polish_max_iterations; ++it) {
            const double residual = step(false);
            const bool masked_more = apply_mask() > 0;
            if (residual <= opts.tolerance && !masked_more) {
                report.converged = true;
                break;
            }
        }
    }

    AntennaPowerVector out;
    out.p = p;
    out.active_mask = arma::conv_to<arma::uvec>::from(p > 0.0);
    return {std::move(out), std::move(report)};
}

AntennaPowerVector per_antenna_powers(const PrecoderSet& ws, double deactivation_rel) {
    if (ws.w.empty())
        throw std::invalid_argument("per_antenna_powers: empty precoder set");
    arma::vec p(ws.num_antennas(), arma::fill::zeros);
    for (const auto& wq : ws.w)
        p += arma::sum(arma::square(arma::abs(wq)), 1);
    AntennaPowerVector out;
    out.p = p;
    const double floor = deactivation_rel * (p.n_elem ? p.max() : 0.0);
    out.active_mask = arma::conv_to<arma::uvec>::from(p > floor);
    return out;
}

double zf_constraint_error(const ChannelRealization& ch, const PrecoderSet& ws,
                           const TargetProfile& targets, double noise_power) {
    const arma::cx_mat rhs = target_matrix(targets, noise_power);
    const double ref = arma::norm(rhs, "fro");
    double worst = 0.0;
    for (arma::uword q = 0; q < ch.num_subcarriers(); ++q)
        worst = std::max(worst, arma::norm(ch.h[q] * ws.w[q] - rhs, "fro"));
    return worst / ref;
}

double self_consistency_error(const ChannelRealization& ch, const TargetProfile& targets,
                              double noise_power, const AntennaPowerVector& p) {
    const PrecoderSet ws = optimal_precoder(ch, targets, noise_power, p);
    const AntennaPowerVector realized = per_antenna_powers(ws);
    const double scale = std::max(p.p.max(), std::numeric_limits<double>::min());
    return arma::abs(realized.p - p.p).max() / scale;
}

} // namespace cfmimo
