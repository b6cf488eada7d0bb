// SPDX-License-Identifier: Apache-2.0
//
// Integration acceptance suite. Each criterion prints one PASS/FAIL line;
// the exit code is nonzero if any criterion fails. Run with --list to see
// the criteria, --only <id> to run a subset.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cfmimo/harness.hpp"
#include "oracles.hpp"

using namespace cfmimo;

namespace {

unsigned g_workers = 0;

struct CheckResult {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) { return format_double(v); }

// Synthetic two-AP scenario with exponential correlation and log-uniform
// large-scale gains; targets uniform between 1 and 20 dB.
struct SyntheticInstance {
    LargeScale lsf;
    CorrelationSet corr;
    TargetProfile targets;
    ChannelRealization ch;
    NormalizedChannel nch;
    double noise = 0.0;
};

SyntheticInstance make_instance(arma::uword num_users, arma::uword n, arma::uword q_count,
                                RandomStream& rng, double max_condition = 0.0) {
    SyntheticInstance inst;
    const std::vector<arma::uword> counts = {n / 2, n - n / 2};
    std::vector<arma::cx_mat> mats;
    for (arma::uword m : counts)
        mats.push_back(exponential_correlation(m, 0.7));
    inst.corr = correlation_set_from_matrices(mats);
    inst.lsf.beta.set_size(num_users, 2);
    for (auto& b : inst.lsf.beta)
        b = std::pow(10.0, rng.uniform(-12.0, -8.0));
    inst.lsf.shadow_db.zeros(num_users, 2);
    arma::vec gamma(num_users);
    for (auto& g : gamma)
        g = std::pow(10.0, rng.uniform(1.0, 20.0) / 10.0);
    inst.targets = make_targets(gamma, q_count);
    inst.noise = SystemConfig{}.noise_power;
    for (;;) {
        inst.ch = draw_channel(inst.lsf, inst.corr, q_count, rng);
        if (max_condition <= 0.0)
            break;
        double worst = 0.0;
        for (const auto& hq : inst.ch.h)
            worst = std::max(worst, arma::cond(hq));
        if (worst <= max_condition)
            break;
    }
    inst.nch = normalize(inst.ch, inst.lsf, inst.targets, inst.noise);
    return inst;
}

SystemConfig paper_scale_config() {
    SystemConfig cfg; // defaults: L=8, M=8, K=8, Q=256, consumption constants
    return cfg;
}

CheckResult zf_feasibility_grid() {
    const arma::uword users[] = {1, 4, 8};
    const arma::uword antennas[] = {8, 16, 64};
    const arma::uword bands[] = {1, 16};
    struct Job {
        arma::uword k, n, q;
        arma::uword index;
    };
    std::vector<Job> jobs;
    arma::uword index = 0;
    for (arma::uword k : users)
        for (arma::uword n : antennas)
            for (arma::uword q : bands)
                for (int r = 0; r < 6; ++r)
                    jobs.push_back({k, n, q, index++});

    const RandomStream root(1001);
    std::vector<double> worst(jobs.size(), 0.0);
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), g_workers, [&](arma::uword j) {
        try {
            RandomStream rng = root.substream(jobs[j].index);
            const SyntheticInstance inst = make_instance(jobs[j].k, jobs[j].n, jobs[j].q, rng,
                                                         jobs[j].k == jobs[j].n ? 500.0 : 0.0);
            double err = 0.0;
            const PrecoderSet conv = zf_precoder(inst.ch, inst.targets, inst.noise);
            err = std::max(err, zf_constraint_error(inst.ch, conv, inst.targets, inst.noise));
            const auto [p_opt, rep] = solve_antenna_powers(inst.nch);
            const PrecoderSet opt = optimal_precoder(inst.ch, inst.targets, inst.noise, p_opt);
            err = std::max(err, zf_constraint_error(inst.ch, opt, inst.targets, inst.noise));
            if (jobs[j].n > jobs[j].k) {
                const RmtInput input =
                    make_rmt_input(inst.lsf, inst.corr, inst.targets, inst.noise);
                const auto [pbar, rrep] = solve_pbar(input);
                const PrecoderSet rmt =
                    rmt_induced_precoder(inst.ch, inst.targets, inst.noise, pbar);
                err = std::max(err, zf_constraint_error(inst.ch, rmt, inst.targets, inst.noise));
            }
            worst[j] = err;
        } catch (const std::exception& e) {
            errors[j] = e.what();
        }
    });
    double peak = 0.0;
    for (double e : worst)
        peak = std::max(peak, e);
    for (const auto& e : errors)
        if (!e.empty())
            return {false, "instance failed: " + e};
    return {peak <= 1e-9, std::to_string(jobs.size()) + " realizations, max relative error " +
                              fmt(peak) + " (limit 1e-9)"};
}

CheckResult fixed_point_consistency() {
    const arma::uword users[] = {1, 4, 8};
    const arma::uword antennas[] = {8, 16, 64};
    const arma::uword bands[] = {1, 16};
    struct Job {
        arma::uword k, n, q, index;
    };
    std::vector<Job> jobs;
    arma::uword index = 0;
    for (arma::uword k : users)
        for (arma::uword n : antennas)
            for (arma::uword q : bands)
                for (int r = 0; r < 2; ++r)
                    jobs.push_back({k, n, q, index++});

    const RandomStream root(2002);
    std::vector<double> gap(jobs.size(), 0.0);
    std::vector<int> converged(jobs.size(), 0);
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), g_workers, [&](arma::uword j) {
        try {
            RandomStream rng = root.substream(jobs[j].index);
            const SyntheticInstance inst = make_instance(jobs[j].k, jobs[j].n, jobs[j].q, rng,
                                                         jobs[j].k == jobs[j].n ? 500.0 : 0.0);
            const auto [p_opt, rep] = solve_antenna_powers(inst.nch);
            converged[j] = rep.converged ? 1 : 0;
            if (rep.converged)
                gap[j] = self_consistency_error(inst.ch, inst.targets, inst.noise, p_opt);
        } catch (const std::exception& e) {
            errors[j] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty())
            return {false, "instance failed: " + e};
    double peak = 0.0;
    arma::uword n_converged = 0;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        peak = std::max(peak, gap[j]);
        n_converged += converged[j];
    }
    return {peak <= 1e-6 && n_converged == jobs.size(),
            std::to_string(n_converged) + "/" + std::to_string(jobs.size()) +
                " converged, max consistency gap " + fmt(peak) + " (limit 1e-6)"};
}

CheckResult square_case_equivalence() {
    RandomStream root(3003);
    double peak = 0.0;
    arma::uword count = 0;
    for (arma::uword k : {2, 4, 8}) {
        for (arma::uword q : {1, 4}) {
            for (int r = 0; r < 5; ++r) {
                RandomStream rng = root.substream(count);
                const SyntheticInstance inst = make_instance(k, k, q, rng, 100.0);
                const PrecoderSet conv = zf_precoder(inst.ch, inst.targets, inst.noise);
                AntennaPowerVector p;
                p.p.set_size(k);
                for (auto& v : p.p)
                    v = rng.uniform(0.1, 10.0);
                p.active_mask = arma::uvec(k, arma::fill::ones);
                const PrecoderSet opt = optimal_precoder(inst.ch, inst.targets, inst.noise, p);
                for (arma::uword qq = 0; qq < q; ++qq) {
                    const double scale = arma::abs(conv.w[qq]).max();
                    peak = std::max(peak, arma::abs(conv.w[qq] - opt.w[qq]).max() / scale);
                }
                ++count;
            }
        }
    }
    return {peak <= 1e-10, std::to_string(count) + " square instances, max entrywise gap " +
                               fmt(peak) + " (limit 1e-10)"};
}

CheckResult small_instance_oracle() {
    RandomStream root(4004);
    double peak = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        RandomStream rng = root.substream(trial);
        NormalizedChannel nch;
        nch.antennas_per_ap = {3};
        nch.ap_offsets = {0};
        nch.d_norm = {arma::vec(1, arma::fill::ones)};
        std::vector<arma::cx_rowvec> rows;
        for (int q = 0; q < 2; ++q) {
            arma::cx_mat h(1, 3);
            for (auto& v : h)
                v = rng.cnormal();
            nch.h_tilde.push_back(h);
            rows.push_back(arma::cx_rowvec(h.row(0)));
        }
        const auto [p, rep] = solve_antenna_powers(nch);
        const double ours = arma::accu(arma::sqrt(p.p));
        const double oracle = oracles::min_pa_objective_single_user(rows);
        peak = std::max(peak, std::abs(ours - oracle) / oracle);
    }
    return {peak <= 1e-4,
            "20 instances, max objective gap " + fmt(peak) + " relative (limit 1e-4)"};
}

CheckResult rmt_closed_forms() {
    RmtInput input;
    input.num_users = 8;
    input.q_count = 1;
    input.antennas_per_ap = {16};
    input.d_norm = {arma::vec(8, arma::fill::ones)};
    input.xi = {arma::vec(16, arma::fill::ones)};
    input.c = {0.5};
    const arma::vec p = {1.0};
    const arma::vec b = solve_b(input, p);
    const RmtAuxiliaries aux = solve_b_dot(input, p, b);
    const arma::vec pbar = pbar_map(input, p);
    const double eb = std::abs(b(0) - 2.0);
    const double ed = std::abs(aux.b_dot(0) - 8.0);
    const double ep = std::abs(pbar(0) - 0.0625);
    const bool pass = eb <= 1e-10 && ed <= 1e-10 && ep <= 1e-10;
    return {pass, "b err " + fmt(eb) + ", b_dot err " + fmt(ed) + ", pbar err " + fmt(ep) +
                      " (limit 1e-10)"};
}

CheckResult rmt_scale_invariance() {
    RandomStream root(6006);
    double peak = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        RandomStream rng = root.substream(trial);
        RmtInput input;
        input.num_users = 3;
        input.q_count = 4;
        input.c.set_size(3);
        for (arma::uword l = 0; l < 3; ++l) {
            const arma::uword m = 4 + 2 * l;
            input.antennas_per_ap.push_back(m);
            arma::vec d(3);
            for (auto& v : d)
                v = rng.uniform(0.5, 3.0);
            input.d_norm.push_back(d);
            arma::vec xi;
            arma::eig_sym(xi, exponential_correlation(m, 0.3 + 0.2 * l));
            input.xi.push_back(xi);
            input.c(l) = 3.0 / static_cast<double>(m);
        }
        arma::vec p(3);
        for (auto& v : p)
            v = rng.uniform(0.2, 4.0);
        const arma::vec base = pbar_map(input, p);
        for (double alpha : {0.1, 10.0}) {
            const arma::vec scaled = pbar_map(input, alpha * p);
            peak = std::max(peak, arma::abs(scaled - base).max() / base.max());
        }
    }
    return {peak <= 1e-12, "max relative drift " + fmt(peak) + " (limit 1e-12)"};
}

CheckResult asymptotic_accuracy_trend() {
    const arma::uword ms[] = {8, 16, 32};
    const arma::uword realizations = 20;
    const RandomStream root(7007);
    std::vector<double> gaps;
    for (std::size_t mi = 0; mi < 3; ++mi) {
        const arma::uword m = ms[mi];
        SystemConfig cfg;
        cfg.num_aps = 4;
        cfg.antennas_per_ap.assign(4, m);
        cfg.num_users = m / 2; // fixed load ratio across the sweep
        cfg.num_subcarriers = 8;

        std::vector<double> gap(realizations, 0.0);
        std::vector<std::string> errors(realizations);
        parallel_for(realizations, g_workers, [&](arma::uword r) {
            try {
                RandomStream rng = root.substream(100 * mi + r);
                const Geometry geom = generate_geometry(cfg, rng);
                const LargeScale lsf = compute_lsf(geom, cfg, rng);
                const CorrelationSet corr = build_correlation_set(cfg);
                const TargetProfile targets = draw_targets(cfg, rng);
                const ChannelRealization ch =
                    draw_channel(lsf, corr, cfg.num_subcarriers, rng);
                const NormalizedChannel nch = normalize(ch, lsf, targets, cfg.noise_power);

                const auto [p_opt, rep] = solve_antenna_powers(nch);
                const RmtInput input = make_rmt_input(lsf, corr, targets, cfg.noise_power);
                const auto [pbar, rrep] = solve_pbar(input);

                double num = 0.0, den = 0.0;
                arma::uword offset = 0;
                for (arma::uword l = 0; l < cfg.num_aps; ++l) {
                    const double block_mean =
                        arma::mean(p_opt.p.subvec(offset, offset + m - 1));
                    num += std::abs(block_mean - pbar.p_ap(l));
                    den += pbar.p_ap(l);
                    offset += m;
                }
                gap[r] = num / den;
            } catch (const std::exception& e) {
                errors[r] = e.what();
            }
        });
        for (const auto& e : errors)
            if (!e.empty())
                return {false, "realization failed: " + e};
        double mean = 0.0;
        for (double g : gap)
            mean += g;
        gaps.push_back(mean / realizations);
    }
    const bool pass = gaps[0] > gaps[1] && gaps[1] > gaps[2];
    return {pass, "mean relative gap by antennas/AP {8, 16, 32}: " + fmt(gaps[0]) + ", " +
                      fmt(gaps[1]) + ", " + fmt(gaps[2]) + " (must decrease)"};
}

CheckResult subcarrier_sweep_reproduction() {
    ExperimentSpec spec = ExperimentSpec::subcarrier_sweep_default();
    spec.base = paper_scale_config();
    spec.q_values = {1, 4, 16, 64, 256};
    spec.realizations = 100;
    spec.seed = 8008;
    spec.workers = g_workers;
    const MonteCarloResult result = run_subcarrier_sweep(spec);
    if (result.violation_records > 0)
        return {false, std::to_string(result.violation_records) + " invariant violations"};

    std::vector<double> means;
    std::string shown;
    for (arma::uword q : spec.q_values) {
        const AggregateRow* row =
            result.find({{"q", std::to_string(q)}, {"metric", "pas_ratio_vs_optimal"}});
        if (row == nullptr || row->n == 0)
            return {false, "missing ratio aggregate at q=" + std::to_string(q)};
        means.push_back(row->mean);
        shown += (shown.empty() ? "" : ", ") + std::to_string(q) + ":" + fmt(row->mean);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < means.size(); ++i)
        monotone = monotone && means[i] <= means[i - 1];
    const bool tail_ok = means.back() <= 1.05;
    std::string detail = "mean PA ratio by band {" + shown + "}";
    if (result.excluded_records > 0)
        detail += ", " + std::to_string(result.excluded_records) + " records excluded";
    return {monotone && tail_ok, detail + (tail_ok ? "" : " [tail above 1.05]") +
                                     (monotone ? "" : " [not non-increasing]")};
}

CheckResult load_sweep_reproduction() {
    ExperimentSpec low = ExperimentSpec::load_sweep_default();
    low.base = paper_scale_config();
    low.k_values = {1};
    low.l_values = {10};
    low.realizations = 100;
    low.seed = 9009;
    low.workers = g_workers;
    const MonteCarloResult low_result = run_load_sweep(low);
    const AggregateRow* low_row =
        low_result.find({{"k", "1"}, {"l", "10"}, {"metric", "gain_net"}});
    if (low_row == nullptr || low_row->n == 0)
        return {false, "missing gain aggregate at (k=1, l=10)"};

    ExperimentSpec high = low;
    high.k_values = {9};
    high.l_values = {8};
    high.seed = 9010;
    const MonteCarloResult high_result = run_load_sweep(high);
    const AggregateRow* high_row =
        high_result.find({{"k", "9"}, {"l", "8"}, {"metric", "gain_net"}});
    if (high_row == nullptr || high_row->n == 0)
        return {false, "missing gain aggregate at (k=9, l=8)"};

    const bool low_ok = low_row->mean >= 7.0 && low_row->mean <= 11.0;
    const bool high_ok = high_row->mean >= 1.3 && high_row->mean <= 1.7;
    return {low_ok && high_ok,
            "mean net gain (k=1, l=10) " + fmt(low_row->mean) + " (window [7, 11]), (k=9, l=8) " +
                fmt(high_row->mean) + " (window [1.3, 1.7])"};
}

CheckResult consumption_arithmetic() {
    const PaParams pa{3.0, 0.34};
    AntennaPowerVector one;
    one.p = {1.0};
    one.active_mask = {1};
    const double pas = pa_consumed_power(one, pa);
    const double pas_err = std::abs(pas - std::sqrt(3.0) / 0.34);

    AntennaPowerVector p8;
    p8.p = arma::vec(8, arma::fill::value(1.0 / 64.0));
    p8.active_mask = arma::uvec(8, arma::fill::ones);
    const ConsumptionReport rep =
        network_power(p8, ApPartition::from_counts({8}), pa, NetworkCosts{15.0, 0.7});
    const double net_err = std::abs(rep.p_net - (std::sqrt(3.0) / 0.34 + 15.0 + 5.6));
    const bool pass = pas_err <= 1e-12 && net_err <= 1e-12 &&
                      std::abs(pas - 5.0942670810849333) <= 1e-12 &&
                      std::abs(rep.p_net - 25.694267081084933) <= 1e-12;
    return {pass, "PA 5.0942 W err " + fmt(pas_err) + ", network 25.694 W err " + fmt(net_err)};
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CheckResult determinism() {
    SystemConfig small;
    small.num_aps = 4;
    small.antennas_per_ap.assign(4, 4);
    small.num_users = 4;
    small.num_subcarriers = 16;

    std::vector<std::pair<std::string, ExperimentSpec>> runs;
    {
        ExperimentSpec spec = ExperimentSpec::antenna_profile_default();
        spec.base = small;
        spec.seed = 11011;
        runs.emplace_back("antenna-profile", spec);
    }
    {
        ExperimentSpec spec = ExperimentSpec::subcarrier_sweep_default();
        spec.base = small;
        spec.q_values = {1, 4};
        spec.realizations = 6;
        spec.seed = 11012;
        runs.emplace_back("subcarrier-sweep", spec);
    }
    {
        ExperimentSpec spec = ExperimentSpec::load_sweep_default();
        spec.base = small;
        spec.k_values = {2, 3};
        spec.l_values = {2};
        spec.realizations = 6;
        spec.seed = 11013;
        runs.emplace_back("load-sweep", spec);
    }

    for (auto& [name, spec] : runs) {
        spec.workers = 1;
        spec.output_path = "acceptance_det_w1.csv";
        run_experiment(spec);
        spec.workers = 4;
        spec.output_path = "acceptance_det_w4.csv";
        run_experiment(spec);
        const std::string a = file_bytes("acceptance_det_w1.csv");
        const std::string b = file_bytes("acceptance_det_w4.csv");
        std::remove("acceptance_det_w1.csv");
        std::remove("acceptance_det_w4.csv");
        std::remove("acceptance_det_w1.csv.meta.txt");
        std::remove("acceptance_det_w4.csv.meta.txt");
        if (a.empty() || a != b)
            return {false, name + " output differs between 1 and 4 workers"};
    }
    return {true, "three experiments byte-identical across 1 and 4 workers"};
}

struct Criterion {
    int id;
    const char* name;
    std::function<CheckResult()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list = {
        {1, "zero-forcing feasibility grid", zf_feasibility_grid},
        {2, "fixed-point self-consistency", fixed_point_consistency},
        {3, "square-case equivalence", square_case_equivalence},
        {4, "small-instance optimality oracle", small_instance_oracle},
        {5, "deterministic-equivalent closed forms", rmt_closed_forms},
        {6, "power-map scale invariance", rmt_scale_invariance},
        {7, "asymptotic accuracy trend", asymptotic_accuracy_trend},
        {8, "consumption ratio versus band size", subcarrier_sweep_reproduction},
        {9, "network gain versus load", load_sweep_reproduction},
        {10, "consumption arithmetic", consumption_arithmetic},
        {11, "seeded determinism across workers", determinism},
    };
    return list;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--list") == 0) {
            for (const auto& c : criteria())
                std::printf("%2d  %s\n", c.id, c.name);
            return 0;
        }
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            only.push_back(std::atoi(argv[++i]));
        } else if (std::strcmp(argv[i], "--workers") == 0 && i + 1 < argc) {
            g_workers = static_cast<unsigned>(std::atoi(argv[++i]));
        }
    }

    int failures = 0;
    for (const auto& c : criteria()) {
        bool wanted = only.empty();
        for (int id : only)
            wanted = wanted || id == c.id;
        if (!wanted)
            continue;
        const auto start = std::chrono::steady_clock::now();
        CheckResult result;
        try {
            result = c.run();
        } catch (const std::exception& e) {
            result = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %2d %s — %s (%.1fs)\n", result.pass ? "PASS" : "FAIL", c.id, c.name,
                    result.detail.c_str(), secs);
        std::fflush(stdout);
        failures += result.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
