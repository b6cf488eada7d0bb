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

#include "cfmimo/harness.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace cfmimo {

namespace {

constexpr double kZfFeasibilityTol = 1e-9;
constexpr double kConsistencyTol = 1e-6;

// Invariant breaks are distinguished from ordinary solver errors so the
// harness can fail hard on the former and merely report the latter.
struct ViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string u2s(arma::uword v) { return std::to_string(v); }

struct EvalDetail {
    arma::vec p_conventional;
    arma::vec p_optimal;
    arma::vec p_rmt_expanded; // statistics-only profile, flat per AP
    std::vector<arma::uword> ap_of_antenna;
};

RealizationRecord evaluate_realization(const SystemConfig& cfg, RandomStream stream,
                                       bool want_optimal, EvalDetail* detail) {
    RealizationRecord rec;
    try {
        const Geometry geom = generate_geometry(cfg, stream);
        const LargeScale lsf = compute_lsf(geom, cfg, stream);
        const CorrelationSet corr = build_correlation_set(cfg);
        const TargetProfile targets = draw_targets(cfg, stream);
        rec.scenario_digest = scenario_digest(geom, lsf, targets);

        const ChannelRealization ch = draw_channel(lsf, corr, cfg.num_subcarriers, stream);
        const NormalizedChannel nch = normalize(ch, lsf, targets, cfg.noise_power);

        const ApPartition part = ApPartition::from_counts(cfg.antenna_counts());
        const PaParams pa{cfg.pa_max_power, cfg.pa_max_efficiency};
        const NetworkCosts costs{cfg.p_fix, cfg.p_circuit};

        const PrecoderSet w_conv = zf_precoder(ch, targets, cfg.noise_power);
        double err = zf_constraint_error(ch, w_conv, targets, cfg.noise_power);
        if (err > kZfFeasibilityTol)
            throw ViolationError("conventional precoder infeasible, error " + format_double(err));
        const AntennaPowerVector p_conv = per_antenna_powers(w_conv);
        const ConsumptionReport conv = network_power(p_conv, part, pa, costs, &targets);
        rec.reports["conventional"] = conv;

        if (want_optimal) {
            auto [p_opt, fp] = solve_antenna_powers(nch);
            rec.diagnostics["optimal"] = fp;
            const double consistency =
                self_consistency_error(ch, targets, cfg.noise_power, p_opt);
            rec.values["self_consistency"] = consistency;
            if (consistency > kConsistencyTol) {
                if (fp.converged)
                    throw ViolationError("fixed-point consistency " + format_double(consistency) +
                                         " above tolerance on a converged instance");
                rec.ok = false;
                rec.excluded_unconverged = true;
                rec.error = "power solver stopped after " + u2s(fp.iterations) +
                            " iterations with residual " + format_double(fp.final_residual);
                return rec;
            }
            const PrecoderSet w_opt = optimal_precoder(ch, targets, cfg.noise_power, p_opt);
            err = zf_constraint_error(ch, w_opt, targets, cfg.noise_power);
            if (err > kZfFeasibilityTol)
                throw ViolationError("optimal precoder infeasible, error " + format_double(err));
            ConsumptionReport opt = network_power(p_opt, part, pa, costs, &targets);
            if (opt.p_pas > conv.p_pas * (1.0 + 1e-9))
                throw ViolationError("consumed-power precoder drew more PA power than the baseline");
            rec.reports["optimal"] = with_gain(std::move(opt), conv);
            if (detail)
                detail->p_optimal = p_opt.p;
        }

        const RmtInput input = make_rmt_input(lsf, corr, targets, cfg.noise_power);
        RmtOptions ropts;
        ropts.activation_threshold_rel = cfg.activation_threshold_rel;
        auto [pbar, rfp] = solve_pbar(input, ropts);
        rec.diagnostics["rmt"] = rfp;
        const PrecoderSet w_rmt = rmt_induced_precoder(ch, targets, cfg.noise_power, pbar);
        err = zf_constraint_error(ch, w_rmt, targets, cfg.noise_power);
        if (err > kZfFeasibilityTol)
            throw ViolationError("statistics-based precoder infeasible, error " +
                                 format_double(err));
        const AntennaPowerVector p_rmt = per_antenna_powers(w_rmt);
        ConsumptionReport rmt = with_gain(network_power(p_rmt, part, pa, costs, &targets), conv);
        rec.values["active_aps_rmt"] = static_cast<double>(pbar.active_set.size());
        if (rec.reports.count("optimal"))
            rec.values["pas_ratio_vs_optimal"] = rmt.p_pas / rec.reports["optimal"].p_pas;
        rec.reports["rmt"] = std::move(rmt);

        if (detail) {
            detail->p_conventional = p_conv.p;
            detail->p_rmt_expanded = expand_ap_powers(pbar, cfg.antenna_counts());
            detail->ap_of_antenna.clear();
            for (arma::uword l = 0; l < part.num_aps(); ++l)
                for (arma::uword i = 0; i < part.antennas_per_ap[l]; ++i)
                    detail->ap_of_antenna.push_back(l);
        }
    } catch (const ViolationError& e) {
        rec.ok = false;
        rec.violation = true;
        rec.error = e.what();
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.violation = true;
        rec.error = std::string("solver error: ") + e.what();
    }
    return rec;
}

struct SweepPoint {
    std::vector<std::pair<std::string, std::string>> key_cols;
    SystemConfig cfg;
    arma::uword original_index = 0;
    bool feasible = true;
};

std::string sweep_key_of(const SweepPoint& pt) {
    std::string key;
    for (const auto& [name, value] : pt.key_cols) {
        if (!key.empty())
            key += ",";
        key += name + "=" + value;
    }
    return key;
}

AggregateRow make_aggregate(std::vector<std::pair<std::string, std::string>> keys,
                            const std::vector<double>& samples) {
    AggregateRow row;
    row.keys = std::move(keys);
    row.n = samples.size();
    if (samples.empty()) {
        row.mean = std::numeric_limits<double>::quiet_NaN();
        row.std_error = std::numeric_limits<double>::quiet_NaN();
        return row;
    }
    double sum = 0.0;
    for (double v : samples)
        sum += v;
    row.mean = sum / static_cast<double>(samples.size());
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double v : samples)
            ss += (v - row.mean) * (v - row.mean);
        row.std_error = std::sqrt(ss / static_cast<double>(samples.size() - 1) /
                                  static_cast<double>(samples.size()));
    }
    return row;
}

void append_aggregate(MonteCarloResult& result, const SweepPoint& pt, const std::string& method,
                      const std::string& metric, const std::vector<double>& samples) {
    std::vector<std::pair<std::string, std::string>> keys = pt.key_cols;
    keys.emplace_back("method", method);
    keys.emplace_back("metric", metric);
    AggregateRow row = make_aggregate(std::move(keys), samples);
    std::vector<std::string> cells;
    for (const auto& [name, value] : row.keys) {
        (void)name;
        cells.push_back(value);
    }
    cells.push_back(format_double(row.mean));
    cells.push_back(format_double(row.std_error));
    cells.push_back(u2s(row.n));
    result.table.rows.push_back(std::move(cells));
    result.aggregates.push_back(std::move(row));
}

// Runs realizations x points with per-job streams derived from the flat job
// index, then reduces in index order.
MonteCarloResult run_sweep(const ExperimentSpec& spec, std::vector<SweepPoint> points,
                           bool want_optimal, const std::vector<std::string>& sweep_columns) {
    MonteCarloResult result;
    result.table.header = sweep_columns;
    result.table.header.insert(result.table.header.end(),
                               {"method", "metric", "mean", "stderr", "n"});

    std::vector<const SweepPoint*> feasible;
    for (auto& pt : points) {
        if (pt.feasible)
            feasible.push_back(&pt);
        else
            ++result.skipped_points;
    }

    const arma::uword jobs = feasible.size() * spec.realizations;
    std::vector<RealizationRecord> records(jobs);
    const RandomStream root(spec.seed);
    parallel_for(jobs, spec.workers, [&](arma::uword job) {
        const arma::uword point_idx = job / spec.realizations;
        const arma::uword r = job % spec.realizations;
        const SweepPoint& pt = *feasible[point_idx];
        const std::uint64_t stream_index =
            static_cast<std::uint64_t>(pt.original_index) * spec.realizations + r;
        RealizationRecord rec =
            evaluate_realization(pt.cfg, root.substream(stream_index), want_optimal, nullptr);
        rec.realization = r;
        rec.sweep_key = sweep_key_of(pt);
        records[job] = std::move(rec);
    });

    for (std::size_t i = 0; i < feasible.size(); ++i) {
        const SweepPoint& pt = *feasible[i];
        std::vector<RealizationRecord*> included;
        for (arma::uword r = 0; r < spec.realizations; ++r) {
            RealizationRecord& rec = records[i * spec.realizations + r];
            if (rec.ok)
                included.push_back(&rec);
            else if (rec.excluded_unconverged)
                ++result.excluded_records;
            else
                ++result.violation_records;
        }

        const auto collect_value = [&](const std::string& name) {
            std::vector<double> v;
            for (const auto* rec : included)
                if (rec->values.count(name))
                    v.push_back(rec->values.at(name));
            return v;
        };
        const auto collect_report = [&](const std::string& method, auto&& getter) {
            std::vector<double> v;
            for (const auto* rec : included)
                if (rec->reports.count(method))
                    v.push_back(getter(rec->reports.at(method)));
            return v;
        };

        if (want_optimal)
            append_aggregate(result, pt, "rmt", "pas_ratio_vs_optimal",
                             collect_value("pas_ratio_vs_optimal"));
        append_aggregate(result, pt, "rmt", "gain_net", collect_report("rmt", [](const auto& rep) {
                             return rep.gain_net.value();
                         }));
        append_aggregate(result, pt, "rmt", "gain_pas", collect_report("rmt", [](const auto& rep) {
                             return rep.gain_pas.value();
                         }));
        for (const char* method : {"conventional", "optimal", "rmt"}) {
            if (std::string(method) == "optimal" && !want_optimal)
                continue;
            append_aggregate(result, pt, method, "p_pas",
                             collect_report(method, [](const auto& rep) { return rep.p_pas; }));
            append_aggregate(result, pt, method, "p_net",
                             collect_report(method, [](const auto& rep) { return rep.p_net; }));
        }
        append_aggregate(result, pt, "rmt", "active_aps", collect_value("active_aps_rmt"));
    }

    result.records = std::move(records);
    return result;
}

} // namespace

std::string CsvTable::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        out += header[i];
        out += (i + 1 == header.size()) ? "\n" : ",";
    }
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += row[i];
            out += (i + 1 == row.size()) ? "\n" : ",";
        }
    }
    return out;
}

const AggregateRow*
MonteCarloResult::find(std::initializer_list<std::pair<std::string, std::string>> keys) const {
    for (const auto& row : aggregates) {
        bool match = true;
        for (const auto& want : keys) {
            bool found = false;
            for (const auto& have : row.keys)
                found = found || (have.first == want.first && have.second == want.second);
            match = match && found;
        }
        if (match)
            return &row;
    }
    return nullptr;
}

ExperimentSpec ExperimentSpec::antenna_profile_default() {
    ExperimentSpec spec;
    spec.kind = Kind::antenna_profile;
    spec.realizations = 1;
    return spec;
}

ExperimentSpec ExperimentSpec::subcarrier_sweep_default() {
    ExperimentSpec spec;
    spec.kind = Kind::subcarrier_sweep;
    spec.q_values = {1, 2, 4, 8, 16, 32, 64, 128, 256};
    spec.realizations = 100;
    return spec;
}

ExperimentSpec ExperimentSpec::load_sweep_default() {
    ExperimentSpec spec;
    spec.kind = Kind::load_sweep;
    for (arma::uword k = 1; k <= 19; ++k)
        spec.k_values.push_back(k);
    for (arma::uword l = 2; l <= 10; ++l)
        spec.l_values.push_back(l);
    spec.realizations = 100;
    return spec;
}

void ExperimentSpec::apply_quick_profile() {
    realizations = std::min<arma::uword>(realizations, 20);
    base.num_subcarriers = std::min<arma::uword>(base.num_subcarriers, 64);
    std::vector<arma::uword> trimmed;
    for (arma::uword q : q_values)
        if (q <= 64)
            trimmed.push_back(q);
    q_values = trimmed;
    if (kind == Kind::antenna_profile)
        realizations = 1;
}

void ExperimentSpec::validate() const {
    if (realizations < 1)
        throw std::invalid_argument("experiment: realizations must be >= 1");
    if (kind == Kind::subcarrier_sweep && q_values.empty())
        throw std::invalid_argument("experiment: subcarrier sweep needs q values");
    if (kind == Kind::load_sweep && (k_values.empty() || l_values.empty()))
        throw std::invalid_argument("experiment: load sweep needs k and l values");
}

const char* ExperimentSpec::kind_name() const {
    switch (kind) {
    case Kind::antenna_profile: return "antenna-profile";
    case Kind::subcarrier_sweep: return "subcarrier-sweep";
    case Kind::load_sweep: return "load-sweep";
    }
    return "unknown";
}

MonteCarloResult run_antenna_profile(const ExperimentSpec& spec) {
    spec.validate();
    spec.base.validate();
    EvalDetail detail;
    const RandomStream root(spec.seed);
    RealizationRecord rec = evaluate_realization(spec.base, root.substream(0), true, &detail);
    if (!rec.ok)
        throw std::runtime_error("antenna-profile realization failed: " + rec.error);

    MonteCarloResult result;
    result.table.header = {"antenna", "ap", "conventional", "optimal", "rmt"};
    for (arma::uword n = 0; n < detail.p_conventional.n_elem; ++n)
        result.table.rows.push_back({u2s(n), u2s(detail.ap_of_antenna[n]),
                                     format_double(detail.p_conventional(n)),
                                     format_double(detail.p_optimal(n)),
                                     format_double(detail.p_rmt_expanded(n))});
    result.records.push_back(std::move(rec));
    return result;
}

MonteCarloResult run_subcarrier_sweep(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<SweepPoint> points;
    for (std::size_t i = 0; i < spec.q_values.size(); ++i) {
        SweepPoint pt;
        pt.cfg = spec.base;
        pt.cfg.num_subcarriers = spec.q_values[i];
        pt.key_cols = {{"q", u2s(spec.q_values[i])}};
        pt.original_index = i;
        try {
            pt.cfg.validate();
        } catch (const std::exception&) {
            pt.feasible = false;
        }
        points.push_back(std::move(pt));
    }
    return run_sweep(spec, std::move(points), true, {"q"});
}

MonteCarloResult run_load_sweep(const ExperimentSpec& spec) {
    spec.validate();
    const arma::uword m_uniform = spec.base.antenna_counts().front();
    std::vector<SweepPoint> points;
    arma::uword index = 0;
    for (arma::uword k : spec.k_values) {
        for (arma::uword l : spec.l_values) {
            SweepPoint pt;
            pt.cfg = spec.base;
            pt.cfg.num_users = k;
            pt.cfg.num_aps = l;
            pt.cfg.antennas_per_ap.assign(l, m_uniform);
            pt.key_cols = {{"k", u2s(k)}, {"l", u2s(l)}};
            pt.original_index = index++;
            try {
                pt.cfg.validate();
            } catch (const std::exception&) {
                pt.feasible = false; // e.g. more users than antennas
            }
            points.push_back(std::move(pt));
        }
    }
    return run_sweep(spec, std::move(points), false, {"k", "l"});
}

MonteCarloResult run_experiment(const ExperimentSpec& spec) {
    MonteCarloResult result;
    switch (spec.kind) {
    case ExperimentSpec::Kind::antenna_profile: result = run_antenna_profile(spec); break;
    case ExperimentSpec::Kind::subcarrier_sweep: result = run_subcarrier_sweep(spec); break;
    case ExperimentSpec::Kind::load_sweep: result = run_load_sweep(spec); break;
    }
    if (!spec.output_path.empty())
        write_output(spec, result);
    return result;
}

void write_output(const ExperimentSpec& spec, const MonteCarloResult& result) {
    std::ofstream csv(spec.output_path, std::ios::binary);
    if (!csv)
        throw std::runtime_error("cannot write '" + spec.output_path + "'");
    csv << result.table.to_string();
    csv.close();

    std::ofstream meta(spec.output_path + ".meta.txt");
    if (!meta)
        throw std::runtime_error("cannot write '" + spec.output_path + ".meta.txt'");
    const std::string cfg_json = config_to_json(spec.base);
    char digest[17];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(cfg_json.data(), cfg_json.size(),
                                                          fnv1a64(&spec.seed, sizeof(spec.seed)))));
    meta << "tool: cfmimo-sim " << kVersion << "\n";
    meta << "armadillo: " << arma::arma_version::as_string() << "\n";
    meta << "experiment: " << spec.kind_name() << "\n";
    meta << "seed: " << spec.seed << "\n";
    meta << "realizations: " << spec.realizations << "\n";
    meta << "config_digest: " << digest << "\n";
    meta << "config: " << cfg_json << "\n";
    if (!spec.q_values.empty()) {
        meta << "q_values:";
        for (arma::uword q : spec.q_values)
            meta << " " << q;
        meta << "\n";
    }
    if (!spec.k_values.empty()) {
        meta << "k_values:";
        for (arma::uword k : spec.k_values)
            meta << " " << k;
        meta << "\n";
    }
    if (!spec.l_values.empty()) {
        meta << "l_values:";
        for (arma::uword l : spec.l_values)
            meta << " " << l;
        meta << "\n";
    }
    meta << "points_skipped: " << result.skipped_points << "\n";
    meta << "records_excluded_unconverged: " << result.excluded_records << "\n";
    meta << "records_invariant_violations: " << result.violation_records << "\n";
    if (spec.kind == ExperimentSpec::Kind::antenna_profile && !result.records.empty()) {
        const RealizationRecord& rec = result.records.front();
        meta << "scenario_digest: " << rec.scenario_digest << "\n";
        for (const char* method : {"optimal", "rmt"}) {
            if (!rec.reports.count(method))
                continue;
            const ConsumptionReport& rep = rec.reports.at(method);
            meta << method << "_gain_net: " << format_double(rep.gain_net.value_or(0.0)) << "\n";
            meta << method << "_gain_pas: " << format_double(rep.gain_pas.value_or(0.0)) << "\n";
            meta << method << "_active_aps: " << rep.active_ap_count << "\n";
        }
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t basis) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = basis;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string scenario_digest(const Geometry& geom, const LargeScale& lsf,
                            const TargetProfile& targets) {
    std::uint64_t h = fnv1a64(geom.ap_positions.memptr(), geom.ap_positions.n_elem * sizeof(double));
    h = fnv1a64(geom.user_positions.memptr(), geom.user_positions.n_elem * sizeof(double), h);
    h = fnv1a64(lsf.beta.memptr(), lsf.beta.n_elem * sizeof(double), h);
    h = fnv1a64(targets.gamma.memptr(), targets.gamma.n_elem * sizeof(double), h);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

// Block-uniform expansion used by the validation battery.
arma::vec expand_uniform(const arma::vec& p_ap, const std::vector<arma::uword>& counts) {
    arma::uword n = 0;
    for (arma::uword m : counts)
        n += m;
    arma::vec p(n);
    arma::uword offset = 0;
    for (arma::uword l = 0; l < counts.size(); ++l) {
        p.subvec(offset, offset + counts[l] - 1).fill(p_ap(l));
        offset += counts[l];
    }
    return p;
}

RmtInput synthetic_rmt_input(RandomStream& rng) {
    RmtInput input;
    input.num_users = 3;
    input.q_count = 4;
    input.antennas_per_ap = {4, 5, 6};
    const double rho[] = {0.5, 0.7, 0.3};
    input.c.set_size(3);
    for (arma::uword l = 0; l < 3; ++l) {
        arma::vec d(input.num_users);
        for (auto& v : d)
            v = rng.uniform(0.5, 2.0);
        input.d_norm.push_back(d);
        arma::vec xi;
        arma::cx_mat vecs;
        arma::eig_sym(xi, vecs, exponential_correlation(input.antennas_per_ap[l], rho[l]));
        input.xi.push_back(xi);
        input.c(l) = static_cast<double>(input.num_users) /
                     static_cast<double>(input.antennas_per_ap[l]);
    }
    return input;
}

} // namespace

bool run_validation(const SystemConfig& cfg, std::uint64_t seed, std::ostream& log) {
    using Check = std::pair<std::string, std::function<std::string()>>;
    const RandomStream root(seed);

    std::vector<Check> checks;

    checks.emplace_back("scenario-reproducibility", [&]() -> std::string {
        RandomStream a = root.substream(1);
        RandomStream b = root.substream(1);
        const Geometry ga = generate_geometry(cfg, a);
        const Geometry gb = generate_geometry(cfg, b);
        const LargeScale la = compute_lsf(ga, cfg, a);
        const LargeScale lb = compute_lsf(gb, cfg, b);
        const TargetProfile ta = draw_targets(cfg, a);
        const TargetProfile tb = draw_targets(cfg, b);
        const bool same = arma::approx_equal(ga.ap_positions, gb.ap_positions, "absdiff", 0.0) &&
                          arma::approx_equal(ga.user_positions, gb.user_positions, "absdiff", 0.0) &&
                          arma::approx_equal(la.beta, lb.beta, "absdiff", 0.0) &&
                          arma::approx_equal(ta.gamma, tb.gamma, "absdiff", 0.0);
        return same ? "" : "identical seeds produced different scenarios";
    });

    checks.emplace_back("correlation-closed-form", [&]() -> std::string {
        const arma::cx_mat c2 = exponential_correlation(2, 0.7);
        if (std::abs(c2(0, 1).real() - 0.7) > 1e-15 || std::abs(c2(0, 0).real() - 1.0) > 1e-15)
            return "2x2 exponential correlation entries wrong";
        arma::vec xi;
        arma::eig_sym(xi, c2);
        if (std::abs(xi(0) - 0.3) > 1e-12 || std::abs(xi(1) - 1.7) > 1e-12)
            return "2x2 eigenvalues differ from {0.3, 1.7}";
        arma::vec xi8;
        arma::eig_sym(xi8, exponential_correlation(8, 0.7));
        if (std::abs(arma::accu(xi8) - 8.0) > 1e-10)
            return "eigenvalues do not sum to the antenna count";
        return "";
    });

    checks.emplace_back("gram-identity", [&]() -> std::string {
        RandomStream rng = root.substream(2);
        const arma::uword num_users = 3, q_count = 2;
        const std::vector<arma::uword> counts = {3, 4};
        const double rho[] = {0.6, 0.4};
        std::vector<arma::cx_mat> corr_mats;
        for (std::size_t l = 0; l < counts.size(); ++l)
            corr_mats.push_back(exponential_correlation(counts[l], rho[l]));
        const CorrelationSet corr = correlation_set_from_matrices(corr_mats);
        LargeScale lsf;
        lsf.beta.set_size(num_users, counts.size());
        for (auto& v : lsf.beta)
            v = rng.uniform(0.5, 1.5);
        arma::vec gamma(num_users);
        for (auto& v : gamma)
            v = rng.uniform(1.0, 10.0);
        const TargetProfile targets = make_targets(gamma, q_count);
        const double noise = 0.5;

        std::vector<std::vector<arma::cx_mat>> g(q_count);
        std::vector<std::vector<arma::cx_mat>> blocks(q_count);
        for (arma::uword q = 0; q < q_count; ++q) {
            for (std::size_t l = 0; l < counts.size(); ++l) {
                arma::cx_mat gl(num_users, counts[l]);
                for (auto& v : gl)
                    v = rng.cnormal();
                g[q].push_back(gl);
                arma::cx_mat blk = gl * corr.sqrt_c_ap[l];
                blk.each_col() %= arma::cx_vec(arma::sqrt(lsf.beta.col(l)),
                                               arma::vec(num_users, arma::fill::zeros));
                blocks[q].push_back(std::move(blk));
            }
        }
        const ChannelRealization ch = channel_from_blocks(blocks);
        const NormalizedChannel nch = normalize(ch, lsf, targets, noise);

        const arma::vec p_ap = {0.7, 1.9};
        const arma::vec p_half = arma::sqrt(expand_uniform(p_ap, counts));
        double worst = 0.0;
        for (arma::uword q = 0; q < q_count; ++q) {
            const arma::cx_mat lhs =
                nch.h_tilde[q] *
                arma::diagmat(arma::cx_vec(p_half, arma::vec(p_half.n_elem, arma::fill::zeros))) *
                nch.h_tilde[q].t();
            arma::cx_mat rhs(num_users, num_users, arma::fill::zeros);
            for (std::size_t l = 0; l < counts.size(); ++l) {
                const arma::cx_mat d_half(arma::diagmat(arma::sqrt(nch.d_norm[l])),
                                          arma::mat(num_users, num_users, arma::fill::zeros));
                rhs += std::sqrt(p_ap(l)) * d_half * g[q][l] * corr.c_ap[l] * g[q][l].t() * d_half;
            }
            worst = std::max(worst, arma::norm(lhs - rhs, "fro") / arma::norm(rhs, "fro"));
        }
        return worst <= 1e-12 ? "" : "blockwise Gram identity off by " + format_double(worst);
    });

    checks.emplace_back("realization-invariants", [&]() -> std::string {
        const RealizationRecord rec = evaluate_realization(cfg, root.substream(3), true, nullptr);
        if (rec.ok)
            return "";
        return rec.error;
    });

    checks.emplace_back("rmt-closed-form", [&]() -> std::string {
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
        if (std::abs(b(0) - 2.0) > 1e-10)
            return "b = " + format_double(b(0)) + ", expected 2";
        if (std::abs(aux.b_dot(0) - 8.0) > 1e-10)
            return "b_dot = " + format_double(aux.b_dot(0)) + ", expected 8";
        if (std::abs(pbar(0) - 0.0625) > 1e-10)
            return "pbar = " + format_double(pbar(0)) + ", expected 0.0625";
        return "";
    });

    checks.emplace_back("rmt-scale-invariance", [&]() -> std::string {
        RandomStream rng = root.substream(4);
        const RmtInput input = synthetic_rmt_input(rng);
        arma::vec p(input.num_aps());
        for (auto& v : p)
            v = rng.uniform(0.2, 3.0);
        const arma::vec base = pbar_map(input, p);
        for (double alpha : {0.1, 10.0}) {
            const arma::vec scaled = pbar_map(input, alpha * p);
            const double err = arma::abs(scaled - base).max() / base.max();
            if (err > 1e-12)
                return "pbar map moved by " + format_double(err) + " under scaling " +
                       format_double(alpha);
        }
        return "";
    });

    checks.emplace_back("consumption-arithmetic", [&]() -> std::string {
        AntennaPowerVector p;
        p.p = {1.0};
        p.active_mask = {1};
        const PaParams pa{3.0, 0.34};
        const double pas = pa_consumed_power(p, pa);
        if (std::abs(pas - std::sqrt(3.0) / 0.34) > 1e-12)
            return "PA consumption formula off";
        if (std::abs(pas - 5.0942670810849333) > 1e-12)
            return "PA consumption differs from 5.0942670810849333";
        AntennaPowerVector p8;
        p8.p = arma::vec(8, arma::fill::value(1.0 / 64.0));
        p8.active_mask = arma::uvec(8, arma::fill::ones);
        const ConsumptionReport rep =
            network_power(p8, ApPartition::from_counts({8}), pa, NetworkCosts{15.0, 0.7});
        const double expected = std::sqrt(3.0) / 0.34 + 15.0 + 0.7 * 8.0;
        if (std::abs(rep.p_net - expected) > 1e-12)
            return "network power differs from the closed form";
        if (std::abs(rep.p_net - 25.694) > 1e-3)
            return "network power differs from 25.694 W";
        return "";
    });

    checks.emplace_back("csv-determinism", [&]() -> std::string {
        ExperimentSpec spec = ExperimentSpec::subcarrier_sweep_default();
        spec.q_values = {1, 2};
        spec.realizations = 4;
        spec.seed = seed;
        spec.base.num_aps = 2;
        spec.base.antennas_per_ap.assign(2, 2);
        spec.base.num_users = 2;
        spec.base.num_subcarriers = 2;
        spec.workers = 1;
        const std::string serial = run_subcarrier_sweep(spec).table.to_string();
        spec.workers = 2;
        const std::string threaded = run_subcarrier_sweep(spec).table.to_string();
        return serial == threaded ? "" : "CSV bytes depend on the worker count";
    });

    bool all_ok = true;
    for (const auto& [name, fn] : checks) {
        std::string message;
        try {
            message = fn();
        } catch (const std::exception& e) {
            message = e.what();
        }
        const bool ok = message.empty();
        all_ok = all_ok && ok;
        log << (ok ? "[PASS] " : "[FAIL] ") << name;
        if (!ok)
            log << ": " << message;
        log << "\n";
    }
    return all_ok;
}

void parallel_for(arma::uword count, unsigned workers, const std::function<void(arma::uword)>& fn) {
    unsigned w = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
    if (count > 0)
        w = std::min<unsigned>(w, static_cast<unsigned>(std::min<arma::uword>(count, 1024)));
    if (w <= 1) {
        for (arma::uword i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<arma::uword> next{0};
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (arma::uword i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                    fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace cfmimo
