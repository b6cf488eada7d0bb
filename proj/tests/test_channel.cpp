// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <sstream>

#include "cfmimo/channel.hpp"

using namespace cfmimo;

namespace {

LargeScale flat_lsf(arma::uword num_users, arma::uword num_aps, double beta) {
    LargeScale lsf;
    lsf.beta.set_size(num_users, num_aps);
    lsf.beta.fill(beta);
    lsf.shadow_db.zeros(num_users, num_aps);
    return lsf;
}

CorrelationSet identity_corr(const std::vector<arma::uword>& counts) {
    std::vector<arma::cx_mat> mats;
    for (arma::uword m : counts)
        mats.push_back(exponential_correlation(m, 0.0));
    return correlation_set_from_matrices(mats);
}

} // namespace

TEST_SUITE_BEGIN("channel");

TEST_CASE("uncorrelated unit-gain channel has unit entry variance") {
    const LargeScale lsf = flat_lsf(2, 1, 1.0);
    const CorrelationSet corr = identity_corr({2});
    RandomStream rng(1);
    const ChannelRealization ch = draw_channel(lsf, corr, 5000, rng);
    double sum2 = 0.0;
    arma::uword count = 0;
    for (const auto& hq : ch.h) {
        sum2 += arma::accu(arma::square(arma::abs(hq)));
        count += hq.n_elem;
    }
    CHECK(sum2 / count == doctest::Approx(1.0).epsilon(0.05));
    CHECK(ch.rank_redraws == 0);
}

TEST_CASE("transmit-side sample covariance approaches the correlation matrix") {
    const arma::uword m = 2, draws = 10000;
    LargeScale lsf = flat_lsf(2, 1, 1.0);
    std::vector<arma::cx_mat> mats = {exponential_correlation(m, 0.7)};
    const CorrelationSet corr = correlation_set_from_matrices(mats);
    RandomStream rng(2);
    const ChannelRealization ch = draw_channel(lsf, corr, draws, rng);
    arma::cx_mat acc(m, m, arma::fill::zeros);
    for (const auto& hq : ch.h)
        acc += hq.t() * hq;
    acc /= static_cast<double>(draws * ch.num_users());
    for (arma::uword i = 0; i < m; ++i)
        for (arma::uword j = 0; j < m; ++j)
            CHECK(std::abs(acc(i, j) - corr.c_ap[0](i, j)) < 0.05);
}

TEST_CASE("large-scale gain scales row variance") {
    const LargeScale lsf = flat_lsf(2, 1, 4.0);
    const CorrelationSet corr = identity_corr({2});
    RandomStream rng(3);
    const ChannelRealization ch = draw_channel(lsf, corr, 5000, rng);
    double sum2 = 0.0;
    arma::uword count = 0;
    for (const auto& hq : ch.h) {
        sum2 += arma::accu(arma::square(arma::abs(hq)));
        count += hq.n_elem;
    }
    CHECK(sum2 / count == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("aggregated matrix is the concatenation of the per-AP blocks") {
    RandomStream rng(4);
    std::vector<std::vector<arma::cx_mat>> blocks(3);
    for (auto& per_ap : blocks) {
        for (arma::uword m : {2, 3}) {
            arma::cx_mat blk(2, m);
            for (auto& v : blk)
                v = rng.cnormal();
            per_ap.push_back(blk);
        }
    }
    const ChannelRealization ch = channel_from_blocks(blocks);
    CHECK(ch.num_antennas() == 5);
    CHECK(ch.num_subcarriers() == 3);
    for (arma::uword q = 0; q < 3; ++q) {
        CHECK(arma::norm(ch.ap_block(q, 0) - blocks[q][0], "fro") == 0.0);
        CHECK(arma::norm(ch.ap_block(q, 1) - blocks[q][1], "fro") == 0.0);
    }
}

TEST_CASE("normalization scales rows by the target profile") {
    const arma::uword num_users = 3, q_count = 4;
    const LargeScale lsf = flat_lsf(num_users, 1, 1.0);
    const CorrelationSet corr = identity_corr({6});
    RandomStream rng(5);
    const ChannelRealization ch = draw_channel(lsf, corr, q_count, rng);

    // gamma_k = Q and unit noise leave the channel untouched.
    const TargetProfile unit = make_targets(arma::vec(num_users, arma::fill::value(4.0)), 4);
    const NormalizedChannel nch = normalize(ch, lsf, unit, 1.0);
    for (arma::uword q = 0; q < q_count; ++q)
        CHECK(arma::norm(nch.h_tilde[q] - ch.h[q], "fro") < 1e-14);

    // K users at gamma = 4 Q halve... gamma/Q = 4 means scaling by 1/2.
    const TargetProfile quad = make_targets(arma::vec(num_users, arma::fill::value(16.0)), 4);
    const NormalizedChannel half = normalize(ch, lsf, quad, 1.0);
    for (arma::uword q = 0; q < q_count; ++q)
        CHECK(arma::norm(half.h_tilde[q] - 0.5 * ch.h[q], "fro") < 1e-14);

    // d_norm identity: d_norm * sigma^2 * (gamma/Q) recovers beta exactly.
    RandomStream rng2(6);
    arma::vec gamma(num_users);
    for (auto& g : gamma)
        g = rng2.uniform(1.0, 100.0);
    const TargetProfile t = make_targets(gamma, 16);
    const double noise = 3.7e-3;
    LargeScale rich = flat_lsf(num_users, 1, 1.0);
    for (auto& b : rich.beta)
        b = rng2.uniform(1e-12, 1e-8);
    const ChannelRealization ch2 = draw_channel(rich, corr, 2, rng2);
    const NormalizedChannel n2 = normalize(ch2, rich, t, noise);
    for (arma::uword k = 0; k < num_users; ++k)
        CHECK(n2.d_norm[0](k) * noise * t.d_tilde_gamma(k) ==
              doctest::Approx(rich.beta(k, 0)).epsilon(1e-14));
}

TEST_CASE("normalization rejects invalid inputs") {
    const LargeScale lsf = flat_lsf(2, 1, 1.0);
    const CorrelationSet corr = identity_corr({3});
    RandomStream rng(7);
    const ChannelRealization ch = draw_channel(lsf, corr, 1, rng);
    const TargetProfile t = make_targets(arma::vec{1.0, 2.0}, 1);
    CHECK_THROWS_AS(normalize(ch, lsf, t, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(normalize(ch, lsf, make_targets(arma::vec{1.0}, 1), 1.0),
                    std::invalid_argument);
}

TEST_CASE("blockwise Gram identity holds to machine precision") {
    RandomStream rng(8);
    const arma::uword num_users = 3, q_count = 2;
    const std::vector<arma::uword> counts = {3, 4};
    std::vector<arma::cx_mat> mats = {exponential_correlation(3, 0.6),
                                      exponential_correlation(4, 0.4)};
    const CorrelationSet corr = correlation_set_from_matrices(mats);
    LargeScale lsf = flat_lsf(num_users, 2, 1.0);
    for (auto& b : lsf.beta)
        b = rng.uniform(0.5, 1.5);
    arma::vec gamma(num_users);
    for (auto& g : gamma)
        g = rng.uniform(1.0, 10.0);
    const TargetProfile targets = make_targets(gamma, q_count);
    const double noise = 0.25;

    std::vector<std::vector<arma::cx_mat>> g_draws(q_count);
    std::vector<std::vector<arma::cx_mat>> blocks(q_count);
    for (arma::uword q = 0; q < q_count; ++q) {
        for (arma::uword l = 0; l < counts.size(); ++l) {
            arma::cx_mat g(num_users, counts[l]);
            for (auto& v : g)
                v = rng.cnormal();
            g_draws[q].push_back(g);
            arma::cx_mat blk = g * corr.sqrt_c_ap[l];
            blk.each_col() %= arma::cx_vec(arma::sqrt(lsf.beta.col(l)),
                                           arma::vec(num_users, arma::fill::zeros));
            blocks[q].push_back(std::move(blk));
        }
    }
    const ChannelRealization ch = channel_from_blocks(blocks);
    const NormalizedChannel nch = normalize(ch, lsf, targets, noise);

    const arma::vec p_ap = {0.4, 2.3};
    arma::vec p_half(ch.num_antennas());
    p_half.subvec(0, 2).fill(std::sqrt(p_ap(0)));
    p_half.subvec(3, 6).fill(std::sqrt(p_ap(1)));
    for (arma::uword q = 0; q < q_count; ++q) {
        const arma::cx_mat lhs =
            nch.h_tilde[q] *
            arma::diagmat(arma::cx_vec(p_half, arma::vec(p_half.n_elem, arma::fill::zeros))) *
            nch.h_tilde[q].t();
        arma::cx_mat rhs(num_users, num_users, arma::fill::zeros);
        for (arma::uword l = 0; l < counts.size(); ++l) {
            const arma::cx_mat d_half(arma::diagmat(arma::sqrt(nch.d_norm[l])),
                                      arma::mat(num_users, num_users, arma::fill::zeros));
            rhs += std::sqrt(p_ap(l)) * d_half * g_draws[q][l] * corr.c_ap[l] * g_draws[q][l].t() *
                   d_half;
        }
        CHECK(arma::norm(lhs - rhs, "fro") / arma::norm(rhs, "fro") < 1e-12);
    }
}

TEST_CASE("binary snapshot round trip") {
    const LargeScale lsf = flat_lsf(2, 2, 1.0);
    const CorrelationSet corr = identity_corr({2, 3});
    RandomStream rng(9);
    const ChannelRealization ch = draw_channel(lsf, corr, 3, rng);

    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    dump_channel(ch, buf);
    const ChannelRealization back = load_channel(buf);

    CHECK(back.num_aps() == ch.num_aps());
    CHECK(back.num_users() == ch.num_users());
    CHECK(back.num_subcarriers() == ch.num_subcarriers());
    CHECK(back.antennas_per_ap == ch.antennas_per_ap);
    for (arma::uword q = 0; q < 3; ++q) {
        // Storage is float32 pairs, so agreement is at single precision.
        CHECK(arma::abs(back.h[q] - ch.h[q]).max() < 1e-6 * arma::abs(ch.h[q]).max());
    }

    // A second dump of the loaded realization is bit-identical.
    std::stringstream buf2(std::ios::in | std::ios::out | std::ios::binary);
    dump_channel(back, buf2);
    std::stringstream buf3(std::ios::in | std::ios::out | std::ios::binary);
    dump_channel(load_channel(buf2), buf3);
    CHECK(buf2.str() == buf3.str());

    std::stringstream bad(std::ios::in | std::ios::out | std::ios::binary);
    bad << "NOPE";
    CHECK_THROWS_AS(load_channel(bad), std::runtime_error);
}

TEST_SUITE_END();
