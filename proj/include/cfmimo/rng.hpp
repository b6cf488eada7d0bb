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

#ifndef CFMIMO_RNG_HPP
#define CFMIMO_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace cfmimo {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

// Deterministic random stream with explicit substream derivation.
//
// A stream is keyed by a 64-bit seed. substream(i) derives an independent
// stream from (seed, i) without touching the parent state, so work that is
// split across workers by realization index draws exactly the same numbers
// as a serial run. Distribution transforms are implemented here instead of
// using std:: distributions, which are not specified bit-exactly and differ
// between standard library implementations.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        engine_.seed(detail::splitmix64(s));
    }

    std::uint64_t seed() const { return seed_; }

    // Independent child stream; derivation depends only on (seed, index).
    RandomStream substream(std::uint64_t index) const {
        std::uint64_t s = seed_;
        std::uint64_t a = detail::splitmix64(s);
        s += 0x9E3779B97F4A7C15ULL * (index + 1);
        std::uint64_t b = detail::splitmix64(s);
        return RandomStream(a ^ b);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0)
            throw std::invalid_argument("uniform_index: n must be positive");
        const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r = engine_();
        while (r >= bound)
            r = engine_();
        return r % n;
    }

    // Standard normal via Box-Muller (the pair partner is cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0)
            u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Circularly-symmetric complex normal, unit variance (1/2 per component).
    std::complex<double> cnormal() {
        const double re = normal();
        const double im = normal();
        return {re * 0.70710678118654752440, im * 0.70710678118654752440};
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace cfmimo

#endif
