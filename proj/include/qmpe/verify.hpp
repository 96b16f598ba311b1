// Copyright 2026 The qmpe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qmpe/circuit.hpp"
#include "qmpe/phase.hpp"

namespace qmpe {

// Seeded equivalence batteries between the closed-form outcome law and the
// independent simulators (state vector, Kraus channel, NOON interferometer).

struct FailedCase {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    double deviation = 0.0;
};

struct BatteryResult {
    std::string name;
    std::size_t cases = 0;
    double tolerance = 0.0;
    double max_deviation = 0.0;
    double seconds = 0.0;
    std::vector<FailedCase> failures;

    bool passed() const { return failures.empty(); }
};

struct VerifyOptions {
    /// Size of the state-vector battery; the others use a fifth of it.
    std::size_t cases = 1000;
    std::uint64_t seed = 1;
    int max_d = 4;
    std::int64_t max_m = 1024;
    /// Testing hook: corrupt one closed-form value by 1e-6.
    bool inject_failure = false;
};

inline std::uint64_t derive_case_seed(std::uint64_t seed, int battery, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(battery), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(std::uint64_t{index} >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (std::uint64_t{words[0]} << 32) | words[1];
}

namespace detail {

inline double max_deviation(const std::vector<double> &a, const std::vector<double> &b) {
    if (a.size() != b.size()) return INFINITY;
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

struct RandomCase {
    int d;
    std::int64_t M;
    PhasePoint theta;
    std::vector<double> phi;
};

inline RandomCase draw_case(std::mt19937_64 &rng, std::size_t index, const VerifyOptions &opt) {
    RandomCase c;
    c.d = 1 + static_cast<int>(index % static_cast<std::size_t>(opt.max_d));
    c.M = std::uniform_int_distribution<std::int64_t>(1, opt.max_m)(rng);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    c.theta.resize(static_cast<std::size_t>(c.d));
    for (double &t : c.theta) t = angle(rng);
    c.phi.resize(static_cast<std::size_t>(c.d + 1));
    for (double &p : c.phi) p = angle(rng);
    return c;
}

/// Runs `n` cases of `check(rng, index) -> deviation` and collects failures.
template <typename F>
BatteryResult run_battery(std::string name, int id, std::size_t n, double tolerance, const VerifyOptions &opt,
                          F &&check) {
    BatteryResult res;
    res.name = std::move(name);
    res.cases = n;
    res.tolerance = tolerance;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t seed = derive_case_seed(opt.seed, id, i);
        std::mt19937_64 rng(seed);
        double dev = check(rng, i);
        if (opt.inject_failure && id == 0 && i == opt.seed % n) dev += 1e-6;
        res.max_deviation = std::max(res.max_deviation, dev);
        if (!(dev < tolerance)) res.failures.push_back({i, seed, dev});
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace detail

/// Closed form vs qudit state-vector simulation of the full circuit.
inline BatteryResult verify_state_vector(const VerifyOptions &opt) {
    return detail::run_battery("closed form vs state vector", 0, opt.cases, 1e-12, opt,
                               [&](std::mt19937_64 &rng, std::size_t i) {
                                   const auto c = detail::draw_case(rng, i, opt);
                                   const CircuitSpec spec(c.theta, c.phi, c.M);
                                   return detail::max_deviation(outcome_probabilities(spec),
                                                                simulate_circuit_probabilities(spec));
                               });
}

/// Damped closed form vs explicit Kraus dephasing of the ancilla state, with
/// Gamma_j M spread over [0, 3].
inline BatteryResult verify_kraus(const VerifyOptions &opt) {
    const std::size_t n = std::max<std::size_t>(1, opt.cases / 5);
    return detail::run_battery("noisy closed form vs Kraus channel", 1, n, 1e-10, opt,
                               [&](std::mt19937_64 &rng, std::size_t i) {
                                   const auto c = detail::draw_case(rng, i, opt);
                                   std::uniform_real_distribution<double> rate(0.0, 3.0 / static_cast<double>(c.M));
                                   NoiseModel noise;
                                   for (int j = 0; j < c.d; ++j) noise.gammas.push_back(rate(rng));
                                   const CircuitSpec spec(c.theta, c.phi, c.M);
                                   return detail::max_deviation(noisy_outcome_probabilities(spec, noise),
                                                                simulate_noisy_circuit_probabilities(spec, noise));
                               });
}

/// Gamma = 0 must reproduce the noiseless law bit for bit.
inline BatteryResult verify_noiseless_limit(const VerifyOptions &opt) {
    const std::size_t n = std::max<std::size_t>(1, opt.cases / 5);
    return detail::run_battery("zero dephasing vs noiseless law", 2, n, 1e-300, opt,
                               [&](std::mt19937_64 &rng, std::size_t i) {
                                   const auto c = detail::draw_case(rng, i, opt);
                                   const CircuitSpec spec(c.theta, c.phi, c.M);
                                   const NoiseModel zero{std::vector<double>(static_cast<std::size_t>(c.d), 0.0)};
                                   return detail::max_deviation(noisy_outcome_probabilities(spec, zero),
                                                                outcome_probabilities(spec));
                               });
}

/// NOON-state interferometer with control phases phi/M vs the closed form.
inline BatteryResult verify_noon(const VerifyOptions &opt) {
    const std::size_t n = std::max<std::size_t>(1, opt.cases / 5);
    return detail::run_battery("NOON interferometer vs closed form", 3, n, 1e-12, opt,
                               [&](std::mt19937_64 &rng, std::size_t i) {
                                   const auto c = detail::draw_case(rng, i, opt);
                                   std::vector<double> scaled = c.phi;
                                   for (double &p : scaled) p /= static_cast<double>(c.M);
                                   return detail::max_deviation(noon_outcome_probabilities(c.theta, scaled, c.M),
                                                                outcome_probabilities(CircuitSpec(c.theta, c.phi, c.M)));
                               });
}

inline std::vector<BatteryResult> run_verification(const VerifyOptions &opt) {
    return {verify_state_vector(opt), verify_kraus(opt), verify_noiseless_limit(opt), verify_noon(opt)};
}

}  // namespace qmpe
