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

#include "qmpe/protocol.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace qmpe;

namespace {

RunConfig noiseless_config(int d, double epsilon, int k_max, std::uint64_t seed) {
    RunConfig c;
    c.d = d;
    c.epsilon = epsilon;
    c.k_max = k_max;
    c.seed = seed;
    return c;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void expect_same_records(const RunResult &a, const RunResult &b) {
    ASSERT_EQ(a.rounds.size(), b.rounds.size());
    EXPECT_EQ(a.theta_true, b.theta_true);
    for (std::size_t r = 0; r < a.rounds.size(); ++r) {
        const auto &x = a.rounds[r];
        const auto &y = b.rounds[r];
        EXPECT_EQ(x.m, y.m);
        EXPECT_EQ(x.M, y.M);
        EXPECT_EQ(x.estimate, y.estimate);
        EXPECT_TRUE(x.covariance == y.covariance);
        EXPECT_EQ(x.p_half_final, y.p_half_final);
        ASSERT_EQ(x.outcomes.size(), y.outcomes.size());
        for (std::size_t i = 0; i < x.outcomes.size(); ++i) {
            EXPECT_EQ(x.outcomes[i].phi, y.outcomes[i].phi);
            EXPECT_EQ(x.outcomes[i].outcome, y.outcomes[i].outcome);
        }
    }
}

}  // namespace

TEST(UniformUnit, UsesTopFiftyThreeBits) {
    struct Fixed {
        std::uint64_t value;
        std::uint64_t operator()() const { return value; }
    };
    Fixed zero{0}, top{~std::uint64_t{0}}, half{std::uint64_t{1} << 63};
    EXPECT_EQ(uniform_unit(zero), 0.0);
    EXPECT_EQ(uniform_unit(half), 0.5);
    EXPECT_LT(uniform_unit(top), 1.0);
    EXPECT_EQ(uniform_unit(top), 1.0 - 0x1.0p-53);
}

TEST(SampleOutcome, CertainOutcome) {
    // theta = 0, phi = 0 puts all weight on outcome 0 for any M.
    std::mt19937_64 rng(1);
    for (int d = 1; d <= 3; ++d) {
        const PhasePoint theta(static_cast<std::size_t>(d), 0.0);
        const std::vector<double> phi(static_cast<std::size_t>(d + 1), 0.0);
        for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_outcome(rng, theta, phi, 1 + i % 7, {}), 0);
    }
}

TEST(SampleOutcome, FrequencyMatchesOutcomeLaw) {
    std::mt19937_64 rng(2);
    const int draws = 100000;
    int zeros = 0;
    for (int i = 0; i < draws; ++i) zeros += sample_outcome(rng, {kPi / 2.0}, {0.0, 0.0}, 1, {}) == 0;
    EXPECT_NEAR(static_cast<double>(zeros) / draws, 0.5, 0.01);
}

TEST(SampleOutcome, ThreeOutcomeFrequencies) {
    std::mt19937_64 rng(5);
    const PhasePoint theta{0.4, 2.0};
    const std::vector<double> phi{0.1, 1.1, 3.0};
    const auto p = outcome_probabilities(CircuitSpec(theta, phi, 3));
    const int draws = 200000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < draws; ++i) ++counts[sample_outcome(rng, theta, phi, 3, {})];
    for (int o = 0; o < 3; ++o) {
        const double sd = std::sqrt(p[o] * (1 - p[o]) / draws);
        EXPECT_NEAR(static_cast<double>(counts[o]) / draws, p[o], 5 * sd);
    }
}

TEST(SampleOutcome, DeterministicGivenSeed) {
    std::mt19937_64 a(99), b(99);
    const std::vector<double> phi{0.3, 2.0, 5.0};
    for (int i = 0; i < 500; ++i) {
        EXPECT_EQ(sample_outcome(a, {1.0, 2.0}, phi, 4, NoiseModel{{0.01, 0.02}}),
                  sample_outcome(b, {1.0, 2.0}, phi, 4, NoiseModel{{0.01, 0.02}}));
    }
}

TEST(RoundRepetitions, NoiselessDoubling) {
    EXPECT_EQ(round_repetitions(0, {}), 1);
    EXPECT_EQ(round_repetitions(4, {}), 16);
    EXPECT_EQ(round_repetitions(20, {}), std::int64_t{1} << 20);
}

TEST(RoundRepetitions, CappedByStrongestDephasing) {
    const NoiseModel noise{{0.02, 0.01}};
    EXPECT_EQ(round_repetitions(10, noise), 50);
    EXPECT_EQ(round_repetitions(5, noise), 32);
    EXPECT_EQ(round_repetitions(6, noise), 50);
    EXPECT_EQ(round_repetitions(3, NoiseModel{{5.0}}), 1);
    EXPECT_EQ(round_repetitions(3, NoiseModel{{0.0, 0.3}}), 3);
}

TEST(RunRound, LooseThresholdNeedsOneMeasurement) {
    auto config = noiseless_config(1, 0.5, 4, 3);
    auto state = start_run(config);
    // Concentrate the posterior near the truth first.
    for (int i = 0; i < 3; ++i) run_round(state, config);
    const auto rec = run_round(state, config);
    EXPECT_EQ(rec.k, 3);
    EXPECT_EQ(rec.M, 8);
    EXPECT_EQ(rec.m, 1);
    EXPECT_GT(rec.p_half_final, 0.5);
}

TEST(RunRound, RecordsRoundDataAndCuts) {
    auto config = noiseless_config(2, 1e-2, 6, 11);
    auto state = start_run(config);
    const auto rec = run_round(state, config);
    EXPECT_EQ(rec.k, 0);
    EXPECT_EQ(rec.M, 1);
    EXPECT_EQ(static_cast<std::int64_t>(rec.outcomes.size()), rec.m);
    EXPECT_EQ(rec.cumulative_resources, rec.m);
    EXPECT_GT(rec.p_half_final, 1.0 - config.epsilon);
    EXPECT_EQ(state.k, 1);
    EXPECT_FALSE(state.grid.wraps());
    EXPECT_NEAR(state.grid.side(), kPi, 1e-15);
    EXPECT_NEAR(state.grid.center(0), rec.estimate[0], 1e-15);
    EXPECT_EQ(rec.covariance.rows(), 2);
    EXPECT_THROW(
        {
            state.k = config.k_max;
            run_round(state, config);
        },
        Error);
}

TEST(RunRound, NoisyRoundUsesCappedRepetitions) {
    auto config = noiseless_config(2, 1e-2, 11, 4);
    config.noise = NoiseModel{{0.02, 0.01}};
    config.m_max = 100000;
    const auto result = run_estimation(config);
    ASSERT_EQ(result.rounds.size(), 11u);
    for (const auto &r : result.rounds) EXPECT_EQ(r.M, std::min<std::int64_t>(std::int64_t{1} << r.k, 50));
}

TEST(RunRound, ObserverSeesEveryUpdateAndCut) {
    auto config = noiseless_config(1, 1e-2, 5, 6);
    int updates = 0, cuts = 0;
    const auto result = run_estimation(config, [&](GridEvent e, const PosteriorGrid &g) {
        (e == GridEvent::update ? updates : cuts)++;
        EXPECT_NEAR(g.mass(), 1.0, 1e-9);
    });
    std::int64_t total_m = 0;
    for (const auto &r : result.rounds) total_m += r.m;
    EXPECT_EQ(updates, total_m);
    EXPECT_EQ(cuts, 5);
}

TEST(RunEstimation, SingleRound) {
    const auto result = run_estimation(noiseless_config(1, 0.9, 1, 1));
    ASSERT_EQ(result.rounds.size(), 1u);
    EXPECT_GE(result.rounds[0].m, 1);
    EXPECT_EQ(total_resources(result.rounds), result.rounds[0].m);
}

TEST(RunEstimation, FixedTruthIsReduced) {
    auto config = noiseless_config(2, 1e-2, 3, 1);
    config.theta_true = PhasePoint{-0.5, 7.0};
    const auto result = run_estimation(config);
    EXPECT_NEAR(result.theta_true[0], kTwoPi - 0.5, 1e-15);
    EXPECT_NEAR(result.theta_true[1], 7.0 - kTwoPi, 1e-15);
}

TEST(RunEstimation, RejectsInvalidConfig) {
    auto bad = noiseless_config(1, 0.0, 5, 0);
    EXPECT_THROW(run_estimation(bad), Error);
    bad.epsilon = 1.0;
    EXPECT_THROW(run_estimation(bad), Error);
    bad = noiseless_config(1, 0.1, 0, 0);
    EXPECT_THROW(run_estimation(bad), Error);
    bad = noiseless_config(1, 0.1, 5, 0);
    bad.m_max = 0;
    EXPECT_THROW(run_estimation(bad), Error);
    bad = noiseless_config(2, 0.1, 5, 0);
    bad.noise = NoiseModel{{0.1}};
    EXPECT_THROW(run_estimation(bad), Error);
    bad.noise = {};
    bad.grid_points = 4;
    EXPECT_THROW(run_estimation(bad), Error);
}

TEST(RunEstimation, FinalErrorWithinLastRoundResolution) {
    const int runs = 200;
    int within = 0;
    for (int s = 0; s < runs; ++s) {
        const auto result = run_estimation(noiseless_config(1, 1e-3, 14, 1000 + s));
        ASSERT_FALSE(result.aborted);
        const double err = std::abs(wrap_difference(result.final_estimate()[0] - result.theta_true[0]));
        within += err < kTwoPi / 8192.0;
    }
    EXPECT_GE(within, 0.95 * runs);
}

TEST(RunEstimation, OverwhelmingNoiseDoesNotCrash) {
    auto config = noiseless_config(2, 1e-3, 4, 21);
    config.noise = NoiseModel{{20.0, 30.0}};
    config.m_max = 40;
    const auto result = run_estimation(config);
    EXPECT_FALSE(result.aborted) << result.flag_reason;
    ASSERT_EQ(result.rounds.size(), 4u);
    EXPECT_TRUE(result.stalled());
    EXPECT_TRUE(result.flagged());
    for (const auto &r : result.rounds) {
        EXPECT_TRUE(r.stalled);
        EXPECT_EQ(r.M, 1);
        EXPECT_EQ(r.m, 40);
    }
    // The first-round posterior stays essentially uniform on the torus.
    EXPECT_NEAR(result.rounds[0].covariance(0, 0), 2.0, 0.05);
    EXPECT_NEAR(result.rounds[0].covariance(1, 1), 2.0, 0.05);
}

TEST(RunEstimation, AliasedPosteriorStallsInsteadOfAborting) {
    // Truth just outside the round-1 domain: the round-2 posterior splits
    // across both domain edges and its circular mean falls between them.
    auto config = noiseless_config(1, 0.03, 6, 5468422682682253051ull);
    const auto result = run_estimation(config);
    EXPECT_FALSE(result.aborted) << result.flag_reason;
    ASSERT_EQ(result.rounds.size(), 6u);
    EXPECT_TRUE(result.rounds[2].stalled);
    EXPECT_GT(result.rounds[2].p_half_final, 0.0);
    EXPECT_TRUE(result.any_error());
}

TEST(RunEstimation, ReproducibleUnderFixedSeed) {
    for (int d = 1; d <= 3; ++d) {
        auto config = noiseless_config(d, 1e-2, 6, 77 + d);
        if (d == 2) config.noise = NoiseModel{{0.05, 0.01}};
        expect_same_records(run_estimation(config), run_estimation(config));
    }
}

TEST(RunEstimation, DifferentSeedsDiffer) {
    const auto a = run_estimation(noiseless_config(1, 1e-2, 4, 1));
    const auto b = run_estimation(noiseless_config(1, 1e-2, 4, 2));
    EXPECT_NE(a.theta_true, b.theta_true);
}

TEST(TotalResources, SumsMeasurementsTimesRepetitions) {
    std::vector<RoundRecord> recs(3);
    for (int k = 0; k < 3; ++k) {
        recs[k].k = k;
        recs[k].M = std::int64_t{1} << k;
        recs[k].m = 1;
    }
    EXPECT_EQ(total_resources(recs), 7);
    recs.resize(25);
    for (int k = 0; k < 25; ++k) {
        recs[k].M = std::int64_t{1} << k;
        recs[k].m = 3;
    }
    EXPECT_EQ(total_resources(recs), 3 * ((std::int64_t{1} << 25) - 1));
    std::vector<RoundRecord> capped(2);
    capped[0].M = 32;
    capped[0].m = 4;
    capped[1].M = 50;
    capped[1].m = 10;
    EXPECT_EQ(total_resources(capped), 628);
    EXPECT_THROW(total_resources({}), Error);
}

TEST(Invariants, ResourcesGrowGeometricallyAndMatchRecords) {
    for (int s = 0; s < 20; ++s) {
        const auto result = run_estimation(noiseless_config(1 + s % 3, 1e-2, 8, 300 + s));
        ASSERT_FALSE(result.aborted);
        std::int64_t running = 0;
        for (const auto &r : result.rounds) {
            running += r.m * r.M;
            EXPECT_EQ(r.cumulative_resources, running);
            EXPECT_GE(r.cumulative_resources, std::int64_t{1} << r.k);
        }
        EXPECT_EQ(total_resources(result.rounds), running);
    }
}

TEST(Invariants, MeasurementsPerRoundStayBounded) {
    std::vector<double> early, late;
    for (int s = 0; s < 100; ++s) {
        const auto result = run_estimation(noiseless_config(1, 1e-3, 14, 500 + s));
        for (const auto &r : result.rounds) {
            if (r.k <= 5) early.push_back(static_cast<double>(r.m));
            if (r.k >= 5) late.push_back(static_cast<double>(r.m));
        }
    }
    EXPECT_LE(median(late), 3.0 * median(early));
}

TEST(Invariants, TruthContainmentBoundsFinalError) {
    const int k_max = 10;
    int checked = 0;
    for (int s = 0; s < 60; ++s) {
        const int d = 1 + s % 2;
        const auto result = run_estimation(noiseless_config(d, 1e-2, k_max, 900 + s));
        bool all_in = true;
        for (const auto &r : result.rounds) all_in = all_in && r.truth_in_c;
        if (!all_in) continue;
        ++checked;
        const double cell = kPi / std::ldexp(1.0, k_max - 1) / default_grid_points(d);
        for (int j = 0; j < d; ++j) {
            const double err = std::abs(wrap_difference(result.final_estimate()[j] - result.theta_true[j]));
            EXPECT_LE(err, kPi / std::ldexp(1.0, k_max) + cell);
        }
    }
    EXPECT_GT(checked, 40);
}

TEST(ContainsTruth, NearestImage) {
    EXPECT_TRUE(contains_truth({0.01}, {kTwoPi - 0.01}, 0));
    EXPECT_TRUE(contains_truth({-0.2}, {kTwoPi - 0.1}, 3));
    EXPECT_FALSE(contains_truth({1.0}, {1.0 + kPi / 2.0 + 1e-9}, 0));
    EXPECT_FALSE(contains_truth({1.0, 1.0}, {1.0, 1.3}, 3));
}
