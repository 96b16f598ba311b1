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

#include "qmpe/circuit.hpp"
#include "qmpe/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "test_util.hpp"

using namespace qmpe;
using qmpe::testing::max_abs_diff;
using qmpe::testing::random_noise;
using qmpe::testing::random_spec;

namespace {

double sum(const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0); }

DensityMatrix random_density_matrix(std::mt19937_64 &rng, int n) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXcd a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
    }
    DensityMatrix rho = a * a.adjoint();
    return rho / rho.trace();
}

}  // namespace

TEST(Hadamard, QubitCaseIsStandardHadamard) {
    const GateMatrix h = hadamard_matrix(1);
    const double s = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(h(0, 0) - s), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(h(0, 1) - s), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(h(1, 0) - s), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(h(1, 1) + s), 0.0, 1e-15);
}

TEST(Hadamard, UnitaryUpToDimensionSeven) {
    for (int d = 1; d <= 6; ++d) {
        const GateMatrix h = hadamard_matrix(d);
        EXPECT_LT(detail::max_unitarity_defect(h), 1e-12) << "d=" << d;
    }
}

TEST(Hadamard, RejectsZeroPhases) {
    try {
        hadamard_matrix(0);
        FAIL() << "expected an error";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_dimension);
    }
}

TEST(MultiportBeamSplitter, TritterMatchesLiteralMatrixAndHadamard) {
    const Complex w = std::polar(1.0, kTwoPi / 3.0);
    Eigen::MatrixXcd expected(3, 3);
    expected << 1.0, 1.0, 1.0, 1.0, w, w * w, 1.0, w * w, w;
    expected /= std::sqrt(3.0);
    const GateMatrix bs = multiport_bs_matrix(2, 0.0);
    EXPECT_LT((bs - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((bs - hadamard_matrix(2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MultiportBeamSplitter, QuarterAtQuarterTurnIsExactlyH4) {
    const GateMatrix quarter = multiport_bs_matrix(3, kPi / 2.0);
    const GateMatrix h4 = hadamard_matrix(3);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            EXPECT_EQ(quarter(i, j).real(), h4(i, j).real()) << i << "," << j;
            EXPECT_EQ(quarter(i, j).imag(), h4(i, j).imag()) << i << "," << j;
        }
    }
}

TEST(MultiportBeamSplitter, QuarterUnitaryForAnyGamma) {
    for (double gamma : {0.0, 0.7, 1.9, -2.5}) {
        EXPECT_LT(detail::max_unitarity_defect(multiport_bs_matrix(3, gamma)), 1e-12) << gamma;
    }
    EXPECT_TRUE(multiport_bs_matrix(5, 0.3) == hadamard_matrix(5));
}

TEST(OutcomeProbabilities, ZeroPhasesInterfereIntoOutcomeZero) {
    for (std::int64_t m : {1, 7, 1024}) {
        const auto p = outcome_probabilities(CircuitSpec({0.0, 0.0}, {0.0, 0.0, 0.0}, m));
        EXPECT_NEAR(p[0], 1.0, 1e-14);
        EXPECT_NEAR(p[1], 0.0, 1e-14);
        EXPECT_NEAR(p[2], 0.0, 1e-14);
    }
}

TEST(OutcomeProbabilities, QubitPiPhaseGivesOutcomeOne) {
    const auto p = outcome_probabilities(CircuitSpec({kPi}, {0.0, 0.0}, 1));
    EXPECT_NEAR(p[0], 0.0, 1e-15);
    EXPECT_NEAR(p[1], 1.0, 1e-15);
}

TEST(OutcomeProbabilities, NormalizedAndBoundedOverWideRange) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        const int d = 1 + trial % 6;
        const auto spec = random_spec(rng, d, std::int64_t{1} << 20);
        const auto noise = random_noise(rng, d, 0.05);
        for (const auto &p : {outcome_probabilities(spec), noisy_outcome_probabilities(spec, noise)}) {
            EXPECT_NEAR(sum(p), 1.0, 1e-12);
            for (double x : p) {
                EXPECT_GE(x, -1e-14);
                EXPECT_LE(x, 1.0 + 1e-14);
            }
        }
    }
}

TEST(OutcomeProbabilities, OracleNormalizedAndBoundedUpToSixPhases) {
    std::mt19937_64 rng(12);
    for (int d = 1; d <= 6; ++d) {
        for (int trial = 0; trial < (d == 6 ? 1 : 3); ++trial) {
            const auto spec = random_spec(rng, d, std::int64_t{1} << 20);
            for (const auto &p : {simulate_circuit_probabilities(spec),
                                  simulate_noisy_circuit_probabilities(spec, random_noise(rng, d, 1e-5))}) {
                EXPECT_NEAR(sum(p), 1.0, 1e-12) << "d=" << d;
                for (double x : p) {
                    EXPECT_GE(x, -1e-14);
                    EXPECT_LE(x, 1.0 + 1e-14);
                }
            }
        }
    }
}

TEST(OutcomeProbabilities, PeriodicInEachPhaseWithPeriodTwoPiOverM) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 300; ++trial) {
        const int d = 1 + trial % 4;
        const auto spec = random_spec(rng, d, 256);
        const auto base = outcome_probabilities(spec);
        for (int j = 0; j < d; ++j) {
            auto theta = spec.theta();
            theta[j] += kTwoPi / static_cast<double>(spec.repetitions());
            const auto shifted = outcome_probabilities(CircuitSpec(theta, spec.phi(), spec.repetitions()));
            EXPECT_LT(max_abs_diff(base, shifted), 1e-12);
        }
    }
}

TEST(OutcomeProbabilities, DependsOnlyOnControlPhaseDifferences) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const auto spec = random_spec(rng, 3, 64);
        auto phi = spec.phi();
        const double shift = phi[0];
        for (double &p : phi) p -= shift;
        EXPECT_LT(max_abs_diff(outcome_probabilities(spec),
                               outcome_probabilities(CircuitSpec(spec.theta(), phi, spec.repetitions()))),
                  1e-12);
    }
}

TEST(CircuitSpec, ReducesPhasesAndValidates) {
    const CircuitSpec spec({kTwoPi + 0.5, -0.25}, {7.0, 0.0, -1.0}, 3);
    EXPECT_NEAR(spec.theta()[0], 0.5, 1e-14);
    EXPECT_NEAR(spec.theta()[1], kTwoPi - 0.25, 1e-14);
    EXPECT_NEAR(spec.phi()[0], 7.0 - kTwoPi, 1e-14);
    EXPECT_THROW(CircuitSpec({0.1}, {0.0, 0.0}, 0), Error);
    EXPECT_THROW(CircuitSpec({0.1}, {0.0}, 1), Error);
    EXPECT_THROW(CircuitSpec({}, {0.0}, 1), Error);
}

TEST(StateVectorOracle, QubitZeroPhase) {
    const auto p = simulate_circuit_probabilities(CircuitSpec({0.0}, {0.0, 0.0}, 1));
    EXPECT_NEAR(p[0], 1.0, 1e-15);
    EXPECT_NEAR(p[1], 0.0, 1e-15);
}

TEST(StateVectorOracle, MatchesClosedFormOnThousandRandomSpecs) {
    std::mt19937_64 rng(21);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + trial % 4;
        const auto spec = random_spec(rng, d, 1024);
        const auto oracle = simulate_circuit(spec);
        worst = std::max(worst, max_abs_diff(oracle.probabilities, outcome_probabilities(spec)));
        EXPECT_LT(std::abs(oracle.register_infidelity), 1e-12);
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(StateVectorOracle, BasisIndependentUnderConjugation) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 3;
        const auto spec = random_spec(rng, d, 512);
        OracleOptions conj;
        conj.basis = RegisterBasis::conjugated;
        conj.seed = 1000 + static_cast<std::uint64_t>(trial);
        const auto a = simulate_circuit(spec);
        const auto b = simulate_circuit(spec, conj);
        EXPECT_LT(max_abs_diff(a.probabilities, b.probabilities), 1e-10);
        EXPECT_LT(std::abs(b.register_infidelity), 1e-10);
    }
}

TEST(StateVectorOracle, RepeatedApplicationEqualsSinglePower) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const int d = 1 + trial % 3;
        const auto spec = random_spec(rng, d, 40);
        OracleOptions repeated;
        repeated.repeated_application = true;
        repeated.basis = trial % 2 ? RegisterBasis::conjugated : RegisterBasis::diagonal;
        repeated.seed = 5;
        EXPECT_LT(max_abs_diff(simulate_circuit_probabilities(spec, repeated), outcome_probabilities(spec)), 1e-11);
    }
}

TEST(NoisyProbabilities, ZeroRatesReduceToIdeal) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 4;
        const auto spec = random_spec(rng, d, 1 << 12);
        NoiseModel zero;
        zero.gammas.assign(static_cast<std::size_t>(d), 0.0);
        EXPECT_EQ(noisy_outcome_probabilities(spec, zero), outcome_probabilities(spec));
        EXPECT_EQ(noisy_outcome_probabilities(spec, NoiseModel{}), outcome_probabilities(spec));
    }
}

TEST(NoisyProbabilities, StrongDephasingGivesWhiteNoise) {
    std::mt19937_64 rng(32);
    for (int d = 1; d <= 4; ++d) {
        const auto spec = random_spec(rng, d, 100);
        NoiseModel noise;
        noise.gammas.assign(static_cast<std::size_t>(d), 50.0 / static_cast<double>(spec.repetitions()));
        for (double p : noisy_outcome_probabilities(spec, noise)) EXPECT_NEAR(p, 1.0 / (d + 1), 1e-12);
    }
}

TEST(NoisyProbabilities, MatchesKrausChannelSimulation) {
    const CircuitSpec spec({1.1, 4.2}, {0.3, 2.0, 5.1}, 16);
    NoiseModel noise{{0.02, 0.01}};
    EXPECT_LT(max_abs_diff(noisy_outcome_probabilities(spec, noise), simulate_noisy_circuit_probabilities(spec, noise)),
              1e-10);

    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 4;
        const auto s = random_spec(rng, d, 256);
        const auto n = random_noise(rng, d, 0.05);
        EXPECT_LT(max_abs_diff(noisy_outcome_probabilities(s, n), simulate_noisy_circuit_probabilities(s, n)), 1e-10);
    }
}

TEST(NoisyProbabilities, RejectsNegativeRates) {
    const CircuitSpec spec({0.3}, {0.0, 0.0}, 1);
    try {
        noisy_outcome_probabilities(spec, NoiseModel{{-0.1}});
        FAIL() << "expected an error";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_noise);
    }
    EXPECT_THROW(noisy_outcome_probabilities(spec, NoiseModel{{0.1, 0.2}}), Error);
}

TEST(DephasingChannel, DiagonalStatesAreFixedPoints) {
    DensityMatrix rho = DensityMatrix::Zero(3, 3);
    rho(0, 0) = 0.2;
    rho(1, 1) = 0.5;
    rho(2, 2) = 0.3;
    const auto out = apply_dephasing_channel(rho, NoiseModel{{0.3, 0.7}}, 5);
    EXPECT_LT((out - rho).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DephasingChannel, QubitCoherenceHalvesAtLnTwo) {
    DensityMatrix rho(2, 2);
    rho << 0.5, 0.5, 0.5, 0.5;
    const auto out = apply_dephasing_channel(rho, NoiseModel{{std::log(2.0)}}, 1);
    EXPECT_NEAR(out(0, 1).real(), 0.25, 1e-15);
    EXPECT_NEAR(out(1, 0).real(), 0.25, 1e-15);
    EXPECT_NEAR(out(0, 0).real(), 0.5, 1e-15);
}

TEST(DephasingChannel, PreservesValidStatesAndScalesCoherences) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 5;
        const DensityMatrix rho = random_density_matrix(rng, d + 1);
        const NoiseModel noise = random_noise(rng, d, 0.5);
        const std::int64_t m = 1 + trial % 9;
        const DensityMatrix out = apply_dephasing_channel(rho, noise, m);
        EXPECT_NEAR(std::abs(out.trace() - Complex(1.0, 0.0)), 0.0, 1e-12);
        EXPECT_LT((out - out.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<DensityMatrix> eig(out);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
        for (int a = 0; a <= d; ++a) {
            for (int b = 0; b <= d; ++b) {
                const double factor = a == b ? 1.0 : std::exp(-(noise.rate(a) + noise.rate(b)) * static_cast<double>(m));
                EXPECT_LT(std::abs(out(a, b) - factor * rho(a, b)), 1e-12);
            }
        }
    }
}

TEST(DephasingChannel, RejectsDimensionMismatch) {
    DensityMatrix rho = DensityMatrix::Identity(3, 3) / 3.0;
    EXPECT_THROW(apply_dephasing_channel(rho, NoiseModel{{0.1}}, 1), Error);
    EXPECT_THROW(apply_dephasing_channel(DensityMatrix::Identity(2, 3), NoiseModel{}, 1), Error);
}

TEST(NoonStates, ZeroControlPhasesMatchCircuit) {
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + trial % 4;
        const auto theta = qmpe::testing::random_angles(rng, d);
        const std::vector<double> zero(static_cast<std::size_t>(d + 1), 0.0);
        const std::int64_t m = 1 + trial * 3;
        EXPECT_LT(max_abs_diff(noon_outcome_probabilities(theta, zero, m),
                               outcome_probabilities(CircuitSpec(theta, zero, m))),
                  1e-12);
    }
}

TEST(NoonStates, RescaledControlPhasesReproduceCircuitStatistics) {
    std::mt19937_64 rng(52);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 4;
        const auto spec = random_spec(rng, d, 1024);
        auto phi = spec.phi();
        for (double &p : phi) p /= static_cast<double>(spec.repetitions());
        const auto noon = noon_outcome_probabilities(spec.theta(), phi, spec.repetitions());
        EXPECT_LT(max_abs_diff(noon, outcome_probabilities(spec)), 1e-12);
        EXPECT_NEAR(sum(noon), 1.0, 1e-12);
    }
}

TEST(VerificationBatteries, PassAndReportInjectedFailure) {
    VerifyOptions opt;
    opt.cases = 40;
    opt.seed = 5;
    const auto results = run_verification(opt);
    ASSERT_EQ(results.size(), 4u);
    for (const auto &b : results) EXPECT_TRUE(b.passed()) << b.name << " " << b.max_deviation;
    EXPECT_EQ(results[1].cases, 8u);

    opt.inject_failure = true;
    const auto broken = verify_state_vector(opt);
    ASSERT_EQ(broken.failures.size(), 1u);
    EXPECT_EQ(broken.failures[0].index, 5u);
    EXPECT_EQ(broken.failures[0].seed, derive_case_seed(5, 0, 5));
}
