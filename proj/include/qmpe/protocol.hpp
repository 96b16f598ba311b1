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

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qmpe/circuit.hpp"
#include "qmpe/error.hpp"
#include "qmpe/grid.hpp"
#include "qmpe/phase.hpp"

namespace qmpe {

struct RunConfig {
    int d = 1;
    /// Decision parameter: a round ends once P_half > 1 - epsilon.
    double epsilon = 1e-3;
    int k_max = 10;
    /// Grid points per dimension, 0 selects default_grid_points(d).
    int grid_points = 0;
    NoiseModel noise;
    std::uint64_t seed = 0;
    /// Per-round measurement cap; reaching it marks the round stalled.
    std::int64_t m_max = 1000;
    /// Hidden true phases; drawn uniformly from [0, 2pi)^d when absent.
    std::optional<PhasePoint> theta_true;
    bool record_outcomes = true;

    int resolved_grid_points() const { return grid_points > 0 ? grid_points : default_grid_points(d); }

    void validate() const {
        if (d < 1) throw Error(ErrorCode::invalid_dimension, "d must be >= 1");
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::invalid_argument, "epsilon must lie in (0, 1)");
        if (k_max < 1) throw Error(ErrorCode::invalid_argument, "k_max must be >= 1");
        if (k_max > 52) throw Error(ErrorCode::invalid_argument, "k_max must be <= 52");
        if (m_max < 1) throw Error(ErrorCode::invalid_argument, "m_max must be >= 1");
        if (grid_points != 0 && grid_points < 8) {
            throw Error(ErrorCode::resolution, "at least 8 grid points per dimension are required");
        }
        validate_noise(noise, d);
        if (theta_true && static_cast<int>(theta_true->size()) != d) {
            throw Error(ErrorCode::invalid_dimension, "theta_true must have d entries");
        }
    }
};

struct Measurement {
    std::vector<double> phi;
    int outcome = 0;
};

/// Everything observed during one round of the protocol.
struct RoundRecord {
    int k = 0;
    std::int64_t M = 1;
    std::int64_t m = 0;
    std::vector<Measurement> outcomes;  // empty unless RunConfig::record_outcomes
    PhasePoint estimate;
    /// Posterior covariance at round end, before the domain is cut.
    CovarianceMatrix covariance;
    double p_half_final = 0.0;
    std::int64_t cumulative_resources = 0;
    bool truth_in_c = false;
    bool stalled = false;
};

struct RunResult {
    PhasePoint theta_true;
    std::vector<RoundRecord> rounds;
    /// A degenerate update or cut ended the run before k_max rounds.
    bool aborted = false;
    std::string flag_reason;

    bool stalled() const {
        for (const auto &r : rounds) {
            if (r.stalled) return true;
        }
        return false;
    }
    /// Stalled or aborted; such runs stay out of the covariance fits.
    bool flagged() const { return aborted || stalled(); }
    const PhasePoint &final_estimate() const { return rounds.back().estimate; }
    bool any_error() const {
        for (const auto &r : rounds) {
            if (!r.truth_in_c) return true;
        }
        return false;
    }
};

/// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
template <typename Rng>
double uniform_unit(Rng &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Rng>
std::vector<double> draw_control_phases(Rng &rng, int d) {
    std::vector<double> phi(static_cast<std::size_t>(d + 1));
    for (double &p : phi) p = kTwoPi * uniform_unit(rng);
    return phi;
}

/// Number of controlled-U applications per measurement in round k:
/// 2^k, capped at min_j floor(1/Gamma_j) (at least 1) under dephasing.
inline std::int64_t round_repetitions(int k, const NoiseModel &noise) {
    std::int64_t m = std::int64_t{1} << k;
    for (double g : noise.gammas) {
        if (g > 0.0) {
            const double cap = std::max(1.0, std::floor(1.0 / g));
            if (cap < static_cast<double>(m)) m = static_cast<std::int64_t>(cap);
        }
    }
    return m;
}

/// Simulated measurement: categorical draw from the (noisy) outcome law.
template <typename Rng>
int sample_outcome(Rng &rng, const PhasePoint &theta_true, const std::vector<double> &phi, std::int64_t M,
                   const NoiseModel &noise) {
    const auto probs = noisy_outcome_probabilities(CircuitSpec(theta_true, phi, M), noise);
    const double u = uniform_unit(rng);
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t o = 0; o < probs.size(); ++o) {
        if (probs[o] <= 0.0) continue;
        last_positive = static_cast<int>(o);
        acc += probs[o];
        if (u < acc) return static_cast<int>(o);
    }
    return last_positive;
}

/// Called after every Bayes update and every cut with the current grid.
enum class GridEvent { update, cut };
using GridObserver = std::function<void(GridEvent, const PosteriorGrid &)>;

/// Mutable state of a single run. The grid is owned by the run and updated
/// strictly in measurement order.
struct RunState {
    PosteriorGrid grid;
    std::mt19937_64 rng;
    int k = 0;
    std::int64_t resources = 0;
    PhasePoint theta_true;
};

inline RunState start_run(const RunConfig &config) {
    config.validate();
    RunState state{init_uniform_grid(config.d, config.resolved_grid_points()), std::mt19937_64(config.seed), 0, 0,
                   {}};
    if (config.theta_true) {
        state.theta_true = *config.theta_true;
        for (double &t : state.theta_true) t = wrap_phase(t);
    } else {
        state.theta_true.resize(static_cast<std::size_t>(config.d));
        for (double &t : state.theta_true) t = kTwoPi * uniform_unit(state.rng);
    }
    return state;
}

/// True iff theta (any image modulo 2pi) lies in the hypercube of
/// half-width pi/2^{k+1} around `center`.
inline bool contains_truth(const PhasePoint &center, const PhasePoint &theta, int k) {
    const double half = kPi / std::ldexp(1.0, k + 1);
    for (std::size_t j = 0; j < center.size(); ++j) {
        if (std::abs(wrap_difference(theta[j] - center[j])) > half) return false;
    }
    return true;
}

/// One round: measure with fresh random control phases until P_half exceeds
/// 1 - epsilon (or the cap is hit), then cut the domain to C.
inline RoundRecord run_round(RunState &state, const RunConfig &config, const GridObserver &observer = {}) {
    if (state.k >= config.k_max) throw Error(ErrorCode::invalid_argument, "all rounds already executed");
    RoundRecord rec;
    rec.k = state.k;
    rec.M = round_repetitions(state.k, config.noise);

    std::optional<PhasePoint> estimate;
    while (true) {
        auto phi = draw_control_phases(state.rng, config.d);
        const int o = sample_outcome(state.rng, state.theta_true, phi, rec.M, config.noise);
        state.grid = bayes_update(std::move(state.grid), o, phi, rec.M, config.noise);
        if (observer) observer(GridEvent::update, state.grid);
        ++rec.m;
        state.resources += rec.M;
        if (config.record_outcomes) rec.outcomes.push_back({std::move(phi), o});

        double ph = 0.0;
        try {
            estimate = circular_mean_estimate(state.grid);
            ph = p_half(state.grid, *estimate, state.k);
        } catch (const Error &e) {
            if (e.code() != ErrorCode::undefined_mean) throw;
            estimate.reset();
        }
        rec.p_half_final = ph;
        if (ph > 1.0 - config.epsilon) break;
        if (rec.m >= config.m_max) {
            rec.stalled = true;
            break;
        }
    }
    // Only reachable in stalled rounds: a flat posterior has no circular
    // mean (use the domain center), and a posterior split across the domain
    // edges can leave C empty around its mean (use the mode). Either way the
    // forced cut keeps the run going.
    if (!estimate) {
        estimate = PhasePoint(static_cast<std::size_t>(config.d));
        for (int j = 0; j < config.d; ++j) (*estimate)[j] = state.grid.center(j);
        rec.p_half_final = p_half(state.grid, *estimate, state.k);
    }
    if (!(rec.p_half_final > 0.0)) {
        estimate = posterior_mode(state.grid);
        rec.p_half_final = p_half(state.grid, *estimate, state.k);
    }

    rec.estimate = *estimate;
    rec.covariance = covariance_matrix(state.grid, rec.estimate);
    rec.cumulative_resources = state.resources;
    rec.truth_in_c = contains_truth(rec.estimate, state.theta_true, rec.k);
    state.grid = cut_and_regrid(state.grid, rec.estimate, rec.k);
    if (observer) observer(GridEvent::cut, state.grid);
    ++state.k;
    return rec;
}

/// Runs rounds k = 0 .. k_max-1 from the uniform prior. Degenerate updates
/// or cuts end the run early with `aborted` set; stalled rounds are forced
/// through their cut and the run continues.
inline RunResult run_estimation(const RunConfig &config, const GridObserver &observer = {}) {
    RunState state = start_run(config);
    RunResult result;
    result.theta_true = state.theta_true;
    result.rounds.reserve(static_cast<std::size_t>(config.k_max));
    while (state.k < config.k_max) {
        try {
            result.rounds.push_back(run_round(state, config, observer));
        } catch (const Error &e) {
            result.aborted = true;
            result.flag_reason = e.what();
            break;
        }
        if (result.rounds.back().stalled && result.flag_reason.empty()) {
            result.flag_reason = "stalled in round " + std::to_string(result.rounds.back().k);
        }
    }
    return result;
}

/// N_T = sum_k m_k M_k over the given rounds.
inline std::int64_t total_resources(const std::vector<RoundRecord> &records) {
    if (records.empty()) throw Error(ErrorCode::invalid_argument, "no rounds");
    std::int64_t total = 0;
    for (const auto &r : records) total += r.m * r.M;
    return total;
}

}  // namespace qmpe
