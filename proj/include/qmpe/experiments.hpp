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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include "qmpe/error.hpp"
#include "qmpe/grid.hpp"
#include "qmpe/protocol.hpp"

namespace qmpe {

/// Published fit constants used as comparison targets in reports.
namespace reference {

/// C_H^(d)(eps) = a + b ln(1/eps), index d-1.
inline constexpr double kHeisenbergOffset[3] = {3.13, 10.8, 40.1};
inline constexpr double kHeisenbergSlope[3] = {2.50, 13.8, 26.2};
/// P_err^(d)(eps) = c eps.
inline constexpr double kErrorPrefactor[3] = {0.94, 0.78, 0.58};
/// P_err^(d)(eps) = c1 eps^c2.
inline constexpr double kErrorPowerC1[3] = {0.57, 0.94, 0.64};
inline constexpr double kErrorPowerC2[3] = {0.91, 1.04, 1.02};
/// Plateau constants at eps = 1e-4 for d = 2, 3 and the off-diagonal ratios.
inline constexpr double kPlateauD2 = 138.0;
inline constexpr double kPlateauD3 = 281.0;
inline constexpr double kCorrelationD2 = 0.47;
inline constexpr double kCorrelationD3 = 0.45;
/// Single-phase protocols: optimized adaptive backward, Gaussian forward,
/// nonadaptive forward.
inline constexpr double kSinglePhaseConstants[3] = {23.0, 22.0, 40.5};

inline double heisenberg_constant(int d, double epsilon) {
    if (d < 1 || d > 3) throw Error(ErrorCode::not_applicable, "reference fits exist for d = 1, 2, 3 only");
    return kHeisenbergOffset[d - 1] + kHeisenbergSlope[d - 1] * std::log(1.0 / epsilon);
}

}  // namespace reference

struct RunSummary {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    RunResult result;
};

/// Aggregate of independent runs sharing one configuration. Runs are kept
/// ordered by index.
struct CampaignStats {
    RunConfig config;
    std::uint64_t campaign_seed = 0;
    std::vector<RunSummary> runs;

    int d() const { return config.d; }
    int rounds_per_run() const { return config.k_max; }

    std::size_t n_flagged() const {
        return static_cast<std::size_t>(
            std::count_if(runs.begin(), runs.end(), [](const RunSummary &r) { return r.result.flagged(); }));
    }
    std::size_t n_aborted() const {
        return static_cast<std::size_t>(
            std::count_if(runs.begin(), runs.end(), [](const RunSummary &r) { return r.result.aborted; }));
    }
    /// Runs entering the covariance fits (no flag).
    std::size_t n_fit_runs() const { return runs.size() - n_flagged(); }
    /// Runs entering the error statistics: every run that executed all its
    /// rounds. Stalled runs count, since a stall usually follows an error.
    std::size_t n_sim() const { return runs.size() - n_aborted(); }
    /// Runs in which the truth left C at least once.
    std::size_t n_err() const {
        return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunSummary &r) {
            return !r.result.aborted && r.result.any_error();
        }));
    }
    std::size_t first_round_errors() const {
        return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunSummary &r) {
            return !r.result.aborted && !r.result.rounds.empty() && !r.result.rounds.front().truth_in_c;
        }));
    }
    /// Error events per round index, counting only the first error of a run.
    std::vector<std::size_t> first_error_by_round() const {
        std::vector<std::size_t> counts(static_cast<std::size_t>(config.k_max), 0);
        for (const auto &r : runs) {
            if (r.result.aborted) continue;
            for (const auto &rec : r.result.rounds) {
                if (!rec.truth_in_c) {
                    ++counts[static_cast<std::size_t>(rec.k)];
                    break;
                }
            }
        }
        return counts;
    }
};

/// A scalar estimate with its dispersion over the contributing samples.
struct FitSummary {
    double value = 0.0;  // mean
    double median = 0.0;
    double stddev = 0.0;
    std::size_t samples = 0;

    double standard_error() const { return samples > 0 ? stddev / std::sqrt(static_cast<double>(samples)) : 0.0; }
};

namespace detail {

inline FitSummary summarize(const std::vector<double> &xs) {
    FitSummary s;
    s.samples = xs.size();
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.value = sum / static_cast<double>(xs.size());
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.value) * (x - s.value);
        s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

/// Calls f(record) for every round with k >= first_round of every unflagged run.
template <typename F>
void for_each_tail_round(const CampaignStats &stats, int tail_rounds, F &&f) {
    if (tail_rounds < 1) throw Error(ErrorCode::invalid_argument, "tail_rounds must be >= 1");
    if (stats.config.k_max < tail_rounds) {
        throw Error(ErrorCode::invalid_argument, "campaign has fewer rounds than the fit window");
    }
    const int first = stats.config.k_max - tail_rounds;
    for (const auto &run : stats.runs) {
        if (run.result.flagged()) continue;
        for (const auto &rec : run.result.rounds) {
            if (rec.k >= first) f(rec);
        }
    }
}

inline double squared(double x) { return x * x; }

}  // namespace detail

/// Seed of run `index` derived from the campaign seed.
inline std::uint64_t derive_run_seed(std::uint64_t campaign_seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(campaign_seed), static_cast<std::uint32_t>(campaign_seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(std::uint64_t{index} >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (std::uint64_t{words[0]} << 32) | words[1];
}

struct CampaignOptions {
    /// Worker threads, 0 = hardware concurrency.
    unsigned threads = 0;
    /// Runs already available (e.g. loaded from a partial record file).
    std::map<std::size_t, RunSummary> completed;
    /// Invoked for every freshly executed run, serialized under a lock.
    std::function<void(const RunSummary &)> on_run_complete;
};

/// Executes `repetitions` independent runs. Each run uses a private RNG
/// stream derived from (campaign_seed, run index) and draws its own true
/// phases; the result does not depend on the number of threads.
inline CampaignStats run_campaign(const RunConfig &config, int repetitions, std::uint64_t campaign_seed,
                                  CampaignOptions options = {}) {
    if (repetitions < 1) throw Error(ErrorCode::invalid_argument, "repetitions must be >= 1");
    config.validate();

    CampaignStats stats;
    stats.config = config;
    stats.config.theta_true.reset();
    stats.config.seed = campaign_seed;
    stats.campaign_seed = campaign_seed;
    const auto count = static_cast<std::size_t>(repetitions);
    stats.runs.resize(count);

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < count; ++i) {
        auto it = options.completed.find(i);
        if (it != options.completed.end()) {
            stats.runs[i] = std::move(it->second);
        } else {
            pending.push_back(i);
        }
    }

    unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(pending.size(), 1)));

    std::atomic<std::size_t> next{0};
    std::mutex callback_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t slot = next.fetch_add(1);
            if (slot >= pending.size()) return;
            const std::size_t i = pending[slot];
            RunConfig run_config = config;
            run_config.theta_true.reset();
            run_config.seed = derive_run_seed(campaign_seed, i);
            RunSummary summary{i, run_config.seed, run_estimation(run_config)};
            if (options.on_run_complete) {
                std::lock_guard<std::mutex> lock(callback_mutex);
                options.on_run_complete(summary);
            }
            stats.runs[i] = std::move(summary);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    return stats;
}

/// Plateau constant: mean of V_jj N_T^2 over the last `tail_rounds` rounds,
/// all unflagged runs and all diagonal entries.
inline FitSummary fit_heisenberg_constant(const CampaignStats &stats, int tail_rounds = 3) {
    std::vector<double> xs;
    detail::for_each_tail_round(stats, tail_rounds, [&](const RoundRecord &rec) {
        const double nt2 = detail::squared(static_cast<double>(rec.cumulative_resources));
        for (Eigen::Index j = 0; j < rec.covariance.rows(); ++j) xs.push_back(rec.covariance(j, j) * nt2);
    });
    return detail::summarize(xs);
}

/// Mean normalized off-diagonal covariance V_ij / sqrt(V_ii V_jj).
inline FitSummary correlation_ratio(const CampaignStats &stats, int tail_rounds = 3) {
    if (stats.d() < 2) throw Error(ErrorCode::not_applicable, "correlation ratio needs d >= 2");
    std::vector<double> xs;
    detail::for_each_tail_round(stats, tail_rounds, [&](const RoundRecord &rec) {
        const auto &v = rec.covariance;
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            for (Eigen::Index j = i + 1; j < v.cols(); ++j) {
                const double denom = std::sqrt(v(i, i) * v(j, j));
                if (denom > 0.0) xs.push_back(v(i, j) / denom);
            }
        }
    });
    return detail::summarize(xs);
}

/// Plateau of n^T V n N_T^2 for a linear combination n.theta.
inline FitSummary linear_combination_plateau(const CampaignStats &stats, const std::vector<double> &n,
                                             int tail_rounds = 3) {
    std::vector<double> xs;
    detail::for_each_tail_round(stats, tail_rounds, [&](const RoundRecord &rec) {
        xs.push_back(linear_combination_variance(rec.covariance, n) *
                     detail::squared(static_cast<double>(rec.cumulative_resources)));
    });
    return detail::summarize(xs);
}

/// Fraction of (sample, pair) combinations with
/// (e_i - e_j)^T V (e_i - e_j) < V_ii + V_jj.
inline double correlation_advantage_fraction(const CampaignStats &stats, int tail_rounds = 3) {
    if (stats.d() < 2) throw Error(ErrorCode::not_applicable, "needs d >= 2");
    std::size_t hits = 0;
    std::size_t total = 0;
    detail::for_each_tail_round(stats, tail_rounds, [&](const RoundRecord &rec) {
        const auto &v = rec.covariance;
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            for (Eigen::Index j = i + 1; j < v.cols(); ++j) {
                const double diff = v(i, i) + v(j, j) - 2.0 * v(i, j);
                hits += diff < v(i, i) + v(j, j);
                ++total;
            }
        }
    });
    return total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

struct ErrorRateEstimate {
    double p_err = 0.0;
    double delta = 0.0;
    /// Every run failed: the per-round rate is pinned at 1.
    bool degenerate = false;
};

/// Per-round error probability from 1 - N_err/N_sim = (1 - P_err)^k, with
/// the uncertainty propagated from sqrt(N_err)/N_sim.
inline ErrorRateEstimate estimate_error_rate(std::size_t n_err, std::size_t n_sim, int k) {
    if (n_sim < 1) throw Error(ErrorCode::invalid_argument, "N_sim must be >= 1");
    if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
    if (n_err > n_sim) throw Error(ErrorCode::invalid_argument, "N_err exceeds N_sim");
    ErrorRateEstimate est;
    if (n_err == n_sim) {
        est.p_err = 1.0;
        est.delta = std::numeric_limits<double>::infinity();
        est.degenerate = true;
        return est;
    }
    const double total = static_cast<double>(n_err) / static_cast<double>(n_sim);
    const double inv_k = 1.0 / k;
    est.p_err = -std::expm1(inv_k * std::log1p(-total));
    const double d_total = std::sqrt(static_cast<double>(n_err)) / static_cast<double>(n_sim);
    est.delta = inv_k * std::pow(1.0 - total, inv_k - 1.0) * d_total;
    return est;
}

inline ErrorRateEstimate campaign_error_rate(const CampaignStats &stats) {
    return estimate_error_rate(stats.n_err(), stats.n_sim(), stats.rounds_per_run());
}

struct ErrorModelFit {
    double c1 = 0.0;
    double c2 = 0.0;
    /// Prefactor of the one-parameter model P_err = c eps.
    double c_linear = 0.0;
    std::size_t points = 0;
};

/// Least-squares fit of log P_err = log c1 + c2 log eps over the points with
/// P_err > 0, plus the through-origin fit P_err = c eps.
inline ErrorModelFit fit_error_model(const std::vector<std::pair<double, double>> &points) {
    std::vector<std::pair<double, double>> logs;
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto &[eps, p] : points) {
        if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be positive");
        if (p > 0.0) logs.emplace_back(std::log(eps), std::log(p));
        sxy += eps * p;
        sxx += eps * eps;
    }
    if (logs.size() < 3) throw Error(ErrorCode::fit_impossible, "need at least 3 points with P_err > 0");
    double mx = 0.0, my = 0.0;
    for (const auto &[x, y] : logs) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(logs.size());
    my /= static_cast<double>(logs.size());
    double cov = 0.0, var = 0.0;
    for (const auto &[x, y] : logs) {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if (!(var > 0.0)) throw Error(ErrorCode::fit_impossible, "epsilon values must differ");
    ErrorModelFit fit;
    fit.c2 = cov / var;
    fit.c1 = std::exp(my - fit.c2 * mx);
    fit.c_linear = sxy / sxx;
    fit.points = logs.size();
    return fit;
}

/// C_H^(1) of the single-phase protocol as a function of its error rate.
inline double single_phase_heisenberg_constant(double p_err) { return 3.13 + 2.50 * std::log(0.94 / p_err); }

/// Variance of n.theta when the d phases are estimated one after another by
/// single-phase runs sharing N_T equally: C_H^(1) d^2 sum_j n_j^2 / N_T^2.
inline double sequential_baseline_variance(int d, const std::vector<double> &n, double p_err, double n_total) {
    if (d < 1 || static_cast<int>(n.size()) != d) throw Error(ErrorCode::invalid_dimension, "n must have d entries");
    if (!(p_err > 0.0 && p_err < 1.0)) throw Error(ErrorCode::invalid_argument, "P_err must lie in (0, 1)");
    if (!(n_total > 0.0)) throw Error(ErrorCode::invalid_argument, "N_T must be positive");
    double norm2 = 0.0;
    for (double x : n) norm2 += x * x;
    return single_phase_heisenberg_constant(p_err) * d * d * norm2 / (n_total * n_total);
}

/// Ordinary least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<std::pair<double, double>> &xy) {
    if (xy.size() < 2) throw Error(ErrorCode::fit_impossible, "need at least two points");
    double mx = 0.0, my = 0.0;
    for (const auto &[x, y] : xy) {
        if (!(x > 0.0 && y > 0.0)) throw Error(ErrorCode::fit_impossible, "log-log fit needs positive values");
        mx += std::log(x);
        my += std::log(y);
    }
    mx /= static_cast<double>(xy.size());
    my /= static_cast<double>(xy.size());
    double cov = 0.0, var = 0.0;
    for (const auto &[x, y] : xy) {
        cov += (std::log(x) - mx) * (std::log(y) - my);
        var += (std::log(x) - mx) * (std::log(x) - mx);
    }
    if (!(var > 0.0)) throw Error(ErrorCode::fit_impossible, "x values must differ");
    return cov / var;
}

struct CrossoverReport {
    /// 1 / max_j Gamma_j^2.
    double crossover_scale = 0.0;
    /// First round whose M is capped by the noise, and mean N_T at its end.
    int capped_round = 0;
    double crossover_resources = 0.0;
    int early_first_round = 1;
    int early_last_round = 0;
    int late_first_round = 0;
    double early_slope = 0.0;
    double late_slope = 0.0;
    /// Late-window N_T V_jj: mean, and relative spread of the per-round means.
    FitSummary late_nt_variance;
    double late_relative_spread = 0.0;
    bool late_constant = false;
    bool sub_shot_noise = false;
};

/// Log-log slopes of V_jj against N_T in the Heisenberg window (rounds
/// 1 .. capped_round-1, before M saturates) and in the last `tail_rounds`
/// rounds, where V_jj should follow shot-noise scaling.
inline CrossoverReport noise_crossover_analysis(const CampaignStats &stats, int tail_rounds = 3) {
    const auto &noise = stats.config.noise;
    if (noise.noiseless()) throw Error(ErrorCode::not_applicable, "crossover analysis needs a noisy campaign");
    CrossoverReport rep;
    double gmax = 0.0;
    for (double g : noise.gammas) gmax = std::max(gmax, g);
    rep.crossover_scale = 1.0 / (gmax * gmax);

    rep.capped_round = stats.config.k_max;
    for (int k = 0; k < stats.config.k_max; ++k) {
        if (round_repetitions(k, noise) < (std::int64_t{1} << k)) {
            rep.capped_round = k;
            break;
        }
    }
    rep.early_first_round = 1;
    rep.early_last_round = rep.capped_round - 1;
    rep.late_first_round = stats.config.k_max - tail_rounds;
    if (rep.early_last_round <= rep.early_first_round || rep.late_first_round <= rep.capped_round) {
        throw Error(ErrorCode::not_applicable, "campaign does not resolve both scaling regimes");
    }

    std::vector<std::pair<double, double>> early, late;
    std::map<int, std::vector<double>> late_by_round;
    std::vector<double> at_cap;
    for (const auto &run : stats.runs) {
        if (run.result.flagged()) continue;
        for (const auto &rec : run.result.rounds) {
            const auto nt = static_cast<double>(rec.cumulative_resources);
            if (rec.k == rep.capped_round) at_cap.push_back(nt);
            for (Eigen::Index j = 0; j < rec.covariance.rows(); ++j) {
                const double v = rec.covariance(j, j);
                if (rec.k >= rep.early_first_round && rec.k <= rep.early_last_round) early.emplace_back(nt, v);
                if (rec.k >= rep.late_first_round) {
                    late.emplace_back(nt, v);
                    late_by_round[rec.k].push_back(nt * v);
                }
            }
        }
    }
    rep.crossover_resources = detail::summarize(at_cap).value;
    rep.early_slope = loglog_slope(early);
    rep.late_slope = loglog_slope(late);

    std::vector<double> all_late, round_means;
    for (const auto &[k, xs] : late_by_round) {
        all_late.insert(all_late.end(), xs.begin(), xs.end());
        round_means.push_back(detail::summarize(xs).value);
    }
    rep.late_nt_variance = detail::summarize(all_late);
    const auto [lo, hi] = std::minmax_element(round_means.begin(), round_means.end());
    rep.late_relative_spread = (*hi - *lo) / rep.late_nt_variance.value;
    rep.late_constant = rep.late_relative_spread < 0.5;
    rep.sub_shot_noise = rep.late_nt_variance.value < 1.0;
    return rep;
}

struct RoundAverage {
    int k = 0;
    std::size_t samples = 0;
    double resources = 0.0;
    /// Mean V_ij N_T^2 (row-major d x d).
    std::vector<double> scaled_covariance;
};

/// Per-round means over unflagged runs, the solid lines of the scaling plots.
inline std::vector<RoundAverage> round_averages(const CampaignStats &stats) {
    const int d = stats.d();
    std::vector<RoundAverage> out(static_cast<std::size_t>(stats.config.k_max));
    for (int k = 0; k < stats.config.k_max; ++k) {
        out[k].k = k;
        out[k].scaled_covariance.assign(static_cast<std::size_t>(d * d), 0.0);
    }
    for (const auto &run : stats.runs) {
        if (run.result.flagged()) continue;
        for (const auto &rec : run.result.rounds) {
            auto &avg = out[static_cast<std::size_t>(rec.k)];
            const auto nt = static_cast<double>(rec.cumulative_resources);
            ++avg.samples;
            avg.resources += nt;
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) avg.scaled_covariance[i * d + j] += rec.covariance(i, j) * nt * nt;
            }
        }
    }
    for (auto &avg : out) {
        if (avg.samples == 0) continue;
        const auto s = static_cast<double>(avg.samples);
        avg.resources /= s;
        for (double &v : avg.scaled_covariance) v /= s;
    }
    return out;
}

}  // namespace qmpe
