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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qmpe/circuit.hpp"
#include "qmpe/error.hpp"
#include "qmpe/phase.hpp"

namespace qmpe {

/// Dense d-dimensional posterior density sampled at the midpoints of a
/// G^d cell grid over the hypercube [lower, lower + side)^d.
///
/// The round-0 domain is the full torus [0, 2pi)^d; after the first cut the
/// coordinates are unwrapped reals and the domain never spans a full period
/// again. Densities are stored row-major with axis 0 most significant.
class PosteriorGrid {
   public:
    PosteriorGrid(int d, int points_per_dim, std::vector<double> lower, double side, bool wraps, int cut_round,
                  std::vector<double> density)
        : d_(d),
          points_(points_per_dim),
          lower_(std::move(lower)),
          side_(side),
          wraps_(wraps),
          cut_round_(cut_round),
          density_(std::move(density)) {
        if (d_ < 1) throw Error(ErrorCode::invalid_dimension, "d must be >= 1");
        if (points_ < 8) throw Error(ErrorCode::resolution, "at least 8 grid points per dimension are required");
        if (static_cast<int>(lower_.size()) != d_) throw Error(ErrorCode::invalid_dimension, "lower corner size");
        if (density_.size() != cell_count()) throw Error(ErrorCode::invalid_dimension, "density size");
        if (!(side_ > 0.0)) throw Error(ErrorCode::invalid_argument, "side must be positive");
    }

    int d() const { return d_; }
    int points_per_dim() const { return points_; }
    const std::vector<double> &lower() const { return lower_; }
    double side() const { return side_; }
    /// True iff the domain is the full torus (round 0).
    bool wraps() const { return wraps_; }
    /// Round index k of the last cut (side == pi/2^k), -1 before any cut.
    int cut_round() const { return cut_round_; }

    std::size_t cell_count() const {
        std::size_t n = 1;
        for (int j = 0; j < d_; ++j) n *= static_cast<std::size_t>(points_);
        return n;
    }
    double cell_width() const { return side_ / points_; }
    double cell_volume() const { return std::pow(cell_width(), d_); }
    double midpoint(int axis, int i) const { return lower_[axis] + (i + 0.5) * cell_width(); }
    double center(int axis) const { return lower_[axis] + 0.5 * side_; }

    std::vector<double> axis_midpoints(int axis) const {
        std::vector<double> x(static_cast<std::size_t>(points_));
        for (int i = 0; i < points_; ++i) x[i] = midpoint(axis, i);
        return x;
    }

    std::span<const double> density() const { return density_; }
    std::span<double> density() { return density_; }

    /// Midpoint-rule total probability.
    double mass() const {
        double s = 0.0;
        for (double v : density_) s += v;
        return s * cell_volume();
    }

    void normalize(ErrorCode on_zero) {
        const double m = mass();
        if (!(m > 0.0) || !std::isfinite(m)) throw Error(on_zero, "posterior mass vanished");
        const double scale = 1.0 / m;
        for (double &v : density_) v *= scale;
    }

   private:
    int d_;
    int points_;
    std::vector<double> lower_;
    double side_;
    bool wraps_;
    int cut_round_;
    std::vector<double> density_;
};

using CovarianceMatrix = Eigen::MatrixXd;

/// Grid resolution used when none is configured.
inline int default_grid_points(int d) {
    if (d <= 2) return 64;
    if (d == 3) return 32;
    return 16;
}

namespace detail {

/// Visits every cell with its multi-index; axis d-1 varies fastest.
template <typename F>
void for_each_cell(int d, int points, F &&f) {
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::size_t flat = 0;
    while (true) {
        f(flat, idx);
        ++flat;
        int axis = d - 1;
        while (axis >= 0) {
            if (++idx[axis] < points) break;
            idx[axis] = 0;
            --axis;
        }
        if (axis < 0) return;
    }
}

/// Multiplies `density` by |sum of the per-axis amplitudes|^2 + bias, scaled.
inline void multiply_amplitude_likelihood(std::span<double> density, int d, int points,
                                          const std::vector<std::vector<Complex>> &tables, double bias,
                                          double scale) {
    // Recursion over all but the last axis, carrying the partial amplitude.
    auto recurse = [&](auto &&self, int axis, std::size_t offset, Complex partial) -> void {
        const auto &table = tables[static_cast<std::size_t>(axis)];
        if (axis == d - 1) {
            double *row = density.data() + offset * static_cast<std::size_t>(points);
            for (int i = 0; i < points; ++i) {
                const double like = (std::norm(partial + table[i]) + bias) * scale;
                row[i] *= like > 0.0 ? like : 0.0;
            }
            return;
        }
        for (int i = 0; i < points; ++i) {
            self(self, axis + 1, offset * static_cast<std::size_t>(points) + i, partial + table[i]);
        }
    };
    recurse(recurse, 0, 0, Complex(1.0, 0.0));
}

inline void require_center(const PosteriorGrid &grid, const PhasePoint &center) {
    if (static_cast<int>(center.size()) != grid.d()) {
        throw Error(ErrorCode::invalid_dimension, "center has wrong dimension");
    }
}

/// Signed offset of a grid coordinate from `c`; nearest image on the torus.
inline double offset_from(const PosteriorGrid &grid, double x, double c) {
    return grid.wraps() ? wrap_difference(x - c) : x - c;
}

}  // namespace detail

/// Uniform prior 1/(2pi)^d on the full torus.
inline PosteriorGrid init_uniform_grid(int d, int points_per_dim) {
    if (d < 1) throw Error(ErrorCode::invalid_dimension, "d must be >= 1");
    if (points_per_dim < 8) throw Error(ErrorCode::resolution, "at least 8 grid points per dimension are required");
    std::size_t cells = 1;
    for (int j = 0; j < d; ++j) cells *= static_cast<std::size_t>(points_per_dim);
    std::vector<double> density(cells, std::pow(kTwoPi, -d));
    return PosteriorGrid(d, points_per_dim, std::vector<double>(static_cast<std::size_t>(d), 0.0), kTwoPi, true, -1,
                         std::move(density));
}

/// Multiplies the density by the outcome likelihood P(o | theta, phi, M)
/// (dephased when the noise model is not trivial) and renormalizes.
///
/// The likelihood is evaluated in amplitude form,
///   (|1 + sum_j a_j|^2 + d - sum_j |a_j|^2) / (d+1)^2,
///   a_j = e^{-Gamma_j M} e^{i(M theta_j + phi_j - phi_0 + 2 pi j o/(d+1))},
/// which factorizes over the axes.
inline PosteriorGrid bayes_update(PosteriorGrid grid, int outcome, const std::vector<double> &phi, std::int64_t M,
                                  const NoiseModel &noise = {}) {
    const int d = grid.d();
    const int n = d + 1;
    if (outcome < 0 || outcome > d) throw Error(ErrorCode::invalid_argument, "outcome out of range");
    if (static_cast<int>(phi.size()) != n) throw Error(ErrorCode::invalid_dimension, "expected d+1 control phases");
    if (M < 1) throw Error(ErrorCode::invalid_argument, "M must be >= 1");
    validate_noise(noise, d);

    const auto m = static_cast<double>(M);
    std::vector<std::vector<Complex>> tables(static_cast<std::size_t>(d));
    double bias = d;
    for (int j = 1; j <= d; ++j) {
        const double damp = std::exp(-noise.rate(j) * m);
        bias -= damp * damp;
        const double beta = phi[j] - phi[0] + kTwoPi * j * outcome / n;
        auto &table = tables[static_cast<std::size_t>(j - 1)];
        table.resize(static_cast<std::size_t>(grid.points_per_dim()));
        for (int i = 0; i < grid.points_per_dim(); ++i) {
            table[i] = std::polar(damp, m * grid.midpoint(j - 1, i) + beta);
        }
    }
    detail::multiply_amplitude_likelihood(grid.density(), d, grid.points_per_dim(), tables, bias,
                                          1.0 / (static_cast<double>(n) * n));
    grid.normalize(ErrorCode::degenerate_update);
    return grid;
}

/// Per-axis marginal probabilities (cell masses).
inline std::vector<std::vector<double>> axis_marginals(const PosteriorGrid &grid) {
    const int d = grid.d();
    const int g = grid.points_per_dim();
    std::vector<std::vector<double>> marg(static_cast<std::size_t>(d), std::vector<double>(g, 0.0));
    const auto dens = grid.density();
    detail::for_each_cell(d, g, [&](std::size_t flat, const std::vector<int> &idx) {
        for (int j = 0; j < d; ++j) marg[j][idx[j]] += dens[flat];
    });
    const double vol = grid.cell_volume();
    for (auto &axis : marg) {
        for (double &v : axis) v *= vol;
    }
    return marg;
}

/// Circular mean theta_j = arg E[e^{i vartheta_j}], reported as the image
/// closest to the domain center (unwrapped coordinates).
inline PhasePoint circular_mean_estimate(const PosteriorGrid &grid) {
    const int d = grid.d();
    const auto marg = axis_marginals(grid);
    PhasePoint estimate(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        Complex z(0.0, 0.0);
        for (int i = 0; i < grid.points_per_dim(); ++i) z += marg[j][i] * std::polar(1.0, grid.midpoint(j, i));
        if (std::abs(z) <= 1e-12) {
            throw Error(ErrorCode::undefined_mean, "circular mean undefined on axis " + std::to_string(j));
        }
        estimate[j] = nearest_image(std::arg(z), grid.center(j));
    }
    return estimate;
}

/// Midpoint of the highest-density cell (first one on ties).
inline PhasePoint posterior_mode(const PosteriorGrid &grid) {
    const auto dens = grid.density();
    const auto best = static_cast<std::size_t>(std::max_element(dens.begin(), dens.end()) - dens.begin());
    PhasePoint mode(static_cast<std::size_t>(grid.d()));
    std::size_t rest = best;
    for (int j = grid.d() - 1; j >= 0; --j) {
        const auto g = static_cast<std::size_t>(grid.points_per_dim());
        mode[j] = grid.midpoint(j, static_cast<int>(rest % g));
        rest /= g;
    }
    return mode;
}

/// Posterior mass of the hypercube of half-width pi/2^{k+1} around `center`;
/// a cell counts iff its midpoint lies inside.
inline double p_half(const PosteriorGrid &grid, const PhasePoint &center, int k) {
    detail::require_center(grid, center);
    if (k < 0) throw Error(ErrorCode::invalid_argument, "round index must be >= 0");
    const int d = grid.d();
    const int g = grid.points_per_dim();
    const double half = kPi / std::ldexp(1.0, k + 1);
    std::vector<std::vector<char>> inside(static_cast<std::size_t>(d), std::vector<char>(g, 0));
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < g; ++i) {
            inside[j][i] = std::abs(detail::offset_from(grid, grid.midpoint(j, i), center[j])) <= half;
        }
    }
    const auto dens = grid.density();
    double s = 0.0;
    detail::for_each_cell(d, g, [&](std::size_t flat, const std::vector<int> &idx) {
        for (int j = 0; j < d; ++j) {
            if (!inside[j][idx[j]]) return;
        }
        s += dens[flat];
    });
    return std::min(1.0, s * grid.cell_volume());
}

/// V_ij = 4 E[sin((vartheta_i - c_i)/2) sin((vartheta_j - c_j)/2)].
inline CovarianceMatrix covariance_matrix(const PosteriorGrid &grid, const PhasePoint &center) {
    detail::require_center(grid, center);
    const int d = grid.d();
    const int g = grid.points_per_dim();
    std::vector<std::vector<double>> s(static_cast<std::size_t>(d), std::vector<double>(g));
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < g; ++i) s[j][i] = std::sin(0.5 * detail::offset_from(grid, grid.midpoint(j, i), center[j]));
    }
    CovarianceMatrix v = CovarianceMatrix::Zero(d, d);
    const auto dens = grid.density();
    detail::for_each_cell(d, g, [&](std::size_t flat, const std::vector<int> &idx) {
        const double w = dens[flat];
        if (w == 0.0) return;
        for (int a = 0; a < d; ++a) {
            const double wa = w * s[a][idx[a]];
            for (int b = a; b < d; ++b) v(a, b) += wa * s[b][idx[b]];
        }
    });
    const double scale = 4.0 * grid.cell_volume();
    for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) {
            v(a, b) *= scale;
            v(b, a) = v(a, b);
        }
    }
    return v;
}

/// Smallest eigenvalue of a symmetric covariance matrix.
inline double min_eigenvalue(const CovarianceMatrix &v) {
    Eigen::SelfAdjointEigenSolver<CovarianceMatrix> solver(v, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

/// Variance n^T V n of the linear combination n . theta.
inline double linear_combination_variance(const CovarianceMatrix &v, const std::vector<double> &n) {
    if (static_cast<Eigen::Index>(n.size()) != v.rows() || v.rows() != v.cols()) {
        throw Error(ErrorCode::invalid_dimension, "coefficient vector does not match covariance");
    }
    const Eigen::Map<const Eigen::VectorXd> vec(n.data(), static_cast<Eigen::Index>(n.size()));
    const double r = vec.dot(v * vec);
    if (r < -1e-10) throw Error(ErrorCode::psd_violation, "negative variance " + std::to_string(r));
    return std::max(r, 0.0);
}

/// Restricts the posterior to C = prod_j [c_j - pi/2^{k+1}, c_j + pi/2^{k+1}]
/// and resamples it on a fresh G^d grid by multilinear interpolation.
/// Indexing is modular on the torus; elsewhere the old density is taken as
/// zero outside its domain and held constant over the outer half cells.
inline PosteriorGrid cut_and_regrid(const PosteriorGrid &grid, const PhasePoint &center, int k) {
    detail::require_center(grid, center);
    if (k < 0) throw Error(ErrorCode::invalid_argument, "round index must be >= 0");
    if (!(p_half(grid, center, k) > 0.0)) throw Error(ErrorCode::degenerate_cut, "no posterior mass inside C");

    const int d = grid.d();
    const int g = grid.points_per_dim();
    const double new_side = kPi / std::ldexp(1.0, k);
    const double new_width = new_side / g;
    const double old_width = grid.cell_width();

    struct Stencil {
        int i0 = 0, i1 = 0;
        double w0 = 0.0, w1 = 0.0;
    };
    std::vector<double> new_lower(static_cast<std::size_t>(d));
    std::vector<std::vector<Stencil>> stencils(static_cast<std::size_t>(d), std::vector<Stencil>(g));
    for (int j = 0; j < d; ++j) {
        new_lower[j] = center[j] - 0.5 * new_side;
        for (int i = 0; i < g; ++i) {
            const double x = new_lower[j] + (i + 0.5) * new_width;
            Stencil &st = stencils[j][i];
            if (grid.wraps()) {
                double u = std::fmod((x - grid.lower()[j]) / old_width - 0.5, static_cast<double>(g));
                if (u < 0.0) u += g;
                const double fl = std::floor(u);
                st.i0 = static_cast<int>(fl) % g;
                st.i1 = (st.i0 + 1) % g;
                st.w1 = u - fl;
                st.w0 = 1.0 - st.w1;
                continue;
            }
            if (x < grid.lower()[j] || x > grid.lower()[j] + grid.side()) continue;  // zero weights
            double u = (x - grid.lower()[j]) / old_width - 0.5;
            u = std::clamp(u, 0.0, static_cast<double>(g - 1));
            st.i0 = std::min(static_cast<int>(std::floor(u)), g - 2);
            st.i1 = st.i0 + 1;
            st.w1 = u - st.i0;
            st.w0 = 1.0 - st.w1;
        }
    }

    std::size_t cells = grid.cell_count();
    std::vector<double> density(cells, 0.0);
    const auto old = grid.density();
    std::vector<std::size_t> strides(static_cast<std::size_t>(d), 1);
    for (int j = d - 2; j >= 0; --j) strides[j] = strides[j + 1] * static_cast<std::size_t>(g);
    const int corners = 1 << d;
    detail::for_each_cell(d, g, [&](std::size_t flat, const std::vector<int> &idx) {
        double acc = 0.0;
        for (int c = 0; c < corners; ++c) {
            double w = 1.0;
            std::size_t off = 0;
            for (int j = 0; j < d; ++j) {
                const Stencil &st = stencils[j][idx[j]];
                const bool upper = (c >> j) & 1;
                w *= upper ? st.w1 : st.w0;
                off += strides[j] * static_cast<std::size_t>(upper ? st.i1 : st.i0);
            }
            if (w != 0.0) acc += w * old[off];
        }
        density[flat] = acc > 0.0 ? acc : 0.0;
    });

    PosteriorGrid out(d, g, std::move(new_lower), new_side, false, k, std::move(density));
    out.normalize(ErrorCode::degenerate_cut);
    return out;
}

/// Text dump for plotting: one line per cell, d coordinates then density,
/// row-major order.
inline void write_grid_table(const PosteriorGrid &grid, std::ostream &out) {
    const auto dens = grid.density();
    const auto old_precision = out.precision(17);
    detail::for_each_cell(grid.d(), grid.points_per_dim(), [&](std::size_t flat, const std::vector<int> &idx) {
        for (int j = 0; j < grid.d(); ++j) out << grid.midpoint(j, idx[j]) << ' ';
        out << dens[flat] << '\n';
    });
    out.precision(old_precision);
}

/// Binary dump with the same record layout as the text table, as native
/// doubles (d+1 per cell).
inline void write_grid_binary(const PosteriorGrid &grid, std::ostream &out) {
    const auto dens = grid.density();
    detail::for_each_cell(grid.d(), grid.points_per_dim(), [&](std::size_t flat, const std::vector<int> &idx) {
        for (int j = 0; j < grid.d(); ++j) {
            const double x = grid.midpoint(j, idx[j]);
            out.write(reinterpret_cast<const char *>(&x), sizeof x);
        }
        out.write(reinterpret_cast<const char *>(&dens[flat]), sizeof(double));
    });
}

}  // namespace qmpe
