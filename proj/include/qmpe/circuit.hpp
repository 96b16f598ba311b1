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

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qmpe/error.hpp"
#include "qmpe/phase.hpp"

namespace qmpe {

using GateMatrix = Eigen::MatrixXcd;
using DensityMatrix = Eigen::MatrixXcd;

/// Per-register dephasing rates Gamma_j (per controlled-gate application).
/// An empty rate list, or all rates zero, is the noiseless channel.
struct NoiseModel {
    std::vector<double> gammas;

    bool noiseless() const {
        for (double g : gammas) {
            if (g != 0.0) return false;
        }
        return true;
    }

    /// Rate of register j (1-based), with Gamma_0 = 0 for the reference arm.
    double rate(int j) const {
        if (j <= 0 || gammas.empty()) return 0.0;
        return gammas[static_cast<std::size_t>(j - 1)];
    }
};

inline void validate_noise(const NoiseModel &noise, int d) {
    if (!noise.gammas.empty() && static_cast<int>(noise.gammas.size()) != d) {
        throw Error(ErrorCode::invalid_noise, "expected " + std::to_string(d) + " dephasing rates, got " +
                                                  std::to_string(noise.gammas.size()));
    }
    for (double g : noise.gammas) {
        if (!(g >= 0.0) || !std::isfinite(g)) {
            throw Error(ErrorCode::invalid_noise, "dephasing rates must be finite and nonnegative");
        }
    }
}

/// Parameters of one execution of the measurement circuit: d eigenphases,
/// d+1 control phases and the number M of controlled-U applications.
///
/// Phases are reduced to [0, 2pi) on construction. The outcome statistics only
/// depend on phi_j - phi_0, so phi_0 = 0 is a statistically equivalent choice.
class CircuitSpec {
   public:
    CircuitSpec(PhasePoint theta, std::vector<double> phi, std::int64_t repetitions)
        : theta_(std::move(theta)), phi_(std::move(phi)), repetitions_(repetitions) {
        if (theta_.empty()) throw Error(ErrorCode::invalid_dimension, "at least one phase is required");
        if (phi_.size() != theta_.size() + 1) {
            throw Error(ErrorCode::invalid_dimension, "expected d+1 control phases");
        }
        if (repetitions_ < 1) throw Error(ErrorCode::invalid_argument, "M must be >= 1");
        for (double &t : theta_) t = wrap_phase(t);
        for (double &p : phi_) p = wrap_phase(p);
    }

    int d() const { return static_cast<int>(theta_.size()); }
    const PhasePoint &theta() const { return theta_; }
    const std::vector<double> &phi() const { return phi_; }
    std::int64_t repetitions() const { return repetitions_; }

   private:
    PhasePoint theta_;
    std::vector<double> phi_;
    std::int64_t repetitions_;
};

namespace detail {

/// e^{i 2pi m / n}, exact on quarter turns.
inline Complex root_of_unity(long long m, long long n) {
    long long r = m % n;
    if (r < 0) r += n;
    if ((4 * r) % n == 0) return unit_phase(static_cast<double>(4 * r / n) * (kPi / 2.0));
    return std::polar(1.0, kTwoPi * static_cast<double>(r) / static_cast<double>(n));
}

inline double max_unitarity_defect(const GateMatrix &u) {
    const GateMatrix id = GateMatrix::Identity(u.rows(), u.cols());
    return (u.adjoint() * u - id).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Generalized Hadamard gate: <k|H|l> = e^{i 2pi k l/(d+1)} / sqrt(d+1).
inline GateMatrix hadamard_matrix(int d) {
    if (d < 1) throw Error(ErrorCode::invalid_dimension, "d must be >= 1");
    const int n = d + 1;
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    GateMatrix h(n, n);
    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) h(k, l) = norm * detail::root_of_unity(static_cast<long long>(k) * l, n);
    }
    return h;
}

/// Diagonal control-phase gate Z_{d+1}(phi).
inline GateMatrix phase_gate(const std::vector<double> &phi) {
    const auto n = static_cast<Eigen::Index>(phi.size());
    GateMatrix z = GateMatrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) z(k, k) = std::polar(1.0, phi[static_cast<std::size_t>(k)]);
    return z;
}

/// Multiport beam splitter of the optical realization. d = 2 is the tritter
/// BS_3 and d = 3 the quarter BS_4(gamma); other d fall back to the
/// generalized Hadamard gate and ignore gamma.
inline GateMatrix multiport_bs_matrix(int d, double gamma) {
    if (d == 2) {
        const double norm = 1.0 / std::sqrt(3.0);
        const Complex w = detail::root_of_unity(1, 3);
        const Complex w2 = detail::root_of_unity(2, 3);
        GateMatrix bs(3, 3);
        bs << 1.0, 1.0, 1.0,  //
            1.0, w, w2,       //
            1.0, w2, w;
        return norm * bs;
    }
    if (d == 3) {
        const Complex g = unit_phase(gamma);
        GateMatrix bs(4, 4);
        bs << 1.0, 1.0, 1.0, 1.0,  //
            1.0, g, -1.0, -g,      //
            1.0, -1.0, 1.0, -1.0,  //
            1.0, -g, -1.0, g;
        return 0.5 * bs;
    }
    return hadamard_matrix(d);
}

/// Closed-form outcome distribution P(o | theta, phi, M) of the ancilla.
inline std::vector<double> outcome_probabilities(const CircuitSpec &spec) {
    const int d = spec.d();
    const int n = d + 1;
    const auto M = static_cast<double>(spec.repetitions());
    const auto &theta = spec.theta();
    const auto &phi = spec.phi();
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (int o = 0; o < n; ++o) {
        double acc = n;
        for (int j = 1; j <= d; ++j) {
            const double beta = phi[j] - phi[0] + kTwoPi * j * o / n;
            acc += 2.0 * std::cos(wrap_phase(M * theta[j - 1]) + beta);
        }
        for (int j = 1; j <= d; ++j) {
            for (int k = j + 1; k <= d; ++k) {
                const double gamma = phi[j] - phi[k] + kTwoPi * (j - k) * o / n;
                acc += 2.0 * std::cos(wrap_phase(M * (theta[j - 1] - theta[k - 1])) + gamma);
            }
        }
        probs[static_cast<std::size_t>(o)] = acc / (static_cast<double>(n) * n);
    }
    return probs;
}

/// Outcome distribution with each coherence involving register j damped by
/// e^{-Gamma_j M}.
inline std::vector<double> noisy_outcome_probabilities(const CircuitSpec &spec, const NoiseModel &noise) {
    validate_noise(noise, spec.d());
    if (noise.noiseless()) return outcome_probabilities(spec);
    const int d = spec.d();
    const int n = d + 1;
    const auto M = static_cast<double>(spec.repetitions());
    const auto &theta = spec.theta();
    const auto &phi = spec.phi();
    std::vector<double> damp(static_cast<std::size_t>(n), 1.0);
    for (int j = 1; j <= d; ++j) damp[j] = std::exp(-noise.rate(j) * M);
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (int o = 0; o < n; ++o) {
        double acc = n;
        for (int j = 1; j <= d; ++j) {
            const double beta = phi[j] - phi[0] + kTwoPi * j * o / n;
            acc += 2.0 * damp[j] * std::cos(wrap_phase(M * theta[j - 1]) + beta);
        }
        for (int j = 1; j <= d; ++j) {
            for (int k = j + 1; k <= d; ++k) {
                const double gamma = phi[j] - phi[k] + kTwoPi * (j - k) * o / n;
                acc += 2.0 * damp[j] * damp[k] * std::cos(wrap_phase(M * (theta[j - 1] - theta[k - 1])) + gamma);
            }
        }
        probs[static_cast<std::size_t>(o)] = acc / (static_cast<double>(n) * n);
    }
    return probs;
}

/// Qudit phase-damping channel E(rho) = sum_j K_j rho K_j on the ancilla.
inline DensityMatrix apply_dephasing_channel(const DensityMatrix &rho, const NoiseModel &noise, std::int64_t M) {
    if (rho.rows() != rho.cols()) throw Error(ErrorCode::invalid_dimension, "density matrix must be square");
    const auto n = rho.rows();
    if (n < 2) throw Error(ErrorCode::invalid_dimension, "density matrix dimension must be d+1 >= 2");
    const int d = static_cast<int>(n) - 1;
    validate_noise(noise, d);
    if (M < 1) throw Error(ErrorCode::invalid_argument, "M must be >= 1");
    const auto m = static_cast<double>(M);

    GateMatrix k0 = GateMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) k0(j, j) = std::exp(-noise.rate(static_cast<int>(j)) * m);
    DensityMatrix out = k0 * rho * k0;
    for (int j = 1; j <= d; ++j) {
        GateMatrix kj = GateMatrix::Zero(n, n);
        kj(j, j) = std::sqrt(-std::expm1(-2.0 * noise.rate(j) * m));
        out += kj * rho * kj;
    }
    return out;
}

/// Probability of projecting the phase-imprinted NOON-like state
/// (|M,0..0> + ... + |0..0,M>)/sqrt(d+1), where mode j acquires
/// e^{iM(theta_j + phi_j)}, onto the outcome states |psi_o>.
///
/// Outcome o is labelled by the projector whose relative mode phases are
/// e^{-i 2pi j o/(d+1)}, which makes the labels coincide with the qudit
/// circuit: P_noon(theta, phi/M, M) == P(theta, phi, M).
inline std::vector<double> noon_outcome_probabilities(const PhasePoint &theta, const std::vector<double> &phi,
                                                      std::int64_t M) {
    const int d = static_cast<int>(theta.size());
    if (d < 1 || phi.size() != theta.size() + 1) {
        throw Error(ErrorCode::invalid_dimension, "expected d >= 1 phases and d+1 control phases");
    }
    if (M < 1) throw Error(ErrorCode::invalid_argument, "M must be >= 1");
    const int n = d + 1;
    const auto m = static_cast<double>(M);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));

    // The M-photon components |0..M..0> span an (d+1)-dimensional subspace.
    Eigen::VectorXcd state(n);
    for (int j = 0; j < n; ++j) {
        const double t = j == 0 ? 0.0 : theta[static_cast<std::size_t>(j - 1)];
        state(j) = norm * std::polar(1.0, m * (t + phi[static_cast<std::size_t>(j)]));
    }
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (int o = 0; o < n; ++o) {
        Eigen::VectorXcd psi(n);
        for (int j = 0; j < n; ++j) psi(j) = norm * detail::root_of_unity(-static_cast<long long>(j) * o, n);
        probs[static_cast<std::size_t>(o)] = std::norm(psi.dot(state));
    }
    return probs;
}

/// Register representation used by the state-vector oracle.
enum class RegisterBasis {
    diagonal,    ///< U = diag(1, e^{i theta_1}, ...), register states are basis vectors
    conjugated,  ///< U = V diag(...) V^dagger for a seeded Haar-random V
};

struct OracleOptions {
    RegisterBasis basis = RegisterBasis::diagonal;
    std::uint64_t seed = 0;
    /// Apply the controlled gate M times instead of once as U^M.
    bool repeated_application = false;
};

struct OracleResult {
    std::vector<double> probabilities;
    /// 1 - <register_in| rho_register_out |register_in>.
    double register_infidelity = 0.0;
};

namespace detail {

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
inline GateMatrix random_unitary(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    GateMatrix z(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) z(i, j) = Complex(normal(rng), normal(rng));
    }
    Eigen::HouseholderQR<GateMatrix> qr(z);
    GateMatrix q = qr.householderQ();
    GateMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        const double mag = std::abs(r(j, j));
        if (mag > 0.0) q.col(j) *= r(j, j) / mag;
    }
    return q;
}

/// Pure state of d+1 qudits of dimension n = d+1. Subsystem 0 is the ancilla
/// and is the most significant digit of the flat index.
class QuditRegisterState {
   public:
    QuditRegisterState(int subsystems, int dim) : subsystems_(subsystems), dim_(dim) {
        std::size_t size = 1;
        for (int s = 0; s < subsystems; ++s) size *= static_cast<std::size_t>(dim);
        amps_.assign(size, Complex(0.0, 0.0));
    }

    std::size_t size() const { return amps_.size(); }
    std::vector<Complex> &amplitudes() { return amps_; }
    const std::vector<Complex> &amplitudes() const { return amps_; }

    std::size_t stride(int subsystem) const {
        std::size_t s = 1;
        for (int t = subsystems_ - 1; t > subsystem; --t) s *= static_cast<std::size_t>(dim_);
        return s;
    }

    int digit(std::size_t index, int subsystem) const {
        return static_cast<int>((index / stride(subsystem)) % static_cast<std::size_t>(dim_));
    }

    /// Applies `op` to `target`, restricted to components where subsystem
    /// `control` equals `control_value` (control < 0: unconditional).
    void apply(const GateMatrix &op, int target, int control = -1, int control_value = 0) {
        const std::size_t st = stride(target);
        const std::size_t block = st * static_cast<std::size_t>(dim_);
        std::vector<Complex> in(static_cast<std::size_t>(dim_));
        for (std::size_t base = 0; base < amps_.size(); base += block) {
            for (std::size_t off = 0; off < st; ++off) {
                const std::size_t first = base + off;
                if (control >= 0 && digit(first, control) != control_value) continue;
                for (int a = 0; a < dim_; ++a) in[a] = amps_[first + a * st];
                for (int r = 0; r < dim_; ++r) {
                    Complex acc(0.0, 0.0);
                    for (int a = 0; a < dim_; ++a) acc += op(r, a) * in[a];
                    amps_[first + r * st] = acc;
                }
            }
        }
    }

   private:
    int subsystems_;
    int dim_;
    std::vector<Complex> amps_;
};

struct EvolvedCircuit {
    QuditRegisterState state;
    std::vector<Complex> register_initial;  // product state of the d register qudits
};

/// Ancilla prepared by H, phases imprinted by Z(phi) and the controlled-U^M
/// gate; the joint state right before the final Hadamard.
inline EvolvedCircuit evolve_to_imprinted(const CircuitSpec &spec, const OracleOptions &options) {
    const int d = spec.d();
    const int n = d + 1;
    const auto M = spec.repetitions();

    GateMatrix basis = GateMatrix::Identity(n, n);
    if (options.basis == RegisterBasis::conjugated) basis = random_unitary(n, options.seed);

    Eigen::VectorXcd eig(n);
    eig(0) = 1.0;
    for (int j = 1; j <= d; ++j) eig(j) = std::polar(1.0, spec.theta()[j - 1]);
    const GateMatrix u = basis * eig.asDiagonal() * basis.adjoint();
    Eigen::VectorXcd eig_m(n);
    eig_m(0) = 1.0;
    for (int j = 1; j <= d; ++j) eig_m(j) = std::polar(1.0, static_cast<double>(M) * spec.theta()[j - 1]);
    const GateMatrix u_m = basis * eig_m.asDiagonal() * basis.adjoint();
    if (max_unitarity_defect(u) > 1e-10 || max_unitarity_defect(u_m) > 1e-10) {
        throw Error(ErrorCode::internal_consistency, "constructed U is not unitary");
    }

    QuditRegisterState state(d + 1, n);
    // Register qudit j holds the eigenvector of U with eigenvalue e^{i theta_j}.
    std::vector<Complex> reg(1, Complex(1.0, 0.0));
    for (int j = 1; j <= d; ++j) {
        std::vector<Complex> next;
        next.reserve(reg.size() * static_cast<std::size_t>(n));
        for (const Complex &r : reg) {
            for (int a = 0; a < n; ++a) next.push_back(r * basis(a, j));
        }
        reg = std::move(next);
    }
    for (std::size_t i = 0; i < reg.size(); ++i) state.amplitudes()[i] = reg[i];

    state.apply(hadamard_matrix(d), 0);
    state.apply(phase_gate(spec.phi()), 0);
    for (int j = 1; j <= d; ++j) {
        if (options.repeated_application) {
            for (std::int64_t r = 0; r < M; ++r) state.apply(u, j, 0, j);
        } else {
            state.apply(u_m, j, 0, j);
        }
    }
    return {std::move(state), std::move(reg)};
}

inline std::vector<double> ancilla_marginal(const QuditRegisterState &state, int n) {
    std::vector<double> probs(static_cast<std::size_t>(n), 0.0);
    const std::size_t block = state.size() / static_cast<std::size_t>(n);
    for (int a = 0; a < n; ++a) {
        double p = 0.0;
        for (std::size_t r = 0; r < block; ++r) p += std::norm(state.amplitudes()[a * block + r]);
        probs[static_cast<std::size_t>(a)] = p;
    }
    return probs;
}

}  // namespace detail

/// Full state-vector simulation of ancilla and register through the circuit.
inline OracleResult simulate_circuit(const CircuitSpec &spec, const OracleOptions &options = {}) {
    const int d = spec.d();
    const int n = d + 1;
    auto evolved = detail::evolve_to_imprinted(spec, options);
    evolved.state.apply(hadamard_matrix(d), 0);

    OracleResult result;
    result.probabilities = detail::ancilla_marginal(evolved.state, n);

    // Register unchanged: sum over ancilla values of |<reg_in|psi_a>|^2 == 1.
    const std::size_t block = evolved.state.size() / static_cast<std::size_t>(n);
    double fidelity = 0.0;
    for (int a = 0; a < n; ++a) {
        Complex overlap(0.0, 0.0);
        for (std::size_t r = 0; r < block; ++r) {
            overlap += std::conj(evolved.register_initial[r]) * evolved.state.amplitudes()[a * block + r];
        }
        fidelity += std::norm(overlap);
    }
    result.register_infidelity = 1.0 - fidelity;
    return result;
}

inline std::vector<double> simulate_circuit_probabilities(const CircuitSpec &spec, const OracleOptions &options = {}) {
    return simulate_circuit(spec, options).probabilities;
}

/// Density-matrix route for the noisy circuit: the ancilla is traced out of
/// the joint state after phase imprinting, dephased by the Kraus channel and
/// rotated by the final Hadamard.
inline std::vector<double> simulate_noisy_circuit_probabilities(const CircuitSpec &spec, const NoiseModel &noise,
                                                                const OracleOptions &options = {}) {
    const int d = spec.d();
    const int n = d + 1;
    validate_noise(noise, d);
    auto evolved = detail::evolve_to_imprinted(spec, options);
    const std::size_t block = evolved.state.size() / static_cast<std::size_t>(n);
    const auto &amps = evolved.state.amplitudes();
    DensityMatrix rho = DensityMatrix::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            Complex acc(0.0, 0.0);
            for (std::size_t r = 0; r < block; ++r) acc += amps[a * block + r] * std::conj(amps[b * block + r]);
            rho(a, b) = acc;
        }
    }
    rho = apply_dephasing_channel(rho, noise, spec.repetitions());
    const GateMatrix h = hadamard_matrix(d);
    const DensityMatrix out = h * rho * h.adjoint();
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (int o = 0; o < n; ++o) probs[static_cast<std::size_t>(o)] = out(o, o).real();
    return probs;
}

}  // namespace qmpe
