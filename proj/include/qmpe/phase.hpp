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
#include <complex>
#include <numbers>
#include <vector>

namespace qmpe {

using Complex = std::complex<double>;

/// A d-vector of phases in radians: a true value, an estimate or a grid coordinate.
using PhasePoint = std::vector<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces an angle to [0, 2pi).
inline double wrap_phase(double x) {
    double r = std::fmod(x, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

/// Reduces an angle difference to [-pi, pi).
inline double wrap_difference(double x) {
    double r = wrap_phase(x + kPi) - kPi;
    return r;
}

/// Image of `x` modulo 2pi closest to `reference`.
inline double nearest_image(double x, double reference) {
    return reference + wrap_difference(x - reference);
}

/// e^{ix}, exact when x is an exact multiple of pi/2 so that equal roots of
/// unity built along different routes compare equal bit for bit.
inline Complex unit_phase(double x) {
    const double quarter = x / (kPi / 2.0);
    if (quarter == std::nearbyint(quarter) && std::abs(quarter) < 1e15) {
        long long q = static_cast<long long>(quarter) % 4;
        if (q < 0) q += 4;
        switch (q) {
            case 0: return {1.0, 0.0};
            case 1: return {0.0, 1.0};
            case 2: return {-1.0, 0.0};
            default: return {0.0, -1.0};
        }
    }
    return std::polar(1.0, x);
}

}  // namespace qmpe
