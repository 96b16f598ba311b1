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

#include <stdexcept>
#include <string>

namespace qmpe {

enum class ErrorCode {
    invalid_dimension,
    invalid_noise,
    invalid_argument,
    resolution,
    internal_consistency,
    undefined_mean,
    degenerate_update,
    degenerate_cut,
    psd_violation,
    fit_impossible,
    not_applicable,
};

inline const char *error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_dimension: return "invalid-dimension";
        case ErrorCode::invalid_noise: return "invalid-noise";
        case ErrorCode::invalid_argument: return "invalid-argument";
        case ErrorCode::resolution: return "resolution";
        case ErrorCode::internal_consistency: return "internal-consistency";
        case ErrorCode::undefined_mean: return "undefined-mean";
        case ErrorCode::degenerate_update: return "degenerate-update";
        case ErrorCode::degenerate_cut: return "degenerate-cut";
        case ErrorCode::psd_violation: return "psd-violation";
        case ErrorCode::fit_impossible: return "fit-impossible";
        case ErrorCode::not_applicable: return "not-applicable";
    }
    return "unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

   private:
    ErrorCode code_;
};

}  // namespace qmpe
