/*
 * Copyright (C) 2026 The bnlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef BNLAB_ERROR_HPP
#define BNLAB_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bnlab {

enum class ErrorCode {
    NonSquare,
    NonFinite,
    NotPositiveDefinite,
    Singular,
    ShapeMismatch,
    NonPositiveVariance,
    ZeroVarianceRow,
    RankDeficientInput,
    NoConvergence,
    DegenerateFixedPoint,
    NotOddActivation,
    BadRatio,
    TooFewEigenvalues,
    LengthMismatch,
    NonPositiveReference,
    BadParameter,
    BadShape,
    ZeroRow,
    NoTransient,
    UnknownName,
    Io,
};

constexpr std::string_view error_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::ZeroVarianceRow: return "ZeroVarianceRow";
    case ErrorCode::RankDeficientInput: return "RankDeficientInput";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateFixedPoint: return "DegenerateFixedPoint";
    case ErrorCode::NotOddActivation: return "NotOddActivation";
    case ErrorCode::BadRatio: return "BadRatio";
    case ErrorCode::TooFewEigenvalues: return "TooFewEigenvalues";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonPositiveReference: return "NonPositiveReference";
    case ErrorCode::BadParameter: return "BadParameter";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::NoTransient: return "NoTransient";
    case ErrorCode::UnknownName: return "UnknownName";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library. `index()` carries the offending row
/// for ZeroVarianceRow / ZeroRow and is -1 otherwise.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what, long index = -1)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code),
          index_(index) {}

    ErrorCode code() const noexcept { return code_; }
    long index() const noexcept { return index_; }

private:
    ErrorCode code_;
    long index_;
};

} // namespace bnlab

#endif // BNLAB_ERROR_HPP
