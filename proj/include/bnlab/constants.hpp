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

#ifndef BNLAB_CONSTANTS_HPP
#define BNLAB_CONSTANTS_HPP

#include <cstddef>

/// Thresholds and windows that the experiment recipes report against and
/// the acceptance suite asserts. Tightening a check is a one-line edit here.
namespace bnlab::thresholds {

// fig1a
inline constexpr double kFig1aMinSeparation = 10.0;     // no-BN / BN at the last layer
inline constexpr double kFig1aMaxPlateauCv = 0.5;       // stdev/mean over the plateau window
inline constexpr std::size_t kFig1aPlateauFrom = 100;
inline constexpr std::size_t kFig1aPlateauSplit = 300;  // early window [100,300], late [300,600]
inline constexpr double kFig1aWindowRatioTol = 0.5;     // late mean within ±50% of early mean
inline constexpr double kMixingMinRSquared = 0.9;

// fig1b
inline constexpr std::size_t kFig1bWindowAfter = 40;    // plateau over 40 < ℓ < 600
inline constexpr std::size_t kFig1bWindowBefore = 600;
inline constexpr double kFig1bSlope = -0.5;
inline constexpr double kFig1bSlopeTol = 0.15;
inline constexpr double kFig1bGuideLow = 0.4;           // plateau / (2n/sqrt(d))
inline constexpr double kFig1bGuideHigh = 2.5;

// Marchenko-Pastur bulk
inline constexpr double kMpBandSigmas = 3.0;            // band 1 ± 3·sqrt(n/d)
inline constexpr double kMpMinBandFraction = 0.95;
inline constexpr double kMpMaxKs = 0.15;
inline constexpr double kMpOutlierSigmas = 6.0;         // outlier if λ/median > 1 + 6·sqrt(n/d)
inline constexpr std::size_t kMpMinBulkEigenvalues = 1000;

// coupling
inline constexpr double kCouplingPlateauFactor = 5.0;   // plateau <= 5/sqrt(d), 0.177 at d = 800
inline constexpr std::size_t kCouplingWindowFrom = 50;
inline constexpr std::size_t kCouplingWindowTo = 200;
inline constexpr double kCouplingInputRatio = 2.0;      // plateaus of input pairs within 2x

// Monte Carlo agreement
inline constexpr double kStderrMultiple = 3.0;

// Gaussian products
inline constexpr double kLogdetSlopeRelTol = 0.15;
inline constexpr double kCollapseMaxRatio = 1e-3;

// algebraic identities
inline constexpr double kLogdetDecompositionTol = 1e-8;
inline constexpr double kCongruenceTol = 1e-8;
inline constexpr double kCharPolyTol = 1e-9;
inline constexpr double kTraceLawTol = 1e-10;

} // namespace bnlab::thresholds

#endif // BNLAB_CONSTANTS_HPP
