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

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "bnlab/constants.hpp"
#include "bnlab/meanfield.hpp"
#include "util.hpp"

using namespace bnlab;

namespace {

constexpr double kSe = thresholds::kStderrMultiple;

/// max_ij |a_ij - b_ij| - kSe·stderr, i.e. <= 0 when within the band.
double excess(const MfStepEstimate &est, const Matrix &expected) {
    return testing_util::max_abs_diff(est.G_next, expected) - kSe * est.stderr - 1e-12;
}

} // namespace

TEST(MfStep, IdentityProjectionIsIdentity) {
    RngStream s(1, 0);
    for (std::size_t n : {2u, 5u, 10u}) {
        const auto est = mf_step(Matrix::identity(n), Activation{}, NormKind::Projection, 50000, s);
        EXPECT_LE(excess(est, Matrix::identity(n)), 0.0);
        EXPECT_EQ(est.samples, 50000u);
    }
}

TEST(MfStep, IdentityCenteredIsCenteredProjector) {
    RngStream s(2, 0);
    for (std::size_t n : {3u, 6u}) {
        const auto est = mf_step(Matrix::identity(n), Activation{}, NormKind::Centered, 50000, s);
        EXPECT_LE(excess(est, centered_projector(n)), 0.0);
    }
}

TEST(MfStep, RejectsTooFewSamples) {
    RngStream s(3, 0);
    try {
        (void)mf_step(Matrix::identity(3), Activation{}, NormKind::Projection, 999, s);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::BadParameter);
    }
}

TEST(MfStep, RejectsNonPositiveDefinite) {
    RngStream s(3, 0);
    try {
        (void)mf_step(Matrix{{1, 2}, {2, 1}}, Activation{}, NormKind::Projection, 2000, s);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
    }
}

TEST(MfStep, Bsb1Closure) {
    RngStream s(4, 0);
    for (auto k : {ActivationKind::Relu, ActivationKind::Tanh, ActivationKind::Selu}) {
        const auto est = mf_step(bsb1(5, 1.3, 0.4), Activation(k), NormKind::Centered, 40000, s);
        double mean = 0;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j)
                if (i != j)
                    mean += est.G_next(i, j) / 20.0;
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                if (i != j) {
                    EXPECT_LT(std::abs(est.G_next(i, j) - mean), 4.0 * est.stderr);
                }
            }
        }
    }
}

TEST(MfStep, OddActivationKeepsOffDiagonalZero) {
    RngStream s(5, 0);
    for (auto k : {ActivationKind::Tanh, ActivationKind::Sin})
        for (double beta : {0.5, 1.0, 2.0}) {
            const auto est = mf_step(Matrix::identity(4) * beta, Activation(k), NormKind::Projection, 40000, s);
            for (std::size_t i = 0; i < 4; ++i) {
                for (std::size_t j = 0; j < 4; ++j) {
                    if (i != j) {
                        EXPECT_LT(std::abs(est.G_next(i, j)), kSe * est.stderr);
                    }
                }
            }
        }
}

TEST(MfStep, InvariantToScalingInput) {
    const Matrix g = bsb1(4, 1.0, 0.3);
    for (double c : {0.2, 5.0}) {
        RngStream a(6, 0), b(6, 0);
        const auto x = mf_step(g, Activation(ActivationKind::Tanh), NormKind::Centered, 20000, a);
        const auto y = mf_step(g * c, Activation(ActivationKind::Tanh), NormKind::Centered, 20000, b);
        EXPECT_LE(testing_util::max_abs_diff(x.G_next, y.G_next), kSe * std::max(x.stderr, y.stderr));
    }
}

TEST(MfStep, ReluFixedPointReproducesItself) {
    RngStream s(7, 0);
    const FixedPoint fp = solve_fixed_point(Activation(ActivationKind::Relu), NormKind::Centered, 6, s);
    RngStream t(7, 1);
    const auto est = mf_step(fp.G_star, Activation(ActivationKind::Relu), NormKind::Centered, 200000, t);
    const double band = kSe * std::sqrt(est.stderr * est.stderr + fp.mc_stderr * fp.mc_stderr);
    EXPECT_LE(testing_util::max_abs_diff(est.G_next, fp.G_star), band + fp.mc_stderr);
}

TEST(FixedPoint, IdentityProjection) {
    for (std::size_t n : {2u, 5u, 10u}) {
        RngStream s(8, n);
        const FixedPoint fp = solve_fixed_point(Activation{}, NormKind::Projection, n, s);
        EXPECT_NEAR(fp.b_star, 1.0, kSe * fp.b_stderr + 1e-12);
        EXPECT_NEAR(fp.c_star, 0.0, kSe * fp.c_stderr + 1e-12);
        EXPECT_LE(testing_util::max_abs_diff(fp.G_star, Matrix::identity(n)), 1e-2);
    }
}

TEST(FixedPoint, TanhProjectionIsScaledIdentity) {
    RngStream s(9, 0);
    const FixedPoint fp = solve_fixed_point(Activation(ActivationKind::Tanh), NormKind::Projection, 10, s);
    EXPECT_LT(std::abs(fp.c_star), kSe * fp.c_stderr);
    const oracle::Mc ref = oracle::beta_mc([](double x) { return std::tanh(x); }, 10, 2000000);
    EXPECT_NEAR(fp.b_star, ref.value,
                kSe * std::hypot(fp.b_stderr, ref.stderr) + FixedPointOptions{}.tol);
}

TEST(FixedPoint, SinProjectionHasZeroCorrelation) {
    RngStream s(10, 0);
    const FixedPoint fp = solve_fixed_point(Activation(ActivationKind::Sin), NormKind::Projection, 8, s);
    EXPECT_LT(std::abs(fp.c_star), kSe * fp.c_stderr);
}

TEST(FixedPoint, ReluCenteredStructure) {
    RngStream s(11, 0);
    const FixedPoint fp = solve_fixed_point(Activation(ActivationKind::Relu), NormKind::Centered, 10, s);
    EXPECT_NEAR(fp.b_star, 0.5, kSe * fp.b_stderr + 1e-12);
    EXPECT_GE(fp.c_star, -kSe * fp.c_stderr);
    EXPECT_LE(fp.c_star, 0.5 + kSe * fp.c_stderr);
    ASSERT_EQ(fp.centered_eigenvalues.size(), 9u);
    for (double lam : fp.centered_eigenvalues) {
        EXPECT_GE(lam, 0.25 - kSe * fp.mc_stderr);
        EXPECT_LE(lam, 0.5 + kSe * fp.mc_stderr);
    }
    // Full-space top eigenvalue along 1ₙ, reported separately.
    EXPECT_NEAR(fp.eigenvalues.front(), fp.b_star * (1 - fp.c_star + fp.c_star * 10), 1e-12);
}

TEST(FixedPoint, Bsb1FormAndEigenvalues) {
    RngStream s(12, 0);
    const FixedPoint fp = solve_fixed_point(Activation(ActivationKind::Celu), NormKind::Centered, 6, s);
    EXPECT_TRUE(fp.G_star == bsb1(6, fp.b_star, fp.c_star));
    const double lo = fp.b_star * (1 - fp.c_star), hi = fp.b_star * (1 - fp.c_star + 6 * fp.c_star);
    std::vector<double> expected(5, lo);
    expected.push_back(hi);
    std::sort(expected.begin(), expected.end(), std::greater<>());
    for (std::size_t i = 0; i < 6; ++i)
        EXPECT_NEAR(fp.eigenvalues[i], expected[i], 1e-12);
}

TEST(FixedPoint, CenteredIdentityHasNegativeCorrelation) {
    RngStream s(13, 0);
    const FixedPoint fp = solve_fixed_point(Activation{}, NormKind::Centered, 5, s);
    EXPECT_NEAR(fp.c_star, -0.25, 1e-2);
    EXPECT_NEAR(inverse_sqrt_norm(fp, NormKind::Centered), std::sqrt(4.0 / 5.0), 1e-2);
}

TEST(FixedPoint, DeterministicGivenSeed) {
    RngStream a(14, 0), b(14, 0);
    const auto x = solve_fixed_point(Activation(ActivationKind::Selu), NormKind::Centered, 4, a);
    const auto y = solve_fixed_point(Activation(ActivationKind::Selu), NormKind::Centered, 4, b);
    EXPECT_EQ(x.b_star, y.b_star);
    EXPECT_EQ(x.c_star, y.c_star);
    EXPECT_EQ(x.iterations, y.iterations);
}

TEST(FixedPoint, NoConvergenceWhenCapped) {
    RngStream s(15, 0);
    FixedPointOptions opt;
    opt.max_iter = 1;
    opt.samples = 5000;
    try {
        (void)solve_fixed_point(Activation(ActivationKind::Tanh), NormKind::Projection, 4, s, opt);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
        EXPECT_NE(std::string(e.what()).find("c="), std::string::npos);
    }
}

TEST(FixedPoint, UnnormalizedSigmoidCollapses) {
    // Without normalization the positive sigmoid mean dominates and c → 1.
    RngStream s(16, 0);
    FixedPointOptions opt;
    opt.samples = 20000;
    opt.tol = 1e-12;
    opt.max_iter = 2000;
    try {
        (void)solve_fixed_point(Activation(ActivationKind::Sigmoid), NormKind::None, 4, s, opt);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateFixedPoint) << e.what();
    }
}

TEST(BetaF, IdentityIsOne) {
    RngStream s(17, 0);
    for (std::size_t n : {2u, 7u}) {
        const McValue b = beta_f(Activation{}, n, 200000, s);
        EXPECT_NEAR(b.value, 1.0, kSe * b.stderr + 1e-12);
    }
}

TEST(BetaF, TanhMatchesTenMillionSampleOracle) {
    RngStream s(18, 0);
    const McValue b = beta_f(Activation(ActivationKind::Tanh), 10, 1000000, s);
    const oracle::Mc ref = oracle::beta_mc([](double x) { return std::tanh(x); }, 10, 10000000);
    EXPECT_NEAR(b.value, ref.value, kSe * std::hypot(b.stderr, ref.stderr));
}

TEST(BetaF, SinTwoDimensionalQuadrature) {
    // With n = 2, w₁/√((w₁²+w₂²)/2) = √2·cos θ for the polar angle θ.
    const int m = 200000;
    double q = 0;
    for (int k = 0; k < m; ++k) {
        const double t = 2 * std::numbers::pi * (k + 0.5) / m;
        const double v = std::sin(std::sqrt(2.0) * std::cos(t));
        q += v * v / m;
    }
    RngStream s(19, 0);
    const McValue b = beta_f(Activation(ActivationKind::Sin), 2, 1000000, s);
    EXPECT_NEAR(b.value, q, kSe * b.stderr);
}

TEST(BetaF, RejectsNonOdd) {
    RngStream s(20, 0);
    try {
        (void)beta_f(Activation(ActivationKind::Relu), 4, 1000, s);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NotOddActivation);
    }
}

TEST(Recurrence, FixedPointIsStationary) {
    RngStream s(21, 0);
    const Matrix g = Matrix::identity(4);
    const auto tr = mf_recurrence_trace(g, Activation{}, NormKind::Projection, 5, 20000, s);
    for (const auto &m : tr)
        EXPECT_LE(testing_util::max_abs_diff(m, g), 0.05);
}

TEST(Recurrence, TanhCorrelationDecays) {
    RngStream s(22, 0);
    const auto tr = mf_recurrence_trace(bsb1(5, 1.0, 0.9), Activation(ActivationKind::Tanh),
                                        NormKind::Projection, 20, 100000, s);
    auto corr = [](const Matrix &m) {
        double off = 0, diag = 0;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j)
                (i == j ? diag : off) += m(i, j);
        return off / (m.rows() - 1) / diag;
    };
    int violations = 0;
    double prev = corr(tr.front());
    for (std::size_t k = 1; k < tr.size(); ++k) {
        const double c = corr(tr[k]);
        if (!(c < prev))
            ++violations;
        prev = c;
    }
    EXPECT_LE(violations, 1);
    EXPECT_LT(std::abs(corr(tr.back())), 0.05);
}

TEST(Recurrence, IdentityConvergesToIdentityFromRandomSpd) {
    std::mt19937_64 rng(23);
    const Matrix g0 = testing_util::to_matrix(oracle::random_spd(rng, 4, 1.0));
    RngStream s(23, 0);
    const auto tr = mf_recurrence_trace(g0, Activation{}, NormKind::Projection, 30, 50000, s);
    const Matrix id = Matrix::identity(4);
    EXPECT_LT(frobenius_norm(tr.back() - id), frobenius_norm(tr.front() - id));
    EXPECT_LT(frobenius_norm(tr.back() - id), 0.1);
}
