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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "bnlab/chain.hpp"
#include "util.hpp"

using namespace bnlab;
using testing_util::max_abs_diff;

namespace {

Matrix seeded_input(std::size_t d, std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Matrix h(d, n);
    for (double &x : h.entries())
        x = g(rng);
    return h;
}

/// Straight-line scalar-loop Gram: center each row, divide by its population
/// standard deviation, apply relu, then (1/d)·Σ_rows xᵀx.
std::vector<std::vector<double>> relu_centered_gram_oracle(const Matrix &h) {
    const std::size_t d = h.rows(), n = h.cols();
    std::vector<std::vector<double>> g(n, std::vector<double>(n, 0.0));
    for (std::size_t r = 0; r < d; ++r) {
        double mean = 0;
        for (std::size_t j = 0; j < n; ++j)
            mean += h(r, j);
        mean /= n;
        double var = 0;
        for (std::size_t j = 0; j < n; ++j)
            var += (h(r, j) - mean) * (h(r, j) - mean);
        var /= n;
        std::vector<double> x(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double z = (h(r, j) - mean) / std::sqrt(var);
            x[j] = z > 0 ? z : 0;
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                g[i][j] += x[i] * x[j] / d;
    }
    return g;
}

} // namespace

TEST(NormalizeRows, ProjectionExample) {
    const Matrix r = normalize_rows(Matrix{{3, 0, 0, 0}}, NormKind::Projection);
    EXPECT_DOUBLE_EQ(r(0, 0), 2.0);
    for (std::size_t j = 1; j < 4; ++j)
        EXPECT_EQ(r(0, j), 0.0);
}

TEST(NormalizeRows, CenteredExample) {
    const Matrix r = normalize_rows(Matrix{{1, 2, 3}}, NormKind::Centered);
    EXPECT_NEAR(r(0, 0), -std::sqrt(1.5), 1e-15);
    EXPECT_NEAR(r(0, 1), 0.0, 1e-15);
    EXPECT_NEAR(r(0, 2), std::sqrt(1.5), 1e-15);
}

TEST(NormalizeRows, ZeroVarianceRowCarriesIndex) {
    try {
        (void)normalize_rows(Matrix{{1, 2, 3}, {5, 5, 5}}, NormKind::Centered);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroVarianceRow);
        EXPECT_EQ(e.index(), 1);
    }
    try {
        (void)normalize_rows(Matrix{{0, 0}, {1, 2}}, NormKind::Projection);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroVarianceRow);
        EXPECT_EQ(e.index(), 0);
    }
}

TEST(NormalizeRows, RowInvariants) {
    const Matrix h = seeded_input(200, 7, 1);
    const Matrix p = normalize_rows(h, NormKind::Projection);
    const Matrix c = normalize_rows(h, NormKind::Centered);
    for (std::size_t r = 0; r < h.rows(); ++r) {
        double sp = 0, sc = 0, mc = 0;
        for (std::size_t j = 0; j < 7; ++j) {
            sp += p(r, j) * p(r, j);
            sc += c(r, j) * c(r, j);
            mc += c(r, j);
        }
        EXPECT_NEAR(sp, 7.0, 1e-10 * 7.0);
        EXPECT_NEAR(sc, 7.0, 1e-10 * 7.0);
        EXPECT_NEAR(mc / 7.0, 0.0, 1e-12);
    }
    EXPECT_TRUE(normalize_rows(h, NormKind::None) == h);
}

TEST(ChainConfig, Validation) {
    ChainConfig ok;
    EXPECT_NO_THROW(ok.validate());
    auto bad = [](auto mutate) {
        ChainConfig c;
        mutate(c);
        try {
            c.validate();
            return false;
        } catch (const Error &e) {
            return e.code() == ErrorCode::BadParameter;
        }
    };
    EXPECT_TRUE(bad([](ChainConfig &c) { c.n = 1; }));
    EXPECT_TRUE(bad([](ChainConfig &c) { c.n = 5; c.d = 3; }));
    EXPECT_TRUE(bad([](ChainConfig &c) { c.depth = 0; }));
    EXPECT_TRUE(bad([](ChainConfig &c) { c.trials = 0; }));
}

TEST(Step, DeterministicAndConsumesDSquaredDraws) {
    ChainConfig cfg;
    cfg.n = 3;
    cfg.d = 40;
    const Matrix h = seeded_input(40, 3, 2);
    RngStream a(5, 0), b(5, 0), c(5, 0);
    const Matrix x = step(h, cfg, a);
    EXPECT_TRUE(x == step(h, cfg, b));
    for (std::size_t k = 0; k < 40 * 40; ++k)
        (void)c.normal();
    EXPECT_EQ(a.next_u64(), c.next_u64());
    EXPECT_EQ(x.rows(), 40u);
    EXPECT_EQ(x.cols(), 3u);
}

TEST(Step, SecondMomentPreservedWithoutNormalization) {
    // E[(1/d)‖W h‖_F²] = (1/d)‖h‖_F² for W ~ N(0, 1/d).
    const std::size_t d = 8, n = 3, reps = 10000;
    const Matrix h = seeded_input(d, n, 3);
    const double target = frobenius_norm(h) * frobenius_norm(h) / d;
    RngStream s(6, 0);
    double sum = 0, sum_sq = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        const Matrix y = step(h, Activation{}, NormKind::None, s);
        const double v = frobenius_norm(y) * frobenius_norm(y) / d;
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum_sq / reps - mean * mean) / reps);
    EXPECT_NEAR(mean, target, 3.0 * se);
}

TEST(Step, WidthOneGivesRankOneGram) {
    const Matrix h{{0.3, -1.2, 2.0, 0.5}};
    RngStream s(7, 0);
    const Matrix y = step(h, Activation{}, NormKind::Projection, s);
    EXPECT_EQ(y.rows(), 1u);
    const Matrix g = gram(y, Activation{}, NormKind::Projection);
    EXPECT_NEAR(trace(g), 4.0, 1e-12);
    const auto e = eigenvalues(g);
    EXPECT_NEAR(e[0], 4.0, 1e-12);
    for (std::size_t i = 1; i < 4; ++i)
        EXPECT_NEAR(e[i], 0.0, 1e-12);
}

TEST(Gram, TraceLawForIdentity) {
    const Matrix h = seeded_input(300, 6, 4);
    for (NormKind k : {NormKind::Projection, NormKind::Centered})
        EXPECT_NEAR(trace(gram(h, Activation{}, k)), 6.0, 1e-10);
}

TEST(Gram, ReluCenteredMatchesScalarLoopOracle) {
    const Matrix h = seeded_input(50, 3, 20240611);
    const Matrix g = gram(h, Activation(ActivationKind::Relu), NormKind::Centered);
    EXPECT_LE(max_abs_diff(g, testing_util::to_matrix(relu_centered_gram_oracle(h))), 1e-13);
}

TEST(Run, DepthZeroHoldsOnlyInputGram) {
    ChainConfig cfg;
    cfg.n = 4;
    cfg.d = 30;
    cfg.depth = 0;
    const Matrix in = make_input(InputKind::Orthogonal, 4, 30, 1);
    const Matrix ref = centered_projector(4);
    const GramTrace t = run_trial(cfg, in, &ref, 0);
    ASSERT_EQ(t.layers.size(), 1u);
    EXPECT_LE(max_abs_diff(t.layers[0].gram, gram(in, cfg)), 0.0);
    EXPECT_DOUBLE_EQ(t.layers[0].frob_err, frobenius_norm(gram(in, cfg) - ref));
}

TEST(Run, TrialUsesItsOwnStream) {
    ChainConfig cfg;
    cfg.n = 3;
    cfg.d = 20;
    cfg.depth = 4;
    cfg.trials = 3;
    cfg.master_seed = 17;
    cfg.activation = Activation(ActivationKind::Tanh);
    const Matrix in = make_input(InputKind::Orthogonal, 3, 20, 17);
    const auto traces = run(cfg, in);
    for (std::size_t t = 0; t < 3; ++t) {
        RngStream s(17, t);
        Matrix h = in;
        for (std::size_t l = 0; l < 4; ++l)
            h = step(h, cfg, s);
        EXPECT_TRUE(traces[t].layers.back().gram == gram(h, cfg));
    }
}

TEST(Run, WorkerCountDoesNotChangeResults) {
    ChainConfig cfg;
    cfg.n = 4;
    cfg.d = 30;
    cfg.depth = 10;
    cfg.trials = 6;
    cfg.activation = Activation(ActivationKind::Selu);
    const Matrix in = make_input(InputKind::Graded, 4, 30, 2);
    const auto a = run(cfg, in, std::nullopt, 1);
    const auto b = run(cfg, in, std::nullopt, 4);
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t l = 0; l <= 10; ++l)
            ASSERT_TRUE(a[t].layers[l].gram == b[t].layers[l].gram);
}

TEST(Run, RejectsRankDeficientInput) {
    ChainConfig cfg;
    cfg.n = 3;
    cfg.d = 10;
    cfg.depth = 2;
    cfg.trials = 1;
    Matrix in = seeded_input(10, 3, 5);
    for (std::size_t r = 0; r < 10; ++r)
        in(r, 2) = in(r, 0) + in(r, 1);
    try {
        (void)run(cfg, in);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::RankDeficientInput);
    }
}

TEST(Run, GramsArePsdAndSymmetric) {
    for (auto k : kActivationSet) {
        ChainConfig cfg;
        cfg.n = 6;
        cfg.d = 60;
        cfg.depth = 15;
        cfg.trials = 1;
        cfg.activation = Activation(k);
        const auto tr = run(cfg, make_input(InputKind::Correlated, 6, 60, 3));
        for (const auto &layer : tr[0].layers) {
            EXPECT_TRUE(is_symmetric(layer.gram));
            const auto &e = layer.spectrum.eigenvalues;
            EXPECT_GE(e.back(), -1e-10 * e.front());
        }
    }
}

TEST(Run, CenteredIdentityKillsOnesDirection) {
    ChainConfig cfg;
    cfg.n = 5;
    cfg.d = 80;
    cfg.depth = 20;
    cfg.trials = 2;
    const auto tr = run(cfg, make_input(InputKind::Orthogonal, 5, 80, 4));
    for (const auto &t : tr)
        for (const auto &layer : t.layers) {
            const Matrix ones(5, 1, 1.0);
            EXPECT_LE(frobenius_norm(matmul(layer.gram, ones)), 1e-8 * frobenius_norm(layer.gram));
            EXPECT_NEAR(trace(layer.gram), 5.0, 1e-10);
        }
}

TEST(Run, TraceLawUnderProjection) {
    ChainConfig cfg;
    cfg.n = 5;
    cfg.d = 80;
    cfg.depth = 20;
    cfg.trials = 1;
    cfg.norm = NormKind::Projection;
    const auto tr = run(cfg, make_input(InputKind::Graded, 5, 80, 4));
    for (const auto &layer : tr[0].layers)
        EXPECT_NEAR(trace(layer.gram), 5.0, 1e-10);
}

TEST(Run, PermutationEquivariance) {
    ChainConfig cfg;
    cfg.n = 4;
    cfg.d = 25;
    cfg.depth = 6;
    cfg.trials = 1;
    cfg.activation = Activation(ActivationKind::Relu);
    const Matrix in = make_input(InputKind::Correlated, 4, 25, 9);
    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    Matrix pin(25, 4);
    for (std::size_t r = 0; r < 25; ++r)
        for (std::size_t j = 0; j < 4; ++j)
            pin(r, j) = in(r, perm[j]);
    const auto a = run(cfg, in)[0];
    const auto b = run(cfg, pin)[0];
    for (std::size_t l = 0; l <= 6; ++l)
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                EXPECT_NEAR(b.layers[l].gram(i, j), a.layers[l].gram(perm[i], perm[j]), 1e-12);
}

TEST(Run, NoNormalizationErrorGrows) {
    ChainConfig cfg;
    cfg.n = 5;
    cfg.d = 300;
    cfg.depth = 200;
    cfg.trials = 10;
    cfg.norm = NormKind::None;
    const auto tr = run(cfg, make_input(InputKind::Orthogonal, 5, 300, 1), Matrix::identity(5));
    std::vector<double> at20, at200;
    for (const auto &t : tr) {
        at20.push_back(t.layers[20].frob_err);
        at200.push_back(t.layers[200].frob_err);
    }
    std::sort(at20.begin(), at20.end());
    std::sort(at200.begin(), at200.end());
    EXPECT_GT((at200[4] + at200[5]) / 2, (at20[4] + at20[5]) / 2);
}

TEST(Inputs, GramsMatchTheirKind) {
    const std::size_t n = 5, d = 100;
    const Matrix o = make_input(InputKind::Orthogonal, n, d, 3);
    EXPECT_LE(max_abs_diff(gram_of_columns(o, 1.0 / d), Matrix::identity(n)), 1e-12);
    const Matrix c = make_input(InputKind::Correlated, n, d, 3);
    const Matrix gc = gram_of_columns(c, 1.0 / d);
    EXPECT_NEAR(gc(0, 1), 0.9, 1e-12);
    const Matrix g = make_input(InputKind::Graded, n, d, 3);
    EXPECT_NEAR(condition_number(gram_of_columns(g, 1.0 / d)), 1e4, 1e-6 * 1e4);
    for (std::size_t r = 0; r < d; ++r) {
        double s = 0;
        for (std::size_t j = 0; j < n; ++j)
            s += o(r, j) * o(r, j);
        EXPECT_GT(s, 0.0);
    }
}

TEST(Inputs, CenteredProjectorIsIdentityFixedPoint) {
    const Matrix p = centered_projector(5);
    EXPECT_NEAR(trace(p), 5.0, 1e-14);
    const auto e = eigenvalues(p);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_NEAR(e[i], 1.25, 1e-12);
    EXPECT_NEAR(e[4], 0.0, 1e-12);
}
