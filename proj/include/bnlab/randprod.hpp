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

#ifndef BNLAB_RANDPROD_HPP
#define BNLAB_RANDPROD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "bnlab/chain.hpp"
#include "bnlab/error.hpp"
#include "bnlab/linalg.hpp"
#include "bnlab/parallel.hpp"
#include "bnlab/random.hpp"

namespace bnlab {

/// Digamma for x > 0: upward recurrence to x >= 10, then the asymptotic series.
inline double digamma(double x) {
    if (!(x > 0.0))
        throw Error(ErrorCode::BadParameter, "digamma implemented for x > 0 only");
    double r = 0.0;
    while (x < 10.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    const double f = 1.0 / (x * x);
    r += std::log(x) - 0.5 / x -
         f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f * (1.0 / 132)))));
    return r;
}

/// ∏_{i<n} (d - i)/d: E det(GᵀG) for G d×n with N(0, 1/d) entries.
inline double wishart_det_exact(std::size_t n, std::size_t d) {
    double p = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        p *= static_cast<double>(d - i) / static_cast<double>(d);
    return p;
}

/// Σ_{i<n} [ψ((d-i)/2) + ln 2 - ln d]: E logdet(GᵀG), the per-layer drift of
/// the product's log-determinant.
inline double wishart_logdet_mean(std::size_t n, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        s += digamma(0.5 * static_cast<double>(d - i)) + std::numbers::ln2 -
             std::log(static_cast<double>(d));
    return s;
}

struct WishartDetEstimate {
    double mc_mean = 0.0;
    double stderr = 0.0;
    double exact = 0.0;
    std::size_t samples = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
};

inline WishartDetEstimate wishart_det_mean(std::size_t n, std::size_t d, std::size_t samples,
                                           RngStream &stream) {
    if (n < 1 || d < n)
        throw Error(ErrorCode::BadShape, "wishart_det_mean needs 1 <= n <= d");
    if (samples < 2)
        throw Error(ErrorCode::BadParameter, "wishart_det_mean needs at least two samples");
    const double var = 1.0 / static_cast<double>(d);
    WishartDetEstimate est;
    for (std::size_t s = 0; s < samples; ++s) {
        const Matrix g = gaussian_matrix(stream, d, n, var);
        const double det = determinant(gram_of_columns(g));
        est.sum += det;
        est.sum_sq += det * det;
    }
    est.samples = samples;
    const double m = static_cast<double>(samples);
    est.mc_mean = est.sum / m;
    const double v = std::max(est.sum_sq / m - est.mc_mean * est.mc_mean, 0.0) * m / (m - 1.0);
    est.stderr = std::sqrt(v / m);
    est.exact = wishart_det_exact(n, d);
    return est;
}

/// Pools several estimates of the same (n, d), in the given order.
inline WishartDetEstimate pool(const std::vector<WishartDetEstimate> &parts) {
    WishartDetEstimate out;
    for (const auto &p : parts) {
        out.sum += p.sum;
        out.sum_sq += p.sum_sq;
        out.samples += p.samples;
        out.exact = p.exact;
    }
    const double m = static_cast<double>(out.samples);
    if (m > 1.0) {
        out.mc_mean = out.sum / m;
        const double v = std::max(out.sum_sq / m - out.mc_mean * out.mc_mean, 0.0) * m / (m - 1.0);
        out.stderr = std::sqrt(v / m);
    }
    return out;
}

struct ProductLayer {
    double logdet = 0.0;         ///< logdet(X_ℓᵀX_ℓ), from the tracked triangular factor
    double logdet_increment = 0.0; ///< logdet((G Q)ᵀ(G Q)) of this step
    double condition = 1.0;      ///< s₁/s_n of X_ℓ
    double s1 = 1.0;
    double s2 = 1.0;
};

struct ProductTrace {
    std::size_t trial = 0;
    std::vector<ProductLayer> layers; ///< depth + 1 entries, layer 0 is the input
    long underflow_layer = -1;
};

inline constexpr std::size_t kRescaleEvery = 25;

/*
 * X_ℓ = G_ℓ ⋯ G_1 X_0 with X_0 the first n columns of I_d, kept in factored
 * form X_ℓ = Q_ℓ · T_ℓ · e^{scale_ℓ}: Q_ℓ has orthonormal columns, T_ℓ is upper
 * triangular. Each step multiplies G into Q and re-factors by thin QR; T is
 * rescaled every 25 steps so that determinants stay in the log domain.
 */
inline ProductTrace product_chain_trial(std::size_t n, std::size_t d, std::size_t depth,
                                        RngStream &stream) {
    if (n < 1 || d < n)
        throw Error(ErrorCode::BadShape, "product_chain needs 1 <= n <= d");
    ProductTrace trace;
    trace.layers.reserve(depth + 1);
    Matrix q(d, n);
    for (std::size_t i = 0; i < n; ++i)
        q(i, i) = 1.0;
    Matrix t = Matrix::identity(n);
    double log_scale = 0.0;
    trace.layers.push_back(ProductLayer{});

    for (std::size_t layer = 1; layer <= depth; ++layer) {
        const Matrix y = random_layer(q, stream);
        ProductLayer rec;
        rec.logdet_increment = logdet(gram_of_columns(y));
        auto [qn, r] = thin_qr(y);
        q = std::move(qn);
        t = matmul(r, t);
        if (layer % kRescaleEvery == 0) {
            double mx = 0.0;
            for (double v : t.entries())
                mx = std::max(mx, std::abs(v));
            if (mx > 0.0 && std::isfinite(mx)) {
                t *= 1.0 / mx;
                log_scale += std::log(mx);
            }
        }
        double ld = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            ld += std::log(std::abs(t(i, i)));
        rec.logdet = 2.0 * (ld + static_cast<double>(n) * log_scale);
        const auto s = singular_values_jacobi(t);
        const double scale = std::exp(log_scale);
        rec.s1 = s.front() * scale;
        rec.s2 = (n > 1 ? s[1] : s.front()) * scale;
        rec.condition = s.back() > 0.0 ? s.front() / s.back()
                                       : std::numeric_limits<double>::infinity();
        if (trace.underflow_layer < 0 && (!std::isfinite(rec.logdet) || s.back() == 0.0))
            trace.underflow_layer = static_cast<long>(layer);
        trace.layers.push_back(rec);
    }
    return trace;
}

/// Trials of the Gaussian product; trial t uses stream (master_seed, t).
inline std::vector<ProductTrace> product_chain(std::size_t n, std::size_t d, std::size_t depth,
                                               std::size_t trials, std::uint64_t master_seed,
                                               std::size_t workers = 1) {
    std::vector<ProductTrace> out(trials);
    parallel_for(trials, workers, [&](std::size_t k) {
        RngStream stream(master_seed, k);
        out[k] = product_chain_trial(n, d, depth, stream);
        out[k].trial = k;
    });
    return out;
}

/// One draw of G (d×d, N(0, 1/d)), then
///   |logdet(Ĉ) - (-2Σ log‖(GX)_i‖ + logdet(GᵀG) + logdet(XᵀX))|
/// where Ĉ = X̂ᵀX̂ and X̂ is GX with unit rows. The identity is exact when
/// X is square (d = n); for d > n, GᵀG is d×d and the two sides differ.
inline double logdet_decomposition_check(const Matrix &x, RngStream &stream) {
    const std::size_t d = x.rows();
    const std::size_t n = x.cols();
    if (d < n)
        throw Error(ErrorCode::BadShape, "X must be d x n with d >= n");
    const Matrix g = gaussian_matrix(stream, d, d, 1.0 / static_cast<double>(d));
    Matrix gx = matmul(g, x);
    double log_norms = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
        auto row = gx.row(r);
        double s = 0.0;
        for (double v : row)
            s += v * v;
        if (!(s > 0.0))
            throw Error(ErrorCode::ZeroRow, "GX has a zero row", static_cast<long>(r));
        const double nrm = std::sqrt(s);
        log_norms += std::log(nrm);
        for (double &v : row)
            v /= nrm;
    }
    const double lhs = logdet(gram_of_columns(gx));
    const double rhs = -2.0 * log_norms + logdet(gram_of_columns(g)) + logdet(gram_of_columns(x));
    return std::abs(lhs - rhs);
}

/// exp(3nℓ/(2d)).
inline double union_bound(std::size_t n, std::size_t d, std::size_t layer) {
    return std::exp(3.0 * static_cast<double>(n) * static_cast<double>(layer) /
                    (2.0 * static_cast<double>(d)));
}

struct UnionBoundPoint {
    std::size_t layer = 0;
    double mean_deviation = 0.0; ///< mean over trials of ‖G_ℓ - I‖ (operator norm)
    double median_deviation = 0.0;
    double bound = 1.0;
};

/// ‖G - I‖ in operator norm, read off the spectrum of symmetric G.
inline double identity_deviation(const Spectrum &s) {
    double worst = 0.0;
    for (double lam : s.eigenvalues)
        worst = std::max(worst, std::abs(lam - 1.0));
    return worst;
}

/// Per-layer ‖G_ℓ - I‖ of the unnormalized linear chain from an orthogonal
/// input, one trace per trial (trial t on stream (master_seed, t)).
inline std::vector<std::vector<double>> identity_chain_deviations(std::size_t n, std::size_t d,
                                                                  std::size_t depth,
                                                                  std::size_t trials,
                                                                  std::uint64_t master_seed,
                                                                  std::size_t workers = 1) {
    ChainConfig cfg;
    cfg.n = n;
    cfg.d = d;
    cfg.depth = depth;
    cfg.trials = trials;
    cfg.norm = NormKind::None;
    cfg.master_seed = master_seed;
    const Matrix input = make_input(InputKind::Orthogonal, n, d, master_seed);
    std::vector<std::vector<double>> out(trials);
    parallel_for(trials, workers, [&](std::size_t t) {
        const GramTrace tr = run_trial(cfg, input, nullptr, t);
        for (const auto &layer : tr.layers)
            out[t].push_back(identity_deviation(layer.spectrum));
    });
    return out;
}

/// Mean/median of ‖G_ℓ - I‖ at each requested depth, next to exp(3nℓ/(2d)).
inline std::vector<UnionBoundPoint> union_bound_curve(std::size_t n, std::size_t d,
                                                      const std::vector<std::size_t> &depths,
                                                      std::size_t trials,
                                                      std::uint64_t master_seed,
                                                      std::size_t workers = 1) {
    std::size_t max_depth = 0;
    for (auto l : depths)
        max_depth = std::max(max_depth, l);
    const auto dev = identity_chain_deviations(n, d, std::max<std::size_t>(max_depth, 1), trials,
                                               master_seed, workers);
    std::vector<UnionBoundPoint> out;
    for (auto l : depths) {
        UnionBoundPoint p;
        p.layer = l;
        std::vector<double> vals;
        for (const auto &tr : dev)
            vals.push_back(tr[l]);
        double s = 0.0;
        for (double v : vals)
            s += v;
        p.mean_deviation = s / static_cast<double>(vals.size());
        std::sort(vals.begin(), vals.end());
        const std::size_t k = vals.size() / 2;
        p.median_deviation = vals.size() % 2 ? vals[k] : 0.5 * (vals[k - 1] + vals[k]);
        p.bound = union_bound(n, d, l);
        out.push_back(p);
    }
    return out;
}

} // namespace bnlab

#endif // BNLAB_RANDPROD_HPP
