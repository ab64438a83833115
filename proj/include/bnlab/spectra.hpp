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

#ifndef BNLAB_SPECTRA_HPP
#define BNLAB_SPECTRA_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "bnlab/error.hpp"
#include "bnlab/linalg.hpp"

namespace bnlab {

/// Marchenko-Pastur law with aspect ratio n/d.
struct MpLaw {
    double ratio = 0.0;

    explicit MpLaw(double r) : ratio(r) {
        if (!(r > 0.0 && r <= 1.0))
            throw Error(ErrorCode::BadRatio, "Marchenko-Pastur ratio must lie in (0, 1]");
    }

    double lower() const noexcept { return std::pow(1.0 - std::sqrt(ratio), 2); }
    double upper() const noexcept { return std::pow(1.0 + std::sqrt(ratio), 2); }
    /// The band 1 ± sqrt(ratio), the singular-value style edge.
    double band_lower() const noexcept { return 1.0 - std::sqrt(ratio); }
    double band_upper() const noexcept { return 1.0 + std::sqrt(ratio); }
};

inline double mp_pdf(double x, const MpLaw &law) {
    const double a = law.lower(), b = law.upper();
    if (x <= a || x >= b)
        return 0.0;
    return std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * law.ratio * x);
}

namespace detail {

template <typename F>
double adaptive_simpson(F &&f, double a, double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(F &&f, double a, double b, double tol = 1e-12) {
    if (b <= a)
        return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

} // namespace detail

/// CDF by adaptive quadrature after x = a + (b-a)(1 - cos t)/2, which removes
/// the square-root edges of the density.
inline double mp_cdf(double x, const MpLaw &law) {
    const double a = law.lower(), b = law.upper();
    if (x <= a)
        return 0.0;
    if (x >= b)
        return 1.0;
    const double half = 0.5 * (b - a);
    const double tx = std::acos(std::clamp(1.0 - (x - a) / half, -1.0, 1.0));
    auto integrand = [&](double t) {
        const double s = std::sin(t);
        const double xt = a + half * (1.0 - std::cos(t));
        return half * half * s * s / (2.0 * std::numbers::pi * law.ratio * xt);
    };
    return std::clamp(detail::integrate(integrand, 0.0, tx), 0.0, 1.0);
}

inline double mp_median(const MpLaw &law) {
    double lo = law.lower(), hi = law.upper();
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mp_cdf(mid, law) < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double median(std::vector<double> v) {
    if (v.empty())
        throw Error(ErrorCode::TooFewEigenvalues, "median of an empty sequence");
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

inline constexpr std::size_t kMinBulkEigenvalues = 5;

/// Removes the `drop_top` largest values and divides the rest by their
/// median. Result is ascending.
inline std::vector<double> median_normalized_bulk(std::span<const double> eigs,
                                                  std::size_t drop_top) {
    std::vector<double> v(eigs.begin(), eigs.end());
    std::sort(v.begin(), v.end(), std::greater<>());
    if (v.size() < drop_top + kMinBulkEigenvalues)
        throw Error(ErrorCode::TooFewEigenvalues, "fewer than 5 eigenvalues remain after dropping");
    v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(drop_top));
    const double med = median(v);
    if (!(med > 0.0))
        throw Error(ErrorCode::BadParameter, "bulk median must be positive");
    for (double &x : v)
        x /= med;
    std::sort(v.begin(), v.end());
    return v;
}

/// sup |F_emp - F_MP| for ascending `sorted` against the MP law rescaled to
/// median 1.
inline double ks_against_mp(std::span<const double> sorted, const MpLaw &law) {
    const double m = mp_median(law);
    const double count = static_cast<double>(sorted.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = mp_cdf(sorted[i] * m, law);
        ks = std::max({ks, std::abs(static_cast<double>(i + 1) / count - f),
                       std::abs(static_cast<double>(i) / count - f)});
    }
    return ks;
}

inline double mp_ks_distance(std::span<const double> eigs, const MpLaw &law,
                             std::size_t drop_top) {
    const auto bulk = median_normalized_bulk(eigs, drop_top);
    return ks_against_mp(bulk, law);
}

/// Per-spectrum median normalization, then one KS distance on the pool.
inline double mp_ks_distance_pooled(const std::vector<std::vector<double>> &spectra,
                                    const MpLaw &law, std::size_t drop_top) {
    std::vector<double> pool;
    for (const auto &s : spectra) {
        const auto b = median_normalized_bulk(s, drop_top);
        pool.insert(pool.end(), b.begin(), b.end());
    }
    std::sort(pool.begin(), pool.end());
    return ks_against_mp(pool, law);
}

inline double band_fraction(std::span<const double> values, double center, double half_width) {
    if (values.empty())
        return 0.0;
    std::size_t inside = 0;
    for (double v : values)
        if (std::abs(v - center) <= half_width)
            ++inside;
    return static_cast<double>(inside) / static_cast<double>(values.size());
}

/// max_i |lams_i / refs_i - 1|.
inline double ratio_deviation(std::span<const double> lams, std::span<const double> refs) {
    if (lams.size() != refs.size())
        throw Error(ErrorCode::LengthMismatch, "ratio_deviation sequences differ in length");
    double worst = 0.0;
    for (std::size_t i = 0; i < lams.size(); ++i) {
        if (!(refs[i] > 0.0))
            throw Error(ErrorCode::NonPositiveReference, "reference eigenvalues must be positive");
        worst = std::max(worst, std::abs(lams[i] / refs[i] - 1.0));
    }
    return worst;
}

/// δ(C1, C2) = Σ (λ_i - 1)² over the eigenvalues of C1⁻¹C2, computed on the
/// symmetric similarity C1^{-1/2} C2 C1^{-1/2}.
inline double divergence(const Matrix &c1, const Matrix &c2) {
    if (!c1.square() || !c2.square() || c1.rows() != c2.rows())
        throw Error(ErrorCode::ShapeMismatch, "divergence needs equal-size square matrices");
    const auto l2 = eigenvalues(c2);
    if (l2.empty() || !(l2.back() > kPositiveDefiniteFloor))
        throw Error(ErrorCode::NotPositiveDefinite, "divergence needs SPD arguments");
    const Matrix root = matpow(c1, -0.5);
    if (c1 == c2)
        return 0.0;
    const Matrix sim = matmul(root, matmul(c2, root));
    double s = 0.0;
    for (double lam : eigenvalues(sim))
        s += (lam - 1.0) * (lam - 1.0);
    return s;
}

struct TvBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// (δ/100, 3δ/2), each clamped to [0, 1].
inline TvBounds gaussian_tv_bounds(const Matrix &c1, const Matrix &c2) {
    const double delta = divergence(c1, c2);
    return {std::min(1.0, delta / 100.0), std::min(1.0, 1.5 * delta)};
}

/// n·exp(-(t·d/2) / (γ²‖C⁻¹‖n²(1 + sqrt(t/n)))).
inline double lemma_concentration_tail(double t, double n, double d, double gamma,
                                       double norm_c_inv) {
    if (!(t >= 0.0) || !(n > 0.0) || !(d > 0.0) || !(gamma > 0.0) || !(norm_c_inv > 0.0))
        throw Error(ErrorCode::BadParameter, "concentration tail parameters must be positive");
    const double denom = gamma * gamma * norm_c_inv * n * n * (1.0 + std::sqrt(t / n));
    return n * std::exp(-(t * d / 2.0) / denom);
}

/// n·exp(-(t/2) / (σ² + R·t/3)).
inline double bernstein_tail(double t, double n, double sigma2, double r) {
    if (!(t >= 0.0) || !(n > 0.0) || !(sigma2 >= 0.0) || !(r >= 0.0))
        throw Error(ErrorCode::BadParameter, "Bernstein tail parameters must be non-negative");
    if (t == 0.0)
        return n;
    if (std::isinf(sigma2))
        return n;
    return n * std::exp(-(t / 2.0) / (sigma2 + r * t / 3.0));
}

struct EpsilonTerms {
    double epsilon = 0.0;        ///< nγ‖G*^{-1/2}‖/sqrt(d)
    double plateau = 0.0;        ///< ε·ln(1/ε)
    double one_step_tv = 0.0;    ///< 3n²‖G*⁻¹‖γ²/d · ln(d / (3n²γ²‖G*⁻¹‖))
    bool out_of_regime = false;  ///< ε >= 1
};

inline EpsilonTerms epsilon_of_theorem(double n, double d, double gamma, double norm_g_inv_sqrt) {
    if (!(n > 0.0) || !(d > 0.0) || !(gamma > 0.0) || !(norm_g_inv_sqrt > 0.0))
        throw Error(ErrorCode::BadParameter, "epsilon parameters must be positive");
    EpsilonTerms e;
    e.epsilon = n * gamma * norm_g_inv_sqrt / std::sqrt(d);
    e.plateau = e.epsilon * std::log(1.0 / e.epsilon);
    const double k = 3.0 * n * n * norm_g_inv_sqrt * norm_g_inv_sqrt * gamma * gamma;
    e.one_step_tv = k / d * std::log(d / k);
    e.out_of_regime = e.epsilon >= 1.0;
    return e;
}

/// Observed deviation against t·(e^{-αℓ/2} + ε·ln(1/ε)).
struct ConcentrationReport {
    double epsilon = 0.0;
    double transient = 0.0;
    double bound = 0.0;
    double observed = 0.0;
    bool out_of_regime = false;
};

inline ConcentrationReport concentration_report(double t, double alpha, double layer,
                                                const EpsilonTerms &eps, double observed) {
    ConcentrationReport r;
    r.epsilon = eps.epsilon;
    r.transient = std::exp(-alpha * layer / 2.0);
    r.bound = t * (r.transient + eps.plateau);
    r.observed = observed;
    r.out_of_regime = eps.out_of_regime;
    return r;
}

} // namespace bnlab

#endif // BNLAB_SPECTRA_HPP
