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

#ifndef BNLAB_MEANFIELD_HPP
#define BNLAB_MEANFIELD_HPP

#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "bnlab/activations.hpp"
#include "bnlab/chain.hpp"
#include "bnlab/error.hpp"
#include "bnlab/linalg.hpp"
#include "bnlab/random.hpp"

namespace bnlab {

/// Monte Carlo estimate of E[(σ∘φ(w))⊗²], w ~ N(0, G).
struct MfStepEstimate {
    Matrix G_next;
    double stderr = 0.0; ///< max entrywise standard error
    std::size_t samples = 0;

    // Exchangeability reduction: per-sample averages of the diagonal and of
    // the off-diagonal entries of (σ∘φ(w))⊗², and their sampling statistics.
    double diag_mean = 0.0;
    double offdiag_mean = 0.0;
    double diag_stderr = 0.0;
    double offdiag_stderr = 0.0;
    double ratio_stderr = 0.0; ///< delta-method stderr of offdiag_mean/diag_mean
    double cross_cov = 0.0;    ///< covariance of diag_mean and offdiag_mean
};

/// b·((1-c)·I + c·11ᵀ).
inline Matrix bsb1(std::size_t n, double b, double c) {
    Matrix g(n, n, b * c);
    for (std::size_t i = 0; i < n; ++i)
        g(i, i) = b;
    return g;
}

namespace detail {

// Covariance actually sampled. Under centering the component of w along 1ₙ
// is discarded, so adding (tr G / n)·11ᵀ/n leaves the law of φ(w) unchanged
// and makes a G that is only positive on the centered subspace sampleable.
inline Matrix sampling_covariance(const Matrix &g, NormKind kind) {
    if (kind != NormKind::Centered)
        return g;
    const std::size_t n = g.rows();
    const double shift = trace(g) / static_cast<double>(n * n);
    Matrix out = g;
    for (double &v : out.entries())
        v += shift;
    return out;
}

inline Matrix standard_normals(RngStream &stream, std::size_t count, std::size_t n) {
    Matrix z(count, n);
    for (double &v : z.entries())
        v = stream.normal();
    return z;
}

} // namespace detail

/// mf_step on pre-drawn standard normal rows `base` (samples x n). Summation
/// is sequential in sample order, so the result is a pure function of inputs.
inline MfStepEstimate mf_step_from_base(const Matrix &base, const Matrix &g, const Activation &a,
                                        NormKind kind) {
    if (!g.square() || g.rows() != base.cols())
        throw Error(ErrorCode::ShapeMismatch, "mf_step: covariance does not match sample width");
    const std::size_t n = g.rows();
    const std::size_t m = base.rows();
    if (m < 2)
        throw Error(ErrorCode::BadParameter, "mf_step needs at least two samples");
    const Matrix root = matpow(detail::sampling_covariance(g, kind), 0.5);

    Matrix sum(n, n), sumsq(n, n);
    double sb = 0.0, so = 0.0, sbb = 0.0, soo = 0.0, sbo = 0.0;
    std::vector<double> x(n);
    const double npairs = static_cast<double>(n * (n - 1));
    for (std::size_t s = 0; s < m; ++s) {
        auto z = base.row(s);
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                acc += z[k] * root(k, j);
            x[j] = acc;
        }
        if (!normalize_row(x, kind))
            throw Error(ErrorCode::ZeroVarianceRow, "degenerate Monte Carlo sample",
                        static_cast<long>(s));
        apply_inplace(a, x);
        double dsum = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total += x[i];
            for (std::size_t j = i; j < n; ++j) {
                const double p = x[i] * x[j];
                sum(i, j) += p;
                sumsq(i, j) += p * p;
            }
            dsum += x[i] * x[i];
        }
        const double bk = dsum / static_cast<double>(n);
        const double ok = (total * total - dsum) / npairs;
        sb += bk;
        so += ok;
        sbb += bk * bk;
        soo += ok * ok;
        sbo += bk * ok;
    }

    const double md = static_cast<double>(m);
    MfStepEstimate est;
    est.samples = m;
    est.G_next = Matrix(n, n);
    double max_se = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double mean = sum(i, j) / md;
            const double var = std::max(sumsq(i, j) / md - mean * mean, 0.0) * md / (md - 1.0);
            max_se = std::max(max_se, std::sqrt(var / md));
            est.G_next(i, j) = mean;
            est.G_next(j, i) = mean;
        }
    est.stderr = max_se;
    const double mb = sb / md, mo = so / md;
    const double vb = std::max(sbb / md - mb * mb, 0.0) * md / (md - 1.0);
    const double vo = std::max(soo / md - mo * mo, 0.0) * md / (md - 1.0);
    const double cbo = (sbo / md - mb * mo) * md / (md - 1.0);
    est.diag_mean = mb;
    est.offdiag_mean = mo;
    est.diag_stderr = std::sqrt(vb / md);
    est.offdiag_stderr = std::sqrt(vo / md);
    est.cross_cov = cbo / md;
    if (mb > 0.0) {
        const double c = mo / mb;
        const double vr = (vo - 2.0 * c * cbo + c * c * vb) / (mb * mb);
        est.ratio_stderr = std::sqrt(std::max(vr, 0.0) / md);
    }
    return est;
}

inline MfStepEstimate mf_step(const Matrix &g, const Activation &a, NormKind kind,
                              std::size_t samples, RngStream &stream) {
    if (samples < 1000)
        throw Error(ErrorCode::BadParameter, "mf_step needs at least 1000 samples");
    const Matrix base = detail::standard_normals(stream, samples, g.rows());
    return mf_step_from_base(base, g, a, kind);
}

/// Ḡ₀ = G0, Ḡ_{k+1} = mf_step(Ḡ_k) with fresh draws each layer.
inline std::vector<Matrix> mf_recurrence_trace(const Matrix &g0, const Activation &a,
                                               NormKind kind, std::size_t layers,
                                               std::size_t samples, RngStream &stream) {
    std::vector<Matrix> out{g0};
    out.reserve(layers + 1);
    for (std::size_t k = 0; k < layers; ++k)
        out.push_back(mf_step(out.back(), a, kind, samples, stream).G_next);
    return out;
}

struct FixedPoint {
    std::size_t n = 0;
    double b_star = 0.0;
    double c_star = 0.0;
    Matrix G_star;
    double mc_stderr = 0.0; ///< max entrywise stderr of the final step
    double b_stderr = 0.0;
    double c_stderr = 0.0;
    std::size_t iterations = 0;
    std::vector<double> eigenvalues;          ///< full n-space, descending
    std::vector<double> centered_eigenvalues; ///< on the complement of 1ₙ
};

struct FixedPointOptions {
    std::size_t samples = 200000;
    double tol = 2e-3;
    std::size_t max_iter = 200;
    double damping = 0.5;
};

namespace detail {

struct FixedPointErrors {
    double b = 0.0;
    double c = 0.0;
    double amplification = 1.0;
};

/*
 * Standard errors of the fixed point of the sampled map x ↦ F̂(x), x = (b, o).
 * Sampling noise δ in F̂ moves the fixed point by (I - J)⁻¹δ, J the Jacobian
 * of F̂ (central differences on the same base draws).
 */
inline FixedPointErrors fixed_point_errors(const Matrix &base, const MfStepEstimate &est,
                                           const Activation &a, NormKind kind) {
    const std::size_t n = base.cols();
    const double b = est.diag_mean, o = est.offdiag_mean;
    const double h = 1e-4 * b;
    auto map = [&](double bb, double oo) {
        const auto e = mf_step_from_base(base, bsb1(n, bb, oo / bb), a, kind);
        return std::pair{e.diag_mean, e.offdiag_mean};
    };
    double jac[2][2];
    try {
        const auto bp = map(b + h, o), bm = map(b - h, o);
        const auto op = map(b, o + h), om = map(b, o - h);
        jac[0][0] = (bp.first - bm.first) / (2 * h);
        jac[1][0] = (bp.second - bm.second) / (2 * h);
        jac[0][1] = (op.first - om.first) / (2 * h);
        jac[1][1] = (op.second - om.second) / (2 * h);
    } catch (const Error &) {
        jac[0][0] = jac[0][1] = jac[1][0] = jac[1][1] = 0.0;
    }
    const double a00 = 1 - jac[0][0], a01 = -jac[0][1], a10 = -jac[1][0], a11 = 1 - jac[1][1];
    const double det = a00 * a11 - a01 * a10;
    double m[2][2] = {{1, 0}, {0, 1}};
    if (std::abs(det) > 1e-3) {
        m[0][0] = a11 / det;
        m[0][1] = -a01 / det;
        m[1][0] = -a10 / det;
        m[1][1] = a00 / det;
    }
    const double sbb = est.diag_stderr * est.diag_stderr;
    const double soo = est.offdiag_stderr * est.offdiag_stderr;
    const double sbo = est.cross_cov;
    // Covariance of the fixed point: M Σ Mᵀ.
    double cov[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            cov[i][j] = m[i][0] * (sbb * m[j][0] + sbo * m[j][1]) + m[i][1] * (sbo * m[j][0] + soo * m[j][1]);
    FixedPointErrors out;
    out.b = std::sqrt(std::max(cov[0][0], 0.0));
    const double g0 = -o / (b * b), g1 = 1.0 / b;
    out.c = std::sqrt(std::max(g0 * g0 * cov[0][0] + 2 * g0 * g1 * cov[0][1] + g1 * g1 * cov[1][1], 0.0));
    out.amplification = std::max({1.0, std::abs(m[0][0]) + std::abs(m[0][1]),
                                  std::abs(m[1][0]) + std::abs(m[1][1])});
    return out;
}

} // namespace detail

/*
 * Damped iteration on the two BSB1 scalars (diagonal value b, off-diagonal
 * value o = b·c). Each iteration evaluates mf_step at BSB1(b, c) on one fixed
 * set of base normals drawn at the start of the call, so the iteration is a
 * deterministic map. Starts from the identity; the reported scalars are one
 * undamped map evaluation at the converged iterate.
 */
inline FixedPoint solve_fixed_point(const Activation &a, NormKind kind, std::size_t n,
                                    RngStream &stream, const FixedPointOptions &opt = {}) {
    if (n < 2)
        throw Error(ErrorCode::BadParameter, "fixed point needs n >= 2");
    if (opt.samples < 1000)
        throw Error(ErrorCode::BadParameter, "fixed point needs at least 1000 samples");
    const Matrix base = detail::standard_normals(stream, opt.samples, n);
    double b = 1.0, o = 0.0;
    MfStepEstimate est;
    std::size_t it = 0;
    bool converged = false;
    while (it < opt.max_iter) {
        ++it;
        est = mf_step_from_base(base, bsb1(n, b, b == 0.0 ? 0.0 : o / b), a, kind);
        const double nb = (1.0 - opt.damping) * b + opt.damping * est.diag_mean;
        const double no = (1.0 - opt.damping) * o + opt.damping * est.offdiag_mean;
        const bool small = std::abs(nb - b) < opt.tol && std::abs(no - o) < opt.tol;
        b = nb;
        o = no;
        if (!(b > 0.0) || !std::isfinite(o))
            break;
        if (o / b > 1.0 - 1e-6)
            throw Error(ErrorCode::DegenerateFixedPoint,
                        "off-diagonal correlation collapsed to 1 (BSB2-like)");
        if (small) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "fixed point iteration stopped after " << it << " iterations at b=" << b
            << " c=" << (b != 0.0 ? o / b : 0.0);
        throw Error(ErrorCode::NoConvergence, msg.str());
    }

    // Report one undamped application of the map at the converged iterate, so
    // (b*, c*) carry no damping lag.
    const Matrix at = bsb1(n, b, o / b);
    est = mf_step_from_base(base, at, a, kind);
    b = est.diag_mean;
    o = est.offdiag_mean;
    if (o / b > 1.0 - 1e-6)
        throw Error(ErrorCode::DegenerateFixedPoint,
                    "off-diagonal correlation collapsed to 1 (BSB2-like)");

    FixedPoint fp;
    fp.n = n;
    fp.b_star = b;
    fp.c_star = o / b;
    fp.G_star = bsb1(n, fp.b_star, fp.c_star);
    const auto err = detail::fixed_point_errors(base, est, a, kind);
    fp.mc_stderr = est.stderr * err.amplification;
    fp.b_stderr = err.b;
    fp.c_stderr = err.c;
    fp.iterations = it;
    fp.eigenvalues = eigenvalues(fp.G_star);
    fp.centered_eigenvalues = eigenvalues(restrict_to_centered(fp.G_star));
    return fp;
}

/// ‖G*^{-1/2}‖; for centered normalization the inverse is taken on the
/// complement of 1ₙ, where G* is invertible.
inline double inverse_sqrt_norm(const FixedPoint &fp, NormKind kind) {
    const auto &lams = kind == NormKind::Centered ? fp.centered_eigenvalues : fp.eigenvalues;
    if (lams.empty() || !(lams.back() > kPositiveDefiniteFloor))
        throw Error(ErrorCode::NotPositiveDefinite, "fixed point is singular");
    return 1.0 / std::sqrt(lams.back());
}

struct McValue {
    double value = 0.0;
    double stderr = 0.0;
};

/// β_F = E[σ²(w₁ / sqrt((1/n)Σ w_j²))] for odd σ. Each sample averages the
/// n exchangeable coordinates.
inline McValue beta_f(const Activation &a, std::size_t n, std::size_t samples, RngStream &stream) {
    if (!a.is_odd())
        throw Error(ErrorCode::NotOddActivation, a.name() + " is not odd");
    if (n < 2 || samples < 2)
        throw Error(ErrorCode::BadParameter, "beta_f needs n >= 2 and samples >= 2");
    std::vector<double> w(n);
    double s = 0.0, ss = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        double ms = 0.0;
        for (double &v : w) {
            v = stream.normal();
            ms += v * v;
        }
        const double inv = 1.0 / std::sqrt(ms / static_cast<double>(n));
        double acc = 0.0;
        for (double v : w) {
            const double y = a(v * inv);
            acc += y * y;
        }
        acc /= static_cast<double>(n);
        s += acc;
        ss += acc * acc;
    }
    const double m = static_cast<double>(samples);
    const double mean = s / m;
    const double var = std::max(ss / m - mean * mean, 0.0) * m / (m - 1.0);
    return {mean, std::sqrt(var / m)};
}

} // namespace bnlab

#endif // BNLAB_MEANFIELD_HPP
