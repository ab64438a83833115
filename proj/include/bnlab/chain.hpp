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

#ifndef BNLAB_CHAIN_HPP
#define BNLAB_CHAIN_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bnlab/activations.hpp"
#include "bnlab/error.hpp"
#include "bnlab/linalg.hpp"
#include "bnlab/parallel.hpp"
#include "bnlab/random.hpp"

namespace bnlab {

/// Row normalization applied before the activation.
///   Projection: x / sqrt(mean(x²)), i.e. onto the sqrt(n)-sphere.
///   Centered:   (x - mean) / sqrt(population variance).
enum class NormKind { Projection, Centered, None };

constexpr std::string_view norm_name(NormKind k) noexcept {
    switch (k) {
    case NormKind::Projection: return "projection";
    case NormKind::Centered: return "centered";
    case NormKind::None: return "none";
    }
    return "?";
}

inline NormKind parse_norm(std::string_view name) {
    for (auto k : {NormKind::Projection, NormKind::Centered, NormKind::None})
        if (norm_name(k) == name)
            return k;
    throw Error(ErrorCode::UnknownName, "unknown normalization '" + std::string(name) + "'");
}

inline constexpr double kMinRowVariance = 1e-24;

/// Normalizes one row in place. Returns false if the row is degenerate.
inline bool normalize_row(std::span<double> x, NormKind kind) noexcept {
    const double n = static_cast<double>(x.size());
    switch (kind) {
    case NormKind::None:
        return true;
    case NormKind::Projection: {
        double ms = 0.0;
        for (double v : x)
            ms += v * v;
        ms /= n;
        if (!(ms > 0.0))
            return false;
        const double f = 1.0 / std::sqrt(ms);
        for (double &v : x)
            v *= f;
        return true;
    }
    case NormKind::Centered: {
        double mean = 0.0;
        for (double v : x)
            mean += v;
        mean /= n;
        double var = 0.0;
        for (double &v : x) {
            v -= mean;
            var += v * v;
        }
        var /= n;
        if (!(var >= kMinRowVariance))
            return false;
        const double f = 1.0 / std::sqrt(var);
        for (double &v : x)
            v *= f;
        return true;
    }
    }
    return true;
}

inline Matrix normalize_rows(Matrix m, NormKind kind) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        if (!normalize_row(m.row(r), kind))
            throw Error(ErrorCode::ZeroVarianceRow,
                        "row " + std::to_string(r) + " cannot be normalized", static_cast<long>(r));
    return m;
}

struct ChainConfig {
    std::size_t n = 5;
    std::size_t d = 1000;
    std::size_t depth = 600;
    Activation activation{};
    NormKind norm = NormKind::Centered;
    std::size_t trials = 10;
    std::uint64_t master_seed = 0;

    void validate() const {
        if (n < 2)
            throw Error(ErrorCode::BadParameter, "n must be >= 2");
        if (d < n)
            throw Error(ErrorCode::BadParameter, "d must be >= n");
        if (depth < 1)
            throw Error(ErrorCode::BadParameter, "depth must be >= 1");
        if (trials < 1)
            throw Error(ErrorCode::BadParameter, "trials must be >= 1");
    }
};

/// σ∘φ applied rowwise.
inline Matrix transform(const Matrix &h, const Activation &a, NormKind kind) {
    Matrix x = normalize_rows(h, kind);
    for (std::size_t r = 0; r < x.rows(); ++r)
        apply_inplace(a, x.row(r));
    return x;
}

/// W·x with a fresh W ~ N(0, 1/d)^{d×d}, d = x.rows(). W is never stored:
/// row i of W is drawn (d normals, in order) and immediately contracted.
inline Matrix random_layer(const Matrix &x, RngStream &stream) {
    const std::size_t d = x.rows();
    const std::size_t n = x.cols();
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix out(d, n);
    std::vector<double> acc(n);
    for (std::size_t i = 0; i < d; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            const double w = stream.normal();
            auto xr = x.row(j);
            for (std::size_t k = 0; k < n; ++k)
                acc[k] += w * xr[k];
        }
        auto o = out.row(i);
        for (std::size_t k = 0; k < n; ++k)
            o[k] = sd * acc[k];
    }
    return out;
}

inline Matrix step(const Matrix &h, const Activation &a, NormKind kind, RngStream &stream) {
    if (!h.all_finite())
        throw Error(ErrorCode::NonFinite, "hidden representation has non-finite entries");
    return random_layer(transform(h, a, kind), stream);
}

inline Matrix step(const Matrix &h, const ChainConfig &cfg, RngStream &stream) {
    return step(h, cfg.activation, cfg.norm, stream);
}

/// G = (1/d)·(σ∘φ(h))ᵀ(σ∘φ(h)).
inline Matrix gram(const Matrix &h, const Activation &a, NormKind kind) {
    return gram_of_columns(transform(h, a, kind), 1.0 / static_cast<double>(h.rows()));
}

inline Matrix gram(const Matrix &h, const ChainConfig &cfg) {
    return gram(h, cfg.activation, cfg.norm);
}

struct GramLayer {
    Matrix gram;
    Spectrum spectrum;
    double frob_err = std::numeric_limits<double>::quiet_NaN();
};

struct GramTrace {
    std::size_t trial = 0;
    std::vector<GramLayer> layers;
};

inline void check_input_rank(const Matrix &input) {
    const auto s = singular_values(input);
    const double smin = s.empty() ? 0.0 : s.back() / std::sqrt(static_cast<double>(input.rows()));
    if (!(smin > 1e-8))
        throw Error(ErrorCode::RankDeficientInput, "input batch is not full column rank");
}

/// One trial of the chain: depth+1 Gram matrices G_0..G_depth, using stream
/// (master_seed, stream_id = trial). `depth` may be 0 here.
inline GramTrace run_trial(const ChainConfig &cfg, const Matrix &input, const Matrix *reference,
                           std::size_t trial) {
    if (input.cols() != cfg.n || input.rows() != cfg.d)
        throw Error(ErrorCode::ShapeMismatch, "input must be d x n");
    check_input_rank(input);
    RngStream stream(cfg.master_seed, trial);
    GramTrace trace;
    trace.trial = trial;
    trace.layers.reserve(cfg.depth + 1);
    Matrix h = input;
    const double inv_d = 1.0 / static_cast<double>(cfg.d);
    for (std::size_t layer = 0;; ++layer) {
        Matrix x = transform(h, cfg.activation, cfg.norm);
        GramLayer g;
        g.gram = gram_of_columns(x, inv_d);
        g.spectrum = sym_eig(g.gram);
        if (reference)
            g.frob_err = frobenius_norm(g.gram - *reference);
        trace.layers.push_back(std::move(g));
        if (layer == cfg.depth)
            break;
        h = random_layer(x, stream);
    }
    return trace;
}

/// All trials of a chain, trial t on stream_id t; output ordered by trial.
inline std::vector<GramTrace> run(const ChainConfig &cfg, const Matrix &input,
                                  const std::optional<Matrix> &reference = std::nullopt,
                                  std::size_t workers = 1) {
    cfg.validate();
    check_input_rank(input);
    std::vector<GramTrace> out(cfg.trials);
    const Matrix *ref = reference ? &*reference : nullptr;
    parallel_for(cfg.trials, workers,
                 [&](std::size_t t) { out[t] = run_trial(cfg, input, ref, t); });
    return out;
}

/// Input batches h₀ = sqrt(d)·Q·S^{1/2} where Q is a seeded random d×n
/// orthonormal frame, so the raw input Gram (1/d)h₀ᵀh₀ equals S exactly.
enum class InputKind { Orthogonal, Graded, Correlated };

constexpr std::string_view input_name(InputKind k) noexcept {
    switch (k) {
    case InputKind::Orthogonal: return "orthogonal";
    case InputKind::Graded: return "graded";
    case InputKind::Correlated: return "correlated";
    }
    return "?";
}

inline InputKind parse_input(std::string_view name) {
    for (auto k : {InputKind::Orthogonal, InputKind::Graded, InputKind::Correlated})
        if (input_name(k) == name)
            return k;
    throw Error(ErrorCode::UnknownName, "unknown input kind '" + std::string(name) + "'");
}

inline constexpr std::uint64_t kInputStreamBase = 0x1000000000000000ull;
inline constexpr double kGradedInputCondition = 1e4;
inline constexpr double kCorrelatedInputRho = 0.9;

/// Target input Gram: I_n, a spectrum graded geometrically from 1 down to
/// 1/1e4 in a seeded basis, or BSB1(1, 0.9).
inline Matrix input_gram(InputKind kind, std::size_t n, RngStream &stream) {
    switch (kind) {
    case InputKind::Orthogonal:
        return Matrix::identity(n);
    case InputKind::Correlated: {
        Matrix g(n, n, kCorrelatedInputRho);
        for (std::size_t i = 0; i < n; ++i)
            g(i, i) = 1.0;
        return g;
    }
    case InputKind::Graded: {
        auto [basis, r] = thin_qr(gaussian_matrix(stream, n, n, 1.0));
        std::vector<double> diag(n);
        for (std::size_t k = 0; k < n; ++k)
            diag[k] = std::pow(kGradedInputCondition,
                               -static_cast<double>(k) / static_cast<double>(n - 1));
        return matmul(basis, matmul(Matrix::diagonal(diag), transpose(basis)));
    }
    }
    return Matrix::identity(n);
}

inline Matrix make_input(InputKind kind, std::size_t n, std::size_t d, std::uint64_t master_seed,
                         std::uint64_t index = 0) {
    if (d < n)
        throw Error(ErrorCode::BadParameter, "input needs d >= n");
    RngStream stream(master_seed, kInputStreamBase + index);
    auto [q, r] = thin_qr(gaussian_matrix(stream, d, n, 1.0));
    const Matrix root = matpow(input_gram(kind, n, stream), 0.5);
    return matmul(q, root) * std::sqrt(static_cast<double>(d));
}

/// (n/(n-1))·(I - 11ᵀ/n): the identity-activation fixed point under centering.
inline Matrix centered_projector(std::size_t n) {
    const double nn = static_cast<double>(n);
    Matrix p(n, n, -1.0 / (nn - 1.0));
    for (std::size_t i = 0; i < n; ++i)
        p(i, i) = 1.0;
    return p;
}

} // namespace bnlab

#endif // BNLAB_CHAIN_HPP
