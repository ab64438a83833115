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

#ifndef BNLAB_ACTIVATIONS_HPP
#define BNLAB_ACTIVATIONS_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bnlab/error.hpp"
#include "bnlab/linalg.hpp"
#include "bnlab/random.hpp"

namespace bnlab {

enum class ActivationKind { Identity, Relu, Tanh, Sigmoid, Sin, Selu, Celu };

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kCeluAlpha = 1.0;

inline constexpr std::array<ActivationKind, 6> kActivationSet = {
    ActivationKind::Relu, ActivationKind::Tanh, ActivationKind::Sigmoid,
    ActivationKind::Sin,  ActivationKind::Selu, ActivationKind::Celu};

constexpr std::string_view activation_name(ActivationKind k) noexcept {
    switch (k) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Sin: return "sin";
    case ActivationKind::Selu: return "selu";
    case ActivationKind::Celu: return "celu";
    }
    return "?";
}

inline ActivationKind parse_activation(std::string_view name) {
    for (auto k : {ActivationKind::Identity, ActivationKind::Relu, ActivationKind::Tanh,
                   ActivationKind::Sigmoid, ActivationKind::Sin, ActivationKind::Selu,
                   ActivationKind::Celu})
        if (activation_name(k) == name)
            return k;
    throw Error(ErrorCode::UnknownName, "unknown activation '" + std::string(name) + "'");
}

/// Elementwise activation, optionally multiplied by a positive output scale.
/// Linear bounds |σ(x)| <= C|x| + D (unscaled):
///   identity, relu, tanh, sin, celu: C = 1, D = 0
///   selu: C = λα ≈ 1.7581, D = 0
///   sigmoid: C = 1/4, D = 1/2
struct Activation {
    ActivationKind kind = ActivationKind::Identity;
    double scale = 1.0;

    Activation() = default;
    Activation(ActivationKind k, double s = 1.0) : kind(k), scale(s) {}

    double operator()(double x) const noexcept { return scale * raw(x); }

    bool is_odd() const noexcept {
        return kind == ActivationKind::Identity || kind == ActivationKind::Tanh ||
               kind == ActivationKind::Sin;
    }

    std::string name() const { return std::string(activation_name(kind)); }

    double linear_bound_slope() const noexcept {
        switch (kind) {
        case ActivationKind::Selu: return scale * kSeluLambda * kSeluAlpha;
        case ActivationKind::Sigmoid: return scale * 0.25;
        default: return scale;
        }
    }
    double linear_bound_offset() const noexcept {
        return kind == ActivationKind::Sigmoid ? 0.5 * scale : 0.0;
    }

private:
    double raw(double x) const noexcept {
        switch (kind) {
        case ActivationKind::Identity: return x;
        case ActivationKind::Relu: return x > 0.0 ? x : 0.0;
        case ActivationKind::Tanh: return std::tanh(x);
        case ActivationKind::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case ActivationKind::Sin: return std::sin(x);
        case ActivationKind::Selu:
            return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
        case ActivationKind::Celu:
            return x > 0.0 ? x : kCeluAlpha * std::expm1(x / kCeluAlpha);
        }
        return x;
    }
};

inline Matrix apply(const Activation &a, Matrix m) {
    if (a.kind == ActivationKind::Identity && a.scale == 1.0)
        return m;
    for (double &v : m.entries())
        v = a(v);
    return m;
}

inline void apply_inplace(const Activation &a, std::span<double> xs) noexcept {
    if (a.kind == ActivationKind::Identity && a.scale == 1.0)
        return;
    for (double &v : xs)
        v = a(v);
}

/// ‖σ(x)‖ / ‖x‖.
inline double stretch_ratio(const Activation &a, std::span<const double> x) {
    double num = 0.0, den = 0.0;
    for (double v : x) {
        const double s = a(v);
        num += s * s;
        den += v * v;
    }
    return std::sqrt(num / den);
}

struct DistortionEstimate {
    double gamma = 0.0;
    std::vector<double> maximizer;
    std::size_t restarts_used = 0;
};

struct DistortionOptions {
    std::size_t restarts = 64;
    double step = 0.1;
    int max_steps = 500;
};

namespace detail {

inline void project_to_sphere(std::vector<double> &x) {
    double nrm2 = 0.0;
    for (double v : x)
        nrm2 += v * v;
    const double f = std::sqrt(static_cast<double>(x.size()) / nrm2);
    for (double &v : x)
        v *= f;
}

struct AscentResult {
    double value;
    std::vector<double> point;
};

// Projected gradient ascent from `x` on the sqrt(n)-sphere. The step is taken
// along the unit tangent gradient with length step*sqrt(n); it halves whenever
// the proposal does not improve.
inline AscentResult sphere_ascent(const Activation &a, std::vector<double> x,
                                  const DistortionOptions &opt) {
    const std::size_t n = x.size();
    const double radius = std::sqrt(static_cast<double>(n));
    const double h = 1e-6;
    double best = stretch_ratio(a, x);
    double step = opt.step;
    std::vector<double> g(n), trial(n);
    for (int it = 0; it < opt.max_steps && step > 1e-12; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = x[i];
            x[i] = xi + h;
            const double fp = stretch_ratio(a, x);
            x[i] = xi - h;
            const double fm = stretch_ratio(a, x);
            x[i] = xi;
            g[i] = (fp - fm) / (2.0 * h);
        }
        double radial = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            radial += g[i] * x[i];
        radial /= static_cast<double>(n);
        double gn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            g[i] -= radial * x[i];
            gn += g[i] * g[i];
        }
        gn = std::sqrt(gn);
        if (gn < 1e-14)
            break;
        for (std::size_t i = 0; i < n; ++i)
            trial[i] = x[i] + step * radius * g[i] / gn;
        project_to_sphere(trial);
        const double val = stretch_ratio(a, trial);
        if (val > best) {
            best = val;
            x = trial;
        } else {
            step *= 0.5;
        }
    }
    return {best, std::move(x)};
}

} // namespace detail

/// Lower estimate of γ = sup over the sqrt(n)-sphere of ‖σ(x)‖/‖x‖.
/// Restart r starts from a uniform sphere point drawn from stream.derive(r);
/// the best restart wins, ties going to the lowest index.
inline DistortionEstimate distortion(const Activation &a, std::size_t n, std::size_t restarts,
                                     const RngStream &stream, DistortionOptions opt = {}) {
    if (n < 2 || restarts < 1)
        throw Error(ErrorCode::BadParameter, "distortion needs n >= 2 and restarts >= 1");
    opt.restarts = restarts;
    DistortionEstimate best;
    best.gamma = -1.0;
    for (std::size_t r = 0; r < restarts; ++r) {
        RngStream rs = stream.derive(r);
        std::vector<double> x(n);
        for (double &v : x)
            v = rs.normal();
        detail::project_to_sphere(x);
        auto res = detail::sphere_ascent(a, std::move(x), opt);
        if (res.value > best.gamma) {
            best.gamma = res.value;
            best.maximizer = std::move(res.point);
        }
    }
    best.gamma = stretch_ratio(a, best.maximizer);
    best.restarts_used = restarts;
    return best;
}

} // namespace bnlab

#endif // BNLAB_ACTIVATIONS_HPP
