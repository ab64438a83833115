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

#ifndef BNLAB_EXPERIMENTS_HPP
#define BNLAB_EXPERIMENTS_HPP

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bnlab/activations.hpp"
#include "bnlab/chain.hpp"
#include "bnlab/constants.hpp"
#include "bnlab/error.hpp"
#include "bnlab/linalg.hpp"
#include "bnlab/meanfield.hpp"
#include "bnlab/parallel.hpp"
#include "bnlab/randprod.hpp"
#include "bnlab/report.hpp"
#include "bnlab/spectra.hpp"
#include "bnlab/svg.hpp"

namespace bnlab {

inline const std::vector<std::string> &experiment_names() {
    static const std::vector<std::string> names = {
        "fig1a", "fig1b", "mp", "coupling", "wishart-det", "product-decay", "union-bound"};
    return names;
}

/// Default parameters of each recipe. Every key here can be overridden with
/// key=value; unknown keys are rejected.
inline nlohmann::json default_config(std::string_view name) {
    using nlohmann::json;
    if (name == "fig1a")
        return {{"n", 5},        {"d", 1000},           {"depth", 600},
                {"trials", 10},  {"activation", "identity"}, {"input", "orthogonal"}};
    if (name == "fig1b")
        return {{"n", 10},
                {"widths", json::array({100, 200, 400, 800, 1600})},
                {"depth", 600},
                {"trials", 5},
                {"activation", "identity"},
                {"norm", "centered"},
                {"input", "orthogonal"}};
    if (name == "mp")
        return {{"n", 20},
                {"d", 500},
                {"depth", 10},
                {"trials", 0}, // 0: enough trials for 1000 bulk eigenvalues
                {"norm", "centered"},
                {"activations", json::array({"relu", "tanh", "sigmoid", "sin", "selu", "celu"})},
                {"input", "orthogonal"}};
    if (name == "coupling")
        return {{"n", 10},       {"d", 800},          {"depth", 200},
                {"trials", 5},   {"activation", "tanh"}, {"norm", "centered"},
                {"fixed_point_samples", 200000}, {"distortion_restarts", 64}};
    if (name == "wishart-det")
        return {{"shapes", json::array({json::array({1, 8}), json::array({2, 4}), json::array({3, 20})})},
                {"trials", 10},
                {"samples", 100000}};
    if (name == "product-decay")
        return {{"n", 5},          {"d", 50},           {"depth", 200},          {"trials", 20},
                {"collapse_n", 2}, {"collapse_d", 20},  {"collapse_depth", 500}, {"collapse_trials", 20}};
    if (name == "union-bound")
        return {{"n", 5}, {"d", 1000}, {"depth", 600}, {"trials", 10}, {"sample_every", 100}};
    throw Error(ErrorCode::UnknownName, "unknown experiment '" + std::string(name) + "'");
}

/// Applies "key=value". The value is parsed as JSON when possible, a
/// comma-separated list becomes an array, anything else is a string.
inline void apply_override(nlohmann::json &cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw Error(ErrorCode::BadParameter, "override must look like key=value");
    const std::string key(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    if (!cfg.contains(key))
        throw Error(ErrorCode::BadParameter, "unknown override key '" + key + "'");
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        if (raw.find(',') != std::string::npos) {
            value = nlohmann::json::array();
            std::size_t start = 0;
            while (start <= raw.size()) {
                const auto comma = raw.find(',', start);
                const std::string item =
                    raw.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
                auto parsed = nlohmann::json::parse(item, nullptr, false);
                value.push_back(parsed.is_discarded() ? nlohmann::json(item) : parsed);
                if (comma == std::string::npos)
                    break;
                start = comma + 1;
            }
        } else {
            value = raw;
        }
    }
    const auto &current = cfg[key];
    if (current.is_array() && !value.is_array())
        value = nlohmann::json::array({value});
    if (current.is_number() != value.is_number() || current.is_string() != value.is_string() ||
        current.is_array() != value.is_array())
        throw Error(ErrorCode::BadParameter, "override '" + key + "' has the wrong type");
    cfg[key] = std::move(value);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

inline LinearFit least_squares(std::span<const double> xs, std::span<const double> ys) {
    const double m = static_cast<double>(xs.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

struct MixingEstimate {
    double alpha_hat = 0.0;
    std::size_t first_layer = 0;
    std::size_t last_layer = 0; ///< inclusive
    double r_squared = 0.0;
    double plateau = 0.0;
};

/*
 * Geometric decay rate of a per-layer error series. The plateau is the
 * median of the last quarter of the series; the fit window runs from layer 0
 * up to (excluding) the first layer below 1.5x the plateau, and
 * log(series - plateau) is fitted linearly there. α̂ = -2·slope.
 */
inline MixingEstimate fit_mixing_rate(std::span<const double> series) {
    if (series.size() < 8)
        throw Error(ErrorCode::NoTransient, "series too short to separate transient and plateau");
    const std::size_t tail = std::max<std::size_t>(series.size() / 4, 1);
    const double plateau =
        median(std::vector<double>(series.end() - static_cast<std::ptrdiff_t>(tail), series.end()));
    if (!(series.front() >= 3.0 * plateau))
        throw Error(ErrorCode::NoTransient, "series starts within 3x of its plateau");
    std::size_t end = 0;
    while (end < series.size() && series[end] >= 1.5 * plateau)
        ++end;
    if (end < 5)
        throw Error(ErrorCode::NoTransient, "transient shorter than 5 layers");
    std::vector<double> xs, ys;
    for (std::size_t l = 0; l < end; ++l) {
        xs.push_back(static_cast<double>(l));
        ys.push_back(std::log(series[l] - plateau));
    }
    const LinearFit fit = least_squares(xs, ys);
    MixingEstimate est;
    est.alpha_hat = -2.0 * fit.slope;
    est.first_layer = 0;
    est.last_layer = end - 1;
    est.r_squared = fit.r_squared;
    est.plateau = plateau;
    return est;
}

namespace detail {

inline const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

inline std::size_t get_size(const nlohmann::json &cfg, const char *key) {
    const auto &v = cfg.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw Error(ErrorCode::BadParameter, std::string(key) + " must be a non-negative integer");
    return v.get<std::size_t>();
}

inline double mean_over(const Aggregate &a, std::size_t from, std::size_t to) {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < a.layers.size(); ++i)
        if (a.layers[i] >= from && a.layers[i] <= to) {
            s += a.mean[i];
            ++c;
        }
    return c ? s / static_cast<double>(c) : std::nan("");
}

inline double stdev_over(const Aggregate &a, std::size_t from, std::size_t to) {
    const double m = mean_over(a, from, to);
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < a.layers.size(); ++i)
        if (a.layers[i] >= from && a.layers[i] <= to) {
            s += (a.mean[i] - m) * (a.mean[i] - m);
            ++c;
        }
    return c ? std::sqrt(s / static_cast<double>(c)) : std::nan("");
}

inline std::vector<double> as_doubles(const std::vector<std::size_t> &v) {
    return {v.begin(), v.end()};
}

inline svg::Line envelope_line(const Aggregate &a, const std::vector<double> &ys,
                               const std::string &color) {
    svg::Line l;
    l.xs = as_doubles(a.layers);
    l.ys = ys;
    l.color = color;
    l.width = 0.7;
    return l;
}

/// Error series (mean plus 90% envelope) per aggregate.
inline svg::Chart error_chart(const std::string &title, const std::vector<const Aggregate *> &aggs,
                              const std::string &y_label) {
    svg::Chart c;
    c.title = title;
    c.x_label = "layer";
    c.y_label = y_label;
    c.log_y = true;
    for (std::size_t k = 0; k < aggs.size(); ++k) {
        const std::string color = kPalette[k % 8];
        svg::Line mean;
        mean.label = aggs[k]->variant;
        mean.xs = as_doubles(aggs[k]->layers);
        mean.ys = aggs[k]->mean;
        mean.color = color;
        c.lines.push_back(envelope_line(*aggs[k], aggs[k]->q05, color));
        c.lines.push_back(envelope_line(*aggs[k], aggs[k]->q95, color));
        c.lines.push_back(std::move(mean));
    }
    return c;
}

/// Reference G* for a chain: analytic for the identity activation, otherwise
/// the Monte Carlo BSB1 fixed point.
inline std::pair<Matrix, std::string> chain_reference(const Activation &a, NormKind kind,
                                                      std::size_t n, std::uint64_t seed) {
    if (a.kind == ActivationKind::Identity && a.scale == 1.0) {
        if (kind == NormKind::Centered)
            return {centered_projector(n), "centered_projector"};
        return {Matrix::identity(n), "identity"};
    }
    RngStream s(seed, 0xF1CED00000000000ull);
    const FixedPoint fp = solve_fixed_point(a, kind, n, s);
    return {fp.G_star, "mean_field_fixed_point"};
}

inline void push_trace_rows(std::vector<SeriesRow> &rows, const std::string &variant,
                            const std::vector<GramTrace> &traces) {
    for (const auto &tr : traces)
        for (std::size_t l = 0; l < tr.layers.size(); ++l)
            rows.push_back({variant, tr.trial, l, "frob_err", tr.layers[l].frob_err});
}

} // namespace detail

inline ExperimentReport fig1a(const nlohmann::json &cfg, std::uint64_t seed, std::size_t workers) {
    namespace th = thresholds;
    ExperimentReport rep;
    rep.name = "fig1a";
    rep.config = cfg;
    rep.seed = seed;

    ChainConfig base;
    base.n = detail::get_size(cfg, "n");
    base.d = detail::get_size(cfg, "d");
    base.depth = detail::get_size(cfg, "depth");
    base.trials = detail::get_size(cfg, "trials");
    base.activation = Activation(parse_activation(cfg.at("activation").get<std::string>()));
    base.master_seed = seed;
    const InputKind input_kind = parse_input(cfg.at("input").get<std::string>());
    const Matrix input = make_input(input_kind, base.n, base.d, seed);

    const struct {
        const char *variant;
        NormKind norm;
    } variants[] = {{"no_bn", NormKind::None}, {"bn", NormKind::Centered}};
    for (const auto &v : variants) {
        ChainConfig c = base;
        c.norm = v.norm;
        auto [ref, ref_name] = detail::chain_reference(c.activation, c.norm, c.n, seed);
        rep.derived[std::string("reference_") + v.variant] = ref_name;
        detail::push_trace_rows(rep.rows, v.variant, run(c, input, ref, workers));
    }
    rep.aggregates = aggregate(rep.rows);
    const Aggregate &nobn = *rep.find("no_bn", "frob_err");
    const Aggregate &bn = *rep.find("bn", "frob_err");

    const std::size_t last = base.depth;
    const std::size_t from = std::min(th::kFig1aPlateauFrom, last);
    const std::size_t split = std::min(th::kFig1aPlateauSplit, last);
    rep.derived["no_bn_final_mean"] = nobn.mean.back();
    rep.derived["bn_final_mean"] = bn.mean.back();
    rep.derived["separation"] = nobn.mean.back() / bn.mean.back();
    const double plateau_mean = detail::mean_over(bn, from, last);
    rep.derived["bn_plateau_mean"] = plateau_mean;
    rep.derived["bn_plateau_cv"] = detail::stdev_over(bn, from, last) / plateau_mean;
    rep.derived["bn_window_early_mean"] = detail::mean_over(bn, from, split);
    rep.derived["bn_window_late_mean"] = detail::mean_over(bn, split, last);
    rep.derived["plateau_window"] = {from, last};
    try {
        const MixingEstimate mix = fit_mixing_rate(bn.mean);
        rep.derived["mixing"] = {{"alpha_hat", mix.alpha_hat},
                                 {"r_squared", mix.r_squared},
                                 {"window", {mix.first_layer, mix.last_layer}},
                                 {"plateau", mix.plateau}};
    } catch (const Error &e) {
        if (e.code() != ErrorCode::NoTransient)
            throw;
        rep.derived["mixing"] = {{"status", "no_transient"}};
    }

    rep.plots.emplace_back("error", detail::error_chart("Mean-field error with and without BN",
                                                        {&nobn, &bn}, "||G_l - G*||_F"));
    return rep;
}

inline ExperimentReport fig1b(const nlohmann::json &cfg, std::uint64_t seed, std::size_t workers) {
    namespace th = thresholds;
    ExperimentReport rep;
    rep.name = "fig1b";
    rep.config = cfg;
    rep.seed = seed;

    const std::size_t n = detail::get_size(cfg, "n");
    const std::size_t depth = detail::get_size(cfg, "depth");
    const std::size_t trials = detail::get_size(cfg, "trials");
    const Activation act(parse_activation(cfg.at("activation").get<std::string>()));
    const NormKind norm = parse_norm(cfg.at("norm").get<std::string>());
    const InputKind input_kind = parse_input(cfg.at("input").get<std::string>());
    const auto widths = cfg.at("widths").get<std::vector<std::size_t>>();
    if (widths.size() < 2)
        throw Error(ErrorCode::BadParameter, "fig1b needs at least two widths");

    const std::size_t from = th::kFig1bWindowAfter + 1;
    const std::size_t to = std::min(th::kFig1bWindowBefore - 1, depth);
    auto [ref, ref_name] = detail::chain_reference(act, norm, n, seed);
    rep.derived["reference"] = ref_name;

    std::vector<double> log_d, log_plateau;
    nlohmann::json per_width = nlohmann::json::array();
    svg::Chart chart;
    chart.title = "Plateau of ||G_l - G*||_F vs width";
    chart.x_label = "width d";
    chart.y_label = "mean error over 40 < l < 600";
    chart.log_x = chart.log_y = true;
    svg::Line measured{"measured", {}, {}, detail::kPalette[0], false, 1.5};
    svg::Line guide{"2n/sqrt(d)", {}, {}, "#555555", true, 1.2};

    for (std::size_t d : widths) {
        ChainConfig c;
        c.n = n;
        c.d = d;
        c.depth = depth;
        c.trials = trials;
        c.activation = act;
        c.norm = norm;
        c.master_seed = seed;
        const std::string variant = "d=" + std::to_string(d);
        const auto traces = run(c, make_input(input_kind, n, d, seed), ref, workers);
        const std::size_t first_row = rep.rows.size();
        detail::push_trace_rows(rep.rows, variant, traces);
        double s = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = first_row; i < rep.rows.size(); ++i)
            if (rep.rows[i].layer >= from && rep.rows[i].layer <= to) {
                s += rep.rows[i].value;
                ++cnt;
            }
        const double plateau = s / static_cast<double>(cnt);
        const double g = 2.0 * static_cast<double>(n) / std::sqrt(static_cast<double>(d));
        log_d.push_back(std::log(static_cast<double>(d)));
        log_plateau.push_back(std::log(plateau));
        per_width.push_back({{"d", d}, {"plateau", plateau}, {"guide", g}, {"ratio_to_guide", plateau / g}});
        measured.xs.push_back(static_cast<double>(d));
        measured.ys.push_back(plateau);
        guide.xs.push_back(static_cast<double>(d));
        guide.ys.push_back(g);
    }
    rep.aggregates = aggregate(rep.rows);
    const LinearFit fit = least_squares(log_d, log_plateau);
    rep.derived["per_width"] = per_width;
    rep.derived["slope"] = fit.slope;
    rep.derived["slope_r_squared"] = fit.r_squared;
    rep.derived["window"] = {from, to};
    rep.derived["guide_extrapolation_d1e6"] = 2.0 * static_cast<double>(n) / std::sqrt(1e6);
    if (act.kind == ActivationKind::Identity && norm == NormKind::Centered) {
        // γ = 1 for the identity; ‖G*^{-1/2}‖ on the centered subspace.
        const double inv_sqrt = std::sqrt((static_cast<double>(n) - 1.0) / static_cast<double>(n));
        nlohmann::json eps = nlohmann::json::array();
        for (std::size_t d : widths) {
            const auto e = epsilon_of_theorem(static_cast<double>(n), static_cast<double>(d), 1.0, inv_sqrt);
            eps.push_back({{"d", d}, {"epsilon", e.epsilon}, {"plateau_scale", e.plateau},
                           {"one_step_tv", e.one_step_tv}, {"out_of_regime", e.out_of_regime}});
        }
        rep.derived["epsilon"] = eps;
    }
    chart.lines = {measured, guide};
    rep.plots.emplace_back("width", chart);

    std::vector<const Aggregate *> aggs;
    for (const auto &a : rep.aggregates)
        aggs.push_back(&a);
    rep.plots.emplace_back("depth", detail::error_chart("BN error by depth and width", aggs,
                                                        "||G_l - G*||_F"));
    return rep;
}

inline std::size_t default_drop_top(const Activation &a) { return a.is_odd() ? 0 : 1; }

inline ExperimentReport mp_experiment(const nlohmann::json &cfg, std::uint64_t seed,
                                      std::size_t workers) {
    namespace th = thresholds;
    ExperimentReport rep;
    rep.name = "mp";
    rep.config = cfg;
    rep.seed = seed;

    const std::size_t n = detail::get_size(cfg, "n");
    const std::size_t d = detail::get_size(cfg, "d");
    const std::size_t depth = detail::get_size(cfg, "depth");
    const NormKind norm = parse_norm(cfg.at("norm").get<std::string>());
    const InputKind input_kind = parse_input(cfg.at("input").get<std::string>());
    std::size_t trials = detail::get_size(cfg, "trials");
    if (trials == 0)
        trials = (th::kMpMinBulkEigenvalues + (n - 1) - 1) / (n - 1);

    const MpLaw law(static_cast<double>(n) / static_cast<double>(d));
    const double root_ratio = std::sqrt(law.ratio);
    const double half_width = th::kMpBandSigmas * root_ratio;
    const double outlier_level = 1.0 + th::kMpOutlierSigmas * root_ratio;
    const double mp_med = mp_median(law);
    rep.derived["trials"] = trials;
    rep.derived["ratio"] = law.ratio;
    rep.derived["mp_support"] = {law.lower(), law.upper()};
    rep.derived["mp_band"] = {law.band_lower(), law.band_upper()};
    rep.derived["band"] = {1.0 - half_width, 1.0 + half_width};
    rep.derived["outlier_level"] = outlier_level;

    const Matrix input = make_input(input_kind, n, d, seed);
    nlohmann::json per_act = nlohmann::json::object();
    std::size_t palette = 0;
    for (const auto &name_json : cfg.at("activations")) {
        const Activation act(parse_activation(name_json.get<std::string>()));
        ChainConfig c;
        c.n = n;
        c.d = d;
        c.depth = depth;
        c.trials = trials;
        c.activation = act;
        c.norm = norm;
        c.master_seed = seed;
        const auto traces = run(c, input, std::nullopt, workers);
        for (const auto &tr : traces)
            for (std::size_t l = 0; l < tr.layers.size(); ++l)
                for (std::size_t k = 0; k < n; ++k)
                    rep.rows.push_back({act.name(), tr.trial, l, "lambda_" + std::to_string(k + 1),
                                        tr.layers[l].spectrum.eigenvalues[k]});

        const std::size_t drop = default_drop_top(act);
        std::vector<std::vector<double>> finals;
        std::vector<double> pool;
        std::size_t exactly_one = 0;
        nlohmann::json outliers = nlohmann::json::array();
        for (const auto &tr : traces) {
            const auto &eigs = tr.layers.back().spectrum.eigenvalues;
            finals.push_back(eigs);
            const auto bulk = median_normalized_bulk(eigs, drop);
            pool.insert(pool.end(), bulk.begin(), bulk.end());
            const double med = median(eigs);
            std::size_t count = 0;
            for (double lam : eigs)
                if (lam / med > outlier_level)
                    ++count;
            outliers.push_back(count);
            if (count == 1)
                ++exactly_one;
        }
        std::sort(pool.begin(), pool.end());
        const double ks = ks_against_mp(pool, law);
        const double frac = band_fraction(pool, 1.0, half_width);
        per_act[act.name()] = {{"drop_top", drop},
                               {"bulk_count", pool.size()},
                               {"ks", ks},
                               {"band_fraction", frac},
                               {"outliers_per_trial", outliers},
                               {"exactly_one_outlier_fraction",
                                static_cast<double>(exactly_one) / static_cast<double>(trials)}};

        svg::Chart chart;
        chart.title = "Bulk spectrum (" + act.name() + ") vs Marchenko-Pastur, ratio n/d";
        chart.x_label = "eigenvalue / median";
        chart.y_label = "density";
        svg::Bars bars;
        bars.label = "empirical";
        bars.color = "#9ecae1";
        const double lo = std::min(pool.front(), law.lower() / mp_med) - 0.05;
        const double hi = std::max(pool.back(), law.upper() / mp_med) + 0.05;
        const std::size_t bins = 40;
        for (std::size_t b = 0; b <= bins; ++b)
            bars.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / bins);
        bars.heights.assign(bins, 0.0);
        for (double v : pool) {
            auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
            bars.heights[std::min(b, bins - 1)] += 1.0;
        }
        const double w = (hi - lo) / bins;
        for (double &h : bars.heights)
            h /= static_cast<double>(pool.size()) * w;
        svg::Line curve;
        curve.label = "MP (median 1)";
        curve.color = detail::kPalette[1 + (palette++ % 7)];
        for (int k = 0; k <= 400; ++k) {
            const double y = lo + (hi - lo) * k / 400.0;
            curve.xs.push_back(y);
            curve.ys.push_back(mp_med * mp_pdf(y * mp_med, law));
        }
        chart.bars.push_back(std::move(bars));
        chart.lines.push_back(std::move(curve));
        rep.plots.emplace_back("hist_" + act.name(), std::move(chart));
    }
    rep.derived["activations"] = per_act;
    rep.aggregates = aggregate(rep.rows);
    return rep;
}

/// Divergence used for coupled chains; for the identity activation under
/// centering the Grams are singular along 1ₙ and are compared on its
/// complement.
inline double coupling_divergence(const Matrix &g1, const Matrix &g2, const Activation &a,
                                  NormKind norm) {
    if (norm == NormKind::Centered && a.kind == ActivationKind::Identity)
        return divergence(restrict_to_centered(g1), restrict_to_centered(g2));
    return divergence(g1, g2);
}

inline ExperimentReport coupling_experiment(const nlohmann::json &cfg, std::uint64_t seed,
                                            std::size_t workers) {
    namespace th = thresholds;
    ExperimentReport rep;
    rep.name = "coupling";
    rep.config = cfg;
    rep.seed = seed;

    ChainConfig c;
    c.n = detail::get_size(cfg, "n");
    c.d = detail::get_size(cfg, "d");
    c.depth = detail::get_size(cfg, "depth");
    c.trials = detail::get_size(cfg, "trials");
    c.activation = Activation(parse_activation(cfg.at("activation").get<std::string>()));
    c.norm = parse_norm(cfg.at("norm").get<std::string>());
    c.master_seed = seed;
    c.validate();

    const Matrix base = make_input(InputKind::Orthogonal, c.n, c.d, seed, 0);
    const struct {
        const char *variant;
        Matrix other;
    } pairs[] = {{"identical", base},
                 {"orthogonal", make_input(InputKind::Orthogonal, c.n, c.d, seed, 1)},
                 {"correlated", make_input(InputKind::Correlated, c.n, c.d, seed, 2)}};

    const std::size_t from = std::min(th::kCouplingWindowFrom, c.depth);
    const std::size_t to = std::min(th::kCouplingWindowTo, c.depth);
    nlohmann::json per_pair = nlohmann::json::object();
    constexpr std::size_t kPairs = std::size(pairs);
    std::vector<std::array<std::vector<SeriesRow>, kPairs>> slots(c.trials);
    parallel_for(c.trials, workers, [&](std::size_t t) {
        // Same trial index means same stream: both chains see identical weights.
        const GramTrace a = run_trial(c, base, nullptr, t);
        for (std::size_t k = 0; k < kPairs; ++k) {
            const GramTrace b = run_trial(c, pairs[k].other, nullptr, t);
            for (std::size_t l = 0; l < a.layers.size(); ++l) {
                const double rd = ratio_deviation(a.layers[l].spectrum.eigenvalues,
                                                  b.layers[l].spectrum.eigenvalues);
                const double sd = std::sqrt(coupling_divergence(a.layers[l].gram, b.layers[l].gram,
                                                                c.activation, c.norm));
                slots[t][k].push_back({pairs[k].variant, t, l, "ratio_dev", rd});
                slots[t][k].push_back({pairs[k].variant, t, l, "sqrt_div", sd});
            }
        }
    });
    for (std::size_t k = 0; k < kPairs; ++k)
        for (const auto &s : slots)
            rep.rows.insert(rep.rows.end(), s[k].begin(), s[k].end());
    rep.aggregates = aggregate(rep.rows);

    const double limit = th::kCouplingPlateauFactor / std::sqrt(static_cast<double>(c.d));
    for (const auto &p : pairs) {
        const Aggregate &rd = *rep.find(p.variant, "ratio_dev");
        const Aggregate &sd = *rep.find(p.variant, "sqrt_div");
        double max_abs = 0.0;
        for (const auto &row : rep.rows)
            if (row.variant == p.variant)
                max_abs = std::max(max_abs, std::abs(row.value));
        per_pair[p.variant] = {{"ratio_dev_plateau", detail::mean_over(rd, from, to)},
                               {"sqrt_div_plateau", detail::mean_over(sd, from, to)},
                               {"ratio_dev_initial", rd.mean.front()},
                               {"max_abs_metric", max_abs}};
    }
    rep.derived["pairs"] = per_pair;
    rep.derived["window"] = {from, to};
    rep.derived["plateau_limit"] = limit;
    rep.derived["plateau_limit_5n_over_sqrt_d"] = limit * static_cast<double>(c.n);

    // Theory constants for the same configuration.
    RngStream aux(seed, 0xC0C0000000000000ull);
    const auto gamma = distortion(c.activation, c.n, detail::get_size(cfg, "distortion_restarts"),
                                  aux.derive(1));
    rep.derived["gamma"] = gamma.gamma;
    try {
        RngStream fps = aux.derive(2);
        FixedPointOptions opt;
        opt.samples = detail::get_size(cfg, "fixed_point_samples");
        const FixedPoint fp = solve_fixed_point(c.activation, c.norm, c.n, fps, opt);
        const double inv_sqrt = inverse_sqrt_norm(fp, c.norm);
        const auto eps = epsilon_of_theorem(static_cast<double>(c.n), static_cast<double>(c.d),
                                            gamma.gamma, inv_sqrt);
        rep.derived["fixed_point"] = {{"b_star", fp.b_star}, {"c_star", fp.c_star},
                                      {"mc_stderr", fp.mc_stderr}};
        rep.derived["epsilon"] = {{"epsilon", eps.epsilon}, {"plateau_scale", eps.plateau},
                                  {"one_step_tv", eps.one_step_tv},
                                  {"out_of_regime", eps.out_of_regime}};
    } catch (const Error &e) {
        rep.derived["fixed_point"] = {{"status", std::string(error_name(e.code()))}};
    }

    std::vector<const Aggregate *> rd_aggs;
    for (const auto &p : pairs)
        if (std::string(p.variant) != "identical")
            rd_aggs.push_back(rep.find(p.variant, "ratio_dev"));
    svg::Chart chart = detail::error_chart("Coupled chains: max |lambda/lambda' - 1|", rd_aggs,
                                           "ratio deviation");
    chart.lines.push_back({"5/sqrt(d)", {0.0, static_cast<double>(c.depth)}, {limit, limit},
                           "#555555", true, 1.2});
    rep.plots.emplace_back("coupling", std::move(chart));
    return rep;
}

inline ExperimentReport wishart_det_experiment(const nlohmann::json &cfg, std::uint64_t seed,
                                               std::size_t workers) {
    ExperimentReport rep;
    rep.name = "wishart-det";
    rep.config = cfg;
    rep.seed = seed;
    const std::size_t trials = detail::get_size(cfg, "trials");
    const std::size_t samples = detail::get_size(cfg, "samples");
    nlohmann::json shapes = nlohmann::json::array();
    svg::Chart chart{"Wishart determinant: per-trial MC mean vs exact", "trial", "E det(G^T G)",
                     false, false, {}, {}};
    std::size_t shape_index = 0;
    for (const auto &shape : cfg.at("shapes")) {
        const auto nd = shape.get<std::vector<std::size_t>>();
        if (nd.size() != 2)
            throw Error(ErrorCode::BadParameter, "shapes entries must be [n, d]");
        const std::size_t n = nd[0], d = nd[1];
        std::vector<WishartDetEstimate> parts(trials);
        parallel_for(trials, workers, [&](std::size_t t) {
            RngStream s = RngStream(seed, t).derive(shape_index);
            parts[t] = wishart_det_mean(n, d, samples, s);
        });
        const std::string variant = "n=" + std::to_string(n) + ",d=" + std::to_string(d);
        for (std::size_t t = 0; t < trials; ++t)
            rep.rows.push_back({variant, t, 0, "det_mean", parts[t].mc_mean});
        const auto pooled = pool(parts);
        shapes.push_back({{"n", n},
                          {"d", d},
                          {"mc_mean", pooled.mc_mean},
                          {"stderr", pooled.stderr},
                          {"exact", pooled.exact},
                          {"z", (pooled.mc_mean - pooled.exact) / pooled.stderr},
                          {"samples", pooled.samples}});
        const char *color = detail::kPalette[shape_index % std::size(detail::kPalette)];
        svg::Line mc{variant + " MC", {}, {}, color, false, 1.5};
        svg::Line exact{variant + " exact", {}, {}, color, true, 1.2};
        for (std::size_t t = 0; t < trials; ++t) {
            mc.xs.push_back(static_cast<double>(t));
            mc.ys.push_back(parts[t].mc_mean);
            exact.xs.push_back(static_cast<double>(t));
            exact.ys.push_back(pooled.exact);
        }
        chart.lines.push_back(std::move(mc));
        chart.lines.push_back(std::move(exact));
        ++shape_index;
    }
    rep.derived["shapes"] = shapes;
    rep.aggregates = aggregate(rep.rows);
    rep.plots.emplace_back("det_mean", std::move(chart));
    return rep;
}

inline ExperimentReport product_decay_experiment(const nlohmann::json &cfg, std::uint64_t seed,
                                                 std::size_t workers) {
    namespace th = thresholds;
    ExperimentReport rep;
    rep.name = "product-decay";
    rep.config = cfg;
    rep.seed = seed;

    const std::size_t n = detail::get_size(cfg, "n");
    const std::size_t d = detail::get_size(cfg, "d");
    const std::size_t depth = detail::get_size(cfg, "depth");
    const std::size_t trials = detail::get_size(cfg, "trials");
    const auto decay = product_chain(n, d, depth, trials, seed, workers);
    const std::size_t cn = detail::get_size(cfg, "collapse_n");
    const std::size_t cd = detail::get_size(cfg, "collapse_d");
    const std::size_t cdepth = detail::get_size(cfg, "collapse_depth");
    const std::size_t ctrials = detail::get_size(cfg, "collapse_trials");
    const auto collapse = product_chain(cn, cd, cdepth, ctrials, mix64(seed + 1), workers);

    double worst_bookkeeping = 0.0;
    auto push = [&](const std::string &variant, const std::vector<ProductTrace> &traces) {
        for (const auto &tr : traces) {
            double cumulative = 0.0;
            for (std::size_t l = 0; l < tr.layers.size(); ++l) {
                const auto &L = tr.layers[l];
                cumulative += L.logdet_increment;
                worst_bookkeeping = std::max(
                    worst_bookkeeping, std::abs(cumulative - L.logdet) / std::max(1.0, std::abs(L.logdet)));
                rep.rows.push_back({variant, tr.trial, l, "logdet", L.logdet});
                rep.rows.push_back({variant, tr.trial, l, "log_condition", std::log(L.condition)});
                rep.rows.push_back({variant, tr.trial, l, "s2_over_s1", L.s2 / L.s1});
            }
        }
    };
    push("decay", decay);
    push("collapse", collapse);
    rep.aggregates = aggregate(rep.rows);

    const Aggregate &ld = *rep.find("decay", "logdet");
    const LinearFit fit = least_squares(detail::as_doubles(ld.layers), ld.mean);
    const double oracle = wishart_logdet_mean(n, d);
    rep.derived["logdet_slope"] = fit.slope;
    rep.derived["logdet_slope_exact"] = oracle;
    rep.derived["logdet_slope_rel_err"] = std::abs(fit.slope - oracle) / std::abs(oracle);
    rep.derived["logdet_linearity_r_squared"] = fit.r_squared;
    rep.derived["bookkeeping_max_rel_residual"] = worst_bookkeeping;
    const Aggregate &ratio = *rep.find("collapse", "s2_over_s1");
    rep.derived["collapse_final_median_s2_over_s1"] = ratio.median.back();
    long underflow = -1;
    for (const auto *set : {&decay, &collapse})
        for (const auto &tr : *set)
            if (tr.underflow_layer >= 0 && (underflow < 0 || tr.underflow_layer < underflow))
                underflow = tr.underflow_layer;
    rep.derived["first_underflow_layer"] = underflow;

    svg::Chart c1;
    c1.title = "Mean logdet of the Gaussian product Gram";
    c1.x_label = "layer";
    c1.y_label = "logdet";
    c1.lines.push_back({"simulated mean", detail::as_doubles(ld.layers), ld.mean, detail::kPalette[0], false, 1.5});
    c1.lines.push_back({"exact drift", {0.0, static_cast<double>(depth)}, {0.0, oracle * static_cast<double>(depth)},
                        "#555555", true, 1.2});
    rep.plots.emplace_back("logdet", std::move(c1));
    rep.plots.emplace_back("collapse", detail::error_chart("Rank-1 collapse: s2/s1", {&ratio}, "s2/s1"));
    return rep;
}

inline ExperimentReport union_bound_experiment(const nlohmann::json &cfg, std::uint64_t seed,
                                               std::size_t workers) {
    ExperimentReport rep;
    rep.name = "union-bound";
    rep.config = cfg;
    rep.seed = seed;
    const std::size_t n = detail::get_size(cfg, "n");
    const std::size_t d = detail::get_size(cfg, "d");
    const std::size_t depth = detail::get_size(cfg, "depth");
    const std::size_t trials = detail::get_size(cfg, "trials");
    const std::size_t every = std::max<std::size_t>(detail::get_size(cfg, "sample_every"), 1);
    if (d < n || n < 1 || trials < 1)
        throw Error(ErrorCode::BadParameter, "union-bound needs 1 <= n <= d and trials >= 1");

    const auto dev = identity_chain_deviations(n, d, depth, trials, seed, workers);
    for (std::size_t t = 0; t < trials; ++t)
        for (std::size_t l = 0; l < dev[t].size(); ++l)
            rep.rows.push_back({"identity_chain", t, l, "op_dev", dev[t][l]});
    rep.aggregates = aggregate(rep.rows);
    const Aggregate &a = *rep.find("identity_chain", "op_dev");

    nlohmann::json points = nlohmann::json::array();
    bool below = true;
    for (std::size_t l = 0; l <= depth; l += every) {
        const double b = union_bound(n, d, l);
        below = below && a.mean[l] < b;
        points.push_back({{"layer", l}, {"mean", a.mean[l]}, {"median", a.median[l]}, {"bound", b}});
    }
    for (std::size_t l = 0; l <= depth; ++l)
        below = below && a.mean[l] < union_bound(n, d, l);
    rep.derived["points"] = points;
    rep.derived["mean_below_bound_everywhere"] = below;

    svg::Chart c = detail::error_chart("Unnormalized linear chain vs exp(3nl/2d)", {&a}, "||G_l - I||");
    svg::Line bound{"exp(3nl/2d)", {}, {}, "#555555", true, 1.2};
    for (std::size_t l = 0; l <= depth; ++l) {
        bound.xs.push_back(static_cast<double>(l));
        bound.ys.push_back(union_bound(n, d, l));
    }
    c.lines.push_back(std::move(bound));
    rep.plots.emplace_back("union_bound", std::move(c));
    return rep;
}

/// Runs a named recipe with a resolved config (defaults plus overrides).
inline ExperimentReport run_experiment(std::string_view name, const nlohmann::json &cfg,
                                       std::uint64_t seed, std::size_t workers = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep;
    if (name == "fig1a")
        rep = fig1a(cfg, seed, workers);
    else if (name == "fig1b")
        rep = fig1b(cfg, seed, workers);
    else if (name == "mp")
        rep = mp_experiment(cfg, seed, workers);
    else if (name == "coupling")
        rep = coupling_experiment(cfg, seed, workers);
    else if (name == "wishart-det")
        rep = wishart_det_experiment(cfg, seed, workers);
    else if (name == "product-decay")
        rep = product_decay_experiment(cfg, seed, workers);
    else if (name == "union-bound")
        rep = union_bound_experiment(cfg, seed, workers);
    else
        throw Error(ErrorCode::UnknownName, "unknown experiment '" + std::string(name) + "'");
    rep.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

} // namespace bnlab

#endif // BNLAB_EXPERIMENTS_HPP
