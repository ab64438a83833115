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

#ifndef BNLAB_REPORT_HPP
#define BNLAB_REPORT_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bnlab/error.hpp"
#include "bnlab/svg.hpp"

#ifndef BNLAB_VERSION
#define BNLAB_VERSION "0.1.0"
#endif

namespace bnlab {

inline constexpr const char *kVersion = BNLAB_VERSION;

struct SeriesRow {
    std::string variant;
    std::size_t trial = 0;
    std::size_t layer = 0;
    std::string metric;
    double value = 0.0;
};

/// Per-layer statistics across trials for one (variant, metric).
struct Aggregate {
    std::string variant;
    std::string metric;
    std::vector<std::size_t> layers;
    std::vector<double> mean, median, q05, q95;
};

struct ExperimentReport {
    std::string name;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::vector<SeriesRow> rows;
    std::vector<Aggregate> aggregates;
    nlohmann::json derived = nlohmann::json::object();
    std::vector<std::pair<std::string, svg::Chart>> plots;
    double duration_seconds = 0.0;

    const Aggregate *find(const std::string &variant, const std::string &metric) const {
        for (const auto &a : aggregates)
            if (a.variant == variant && a.metric == metric)
                return &a;
        return nullptr;
    }
};

/// Linear-interpolation quantile of sorted values.
inline double quantile_sorted(const std::vector<double> &v, double q) {
    if (v.empty())
        return 0.0;
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Groups rows by (variant, metric, layer) in first-appearance order and
/// summarizes each group over trials.
inline std::vector<Aggregate> aggregate(const std::vector<SeriesRow> &rows) {
    std::vector<Aggregate> out;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    std::vector<std::map<std::size_t, std::vector<double>>> values;
    for (const auto &r : rows) {
        auto key = std::make_pair(r.variant, r.metric);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, out.size()).first;
            out.push_back(Aggregate{r.variant, r.metric, {}, {}, {}, {}, {}});
            values.emplace_back();
        }
        values[it->second][r.layer].push_back(r.value);
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        for (auto &[layer, vals] : values[k]) {
            double s = 0.0;
            for (double v : vals)
                s += v;
            std::sort(vals.begin(), vals.end());
            out[k].layers.push_back(layer);
            out[k].mean.push_back(s / static_cast<double>(vals.size()));
            out[k].median.push_back(quantile_sorted(vals, 0.5));
            out[k].q05.push_back(quantile_sorted(vals, 0.05));
            out[k].q95.push_back(quantile_sorted(vals, 0.95));
        }
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string series_csv(const ExperimentReport &r) {
    std::string out = "experiment,variant,trial,layer,metric,value\n";
    for (const auto &row : r.rows) {
        out += r.name;
        out += ',';
        out += row.variant;
        out += ',';
        out += std::to_string(row.trial);
        out += ',';
        out += std::to_string(row.layer);
        out += ',';
        out += row.metric;
        out += ',';
        out += format_double(row.value);
        out += '\n';
    }
    return out;
}

inline nlohmann::json manifest_json(const ExperimentReport &r, bool complete) {
    nlohmann::json m;
    m["experiment"] = r.name;
    m["seed"] = r.seed;
    m["version"] = r.version;
    m["config"] = r.config;
    m["status"] = complete ? "complete" : "running";
    if (complete) {
        m["derived"] = r.derived;
        m["duration_seconds"] = r.duration_seconds;
        m["series_rows"] = r.rows.size();
        nlohmann::json aggs = nlohmann::json::array();
        for (const auto &a : r.aggregates)
            aggs.push_back({{"variant", a.variant},
                            {"metric", a.metric},
                            {"layers", a.layers},
                            {"mean", a.mean},
                            {"median", a.median},
                            {"q05", a.q05},
                            {"q95", a.q95}});
        m["aggregates"] = std::move(aggs);
    }
    return m;
}

inline void write_text(const std::filesystem::path &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    f << text;
    f.flush();
    if (!f)
        throw Error(ErrorCode::Io, "failed writing " + path.string());
}

/// Creates `dir` (its parent must already exist) if needed.
inline void prepare_output_dir(const std::filesystem::path &dir) {
    std::error_code ec;
    if (std::filesystem::is_directory(dir, ec))
        return;
    if (!std::filesystem::create_directory(dir, ec) || ec)
        throw Error(ErrorCode::Io, "cannot create output directory " + dir.string());
}

inline void write_manifest(const std::filesystem::path &dir, const ExperimentReport &r,
                           bool complete) {
    write_text(dir / "manifest.json", manifest_json(r, complete).dump(2) + "\n");
}

inline void write_report(const std::filesystem::path &dir, const ExperimentReport &r) {
    prepare_output_dir(dir);
    write_text(dir / "series.csv", series_csv(r));
    for (const auto &[name, chart] : r.plots)
        write_text(dir / ("plot_" + name + ".svg"), svg::render(chart));
    write_manifest(dir, r, true);
}

} // namespace bnlab

#endif // BNLAB_REPORT_HPP
