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

// bnlab command line: chain traces, fixed points, distortion, MP checks and
// experiment recipes.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bnlab/bnlab.hpp"

namespace {

using nlohmann::json;

enum Exit { kOk = 0, kUsage = 2, kNumerical = 3, kIo = 4 };

int exit_code_for(bnlab::ErrorCode c) {
    using bnlab::ErrorCode;
    switch (c) {
    case ErrorCode::Io:
        return kIo;
    case ErrorCode::BadParameter:
    case ErrorCode::BadShape:
    case ErrorCode::BadRatio:
    case ErrorCode::UnknownName:
    case ErrorCode::LengthMismatch:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonSquare:
    case ErrorCode::NotOddActivation:
    case ErrorCode::TooFewEigenvalues:
    case ErrorCode::NonPositiveReference:
    case ErrorCode::NonPositiveVariance:
        return kUsage;
    default:
        return kNumerical;
    }
}

int report_error(const std::string &kind, const std::string &message, int code) {
    json e = {{"error", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << e.dump() << '\n';
    return code;
}

// Reads --config files: a JSON object keyed by subcommand name, each holding
// flag values, e.g. {"chain": {"n": 8, "depth": 100}}.
class JsonConfig : public CLI::Config {
  public:
    std::string to_config(const CLI::App *app, bool default_also, bool, std::string) const override {
        json j;
        for (const CLI::Option *opt : app->get_options()) {
            if (opt->get_lnames().empty() || !opt->get_configurable())
                continue;
            const std::string name = opt->get_lnames()[0];
            if (opt->count() > 0)
                j[name] = opt->as<std::string>();
            else if (default_also && !opt->get_default_str().empty())
                j[name] = opt->get_default_str();
        }
        return j.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream &input) const override {
        const json j = json::parse(input, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw CLI::ConversionError("--config must contain a JSON object");
        std::vector<CLI::ConfigItem> items;
        walk(j, {}, items);
        return items;
    }

  private:
    static std::string scalar(const json &v) {
        return v.is_string() ? v.get<std::string>() : v.dump();
    }

    static void walk(const json &j, std::vector<std::string> parents,
                     std::vector<CLI::ConfigItem> &items) {
        for (const auto &[key, value] : j.items()) {
            if (value.is_object()) {
                auto p = parents;
                p.push_back(key);
                walk(value, p, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto &v : value)
                    item.inputs.push_back(scalar(v));
            else if (value.is_boolean())
                item.inputs.push_back(value.get<bool>() ? "true" : "false");
            else
                item.inputs.push_back(scalar(value));
            items.push_back(std::move(item));
        }
    }
};

std::string csv_line(const std::vector<std::string> &cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i)
            out += ',';
        out += cells[i];
    }
    return out + '\n';
}

/// Flat records print as a two-line CSV; arrays are joined with ';'.
void emit(const json &record, const std::string &format) {
    if (format == "json") {
        std::cout << record.dump() << '\n';
        return;
    }
    std::vector<std::string> keys, values;
    for (const auto &[k, v] : record.items()) {
        keys.push_back(k);
        if (v.is_array()) {
            std::string joined;
            for (std::size_t i = 0; i < v.size(); ++i)
                joined += (i ? ";" : "") + (v[i].is_number_float()
                                                ? bnlab::format_double(v[i].get<double>())
                                                : v[i].dump());
            values.push_back(joined);
        } else if (v.is_number_float()) {
            values.push_back(bnlab::format_double(v.get<double>()));
        } else if (v.is_string()) {
            values.push_back(v.get<std::string>());
        } else {
            values.push_back(v.dump());
        }
    }
    std::cout << csv_line(keys) << csv_line(values);
}

/// Plain numeric CSV. Non-numeric lines (headers) are skipped.
std::vector<std::vector<double>> read_numeric_csv(const std::string &path) {
    std::ifstream f(path);
    if (!f)
        throw bnlab::Error(bnlab::ErrorCode::Io, "cannot read " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            char *end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (numeric && !row.empty())
            rows.push_back(std::move(row));
    }
    return rows;
}

struct Common {
    std::uint64_t seed = 0;
    std::string format = "json";
};

struct ChainArgs {
    std::size_t n = 5, d = 1000, depth = 600, trials = 10, workers = 0;
    std::string activation = "identity", norm = "centered", input = "orthogonal", input_file,
                reference = "auto", out = "chain_out";
};

int run_chain(const ChainArgs &a, std::uint64_t seed) {
    bnlab::ChainConfig cfg;
    cfg.n = a.n;
    cfg.d = a.d;
    cfg.depth = a.depth;
    cfg.trials = a.trials;
    cfg.activation = bnlab::Activation(bnlab::parse_activation(a.activation));
    cfg.norm = bnlab::parse_norm(a.norm);
    cfg.master_seed = seed;
    cfg.validate();

    bnlab::Matrix input;
    if (!a.input_file.empty()) {
        const auto rows = read_numeric_csv(a.input_file);
        if (rows.size() != a.d)
            throw bnlab::Error(bnlab::ErrorCode::BadShape, "input file must have d rows");
        input = bnlab::Matrix(a.d, a.n);
        for (std::size_t r = 0; r < a.d; ++r) {
            if (rows[r].size() != a.n)
                throw bnlab::Error(bnlab::ErrorCode::BadShape, "input file must have n columns");
            for (std::size_t c = 0; c < a.n; ++c)
                input(r, c) = rows[r][c];
        }
    } else {
        input = bnlab::make_input(bnlab::parse_input(a.input), a.n, a.d, seed);
    }

    bnlab::ExperimentReport rep;
    rep.name = "chain";
    rep.seed = seed;
    rep.config = {{"n", a.n},         {"d", a.d},         {"depth", a.depth},
                  {"trials", a.trials}, {"activation", a.activation}, {"norm", a.norm},
                  {"input", a.input_file.empty() ? a.input : a.input_file},
                  {"reference", a.reference}};
    const std::filesystem::path out(a.out);
    bnlab::prepare_output_dir(out);
    bnlab::write_manifest(out, rep, false);

    std::optional<bnlab::Matrix> ref;
    if (a.reference == "auto") {
        auto [g, name] = bnlab::detail::chain_reference(cfg.activation, cfg.norm, cfg.n, seed);
        ref = g;
        rep.derived["reference"] = name;
    } else if (a.reference != "none") {
        throw bnlab::Error(bnlab::ErrorCode::BadParameter, "--reference must be auto or none");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto traces = bnlab::run(cfg, input, ref, a.workers ? a.workers : bnlab::default_workers());
    for (const auto &tr : traces) {
        std::string text = "layer,frob_err";
        for (std::size_t k = 1; k <= cfg.n; ++k)
            text += ",lambda_" + std::to_string(k);
        text += '\n';
        for (std::size_t l = 0; l < tr.layers.size(); ++l) {
            text += std::to_string(l) + ',' + bnlab::format_double(tr.layers[l].frob_err);
            for (double lam : tr.layers[l].spectrum.eigenvalues)
                text += ',' + bnlab::format_double(lam);
            text += '\n';
        }
        bnlab::write_text(out / ("trace_trial" + std::to_string(tr.trial) + ".csv"), text);
    }
    rep.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.derived["trace_files"] = traces.size();
    bnlab::write_manifest(out, rep, true);
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"bnlab: finite-width batch-normalized MLP Gram dynamics at initialization"};
    app.name("bnlab");
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON file of flag values (CLI flags win)");
    app.set_version_flag("--version", std::string(bnlab::kVersion));

    Common common;
    auto add_common = [&](CLI::App *sub, bool format) {
        sub->add_option("--seed", common.seed, "master seed");
        if (format)
            sub->add_option("--format", common.format, "output format")
                ->check(CLI::IsMember({"json", "csv"}));
    };
    const std::string activation_help = "identity|relu|tanh|sigmoid|sin|selu|celu";

    ChainArgs chain;
    auto *chain_cmd = app.add_subcommand("chain", "simulate Gram chains and write per-trial traces");
    chain_cmd->add_option("--n", chain.n, "batch size");
    chain_cmd->add_option("--d", chain.d, "width");
    chain_cmd->add_option("--depth", chain.depth, "number of layers");
    chain_cmd->add_option("--activation", chain.activation, activation_help);
    chain_cmd->add_option("--norm", chain.norm, "projection|centered|none");
    chain_cmd->add_option("--trials", chain.trials, "independent chains");
    chain_cmd->add_option("--input", chain.input, "orthogonal|graded|correlated");
    chain_cmd->add_option("--input-file", chain.input_file, "CSV with d rows and n columns");
    chain_cmd->add_option("--reference", chain.reference, "auto|none");
    chain_cmd->add_option("--workers", chain.workers, "parallel trials (0: all cores)");
    chain_cmd->add_option("--out", chain.out, "output directory");
    add_common(chain_cmd, false);

    std::string fp_activation = "tanh", fp_norm = "projection";
    std::size_t fp_n = 10;
    bnlab::FixedPointOptions fp_opt;
    auto *fp_cmd = app.add_subcommand("fixed-point", "Monte Carlo BSB1 fixed point of the mean-field map");
    fp_cmd->add_option("--activation", fp_activation, activation_help);
    fp_cmd->add_option("--norm", fp_norm, "projection|centered|none");
    fp_cmd->add_option("--n", fp_n, "batch size");
    fp_cmd->add_option("--samples", fp_opt.samples, "Monte Carlo samples per step");
    fp_cmd->add_option("--tol", fp_opt.tol, "stopping tolerance on b and b*c");
    fp_cmd->add_option("--max-iter", fp_opt.max_iter, "iteration cap");
    fp_cmd->add_option("--damping", fp_opt.damping, "update weight");
    add_common(fp_cmd, true);

    std::string dist_activation = "tanh";
    std::size_t dist_n = 10, dist_restarts = 64;
    auto *dist_cmd = app.add_subcommand("distortion", "estimate the activation distortion constant");
    dist_cmd->add_option("--activation", dist_activation, activation_help);
    dist_cmd->add_option("--n", dist_n, "dimension");
    dist_cmd->add_option("--restarts", dist_restarts, "random restarts");
    add_common(dist_cmd, true);

    std::string mp_eigs;
    std::size_t mp_n = 0, mp_d = 0, mp_drop = 0;
    auto *mp_cmd = app.add_subcommand("mp-check", "compare eigenvalues with the Marchenko-Pastur law");
    mp_cmd->add_option("--eigs", mp_eigs, "CSV of eigenvalues, one spectrum per line or one column")
        ->required();
    mp_cmd->add_option("--n", mp_n, "batch size")->required();
    mp_cmd->add_option("--d", mp_d, "width")->required();
    mp_cmd->add_option("--drop-top", mp_drop, "largest eigenvalues to drop per spectrum");
    mp_cmd->add_option("--format", common.format, "output format")
        ->check(CLI::IsMember({"json", "csv"}));

    std::string exp_name, exp_out;
    std::vector<std::string> overrides;
    std::size_t exp_workers = 0;
    std::size_t exp_n = 0, exp_d = 0, exp_depth = 0, exp_trials = 0;
    auto *exp_cmd = app.add_subcommand("experiment", "run a named experiment recipe");
    exp_cmd->add_option("name", exp_name,
                        "fig1a|fig1b|mp|coupling|wishart-det|product-decay|union-bound")
        ->required()
        ->check(CLI::IsMember(bnlab::experiment_names()));
    exp_cmd->add_option("--out", exp_out, "output directory (default: out_<name>)");
    exp_cmd->add_option("--override", overrides, "key=value, repeatable; lists are comma separated")
        ->default_str("");
    exp_cmd->add_option("--workers", exp_workers, "parallel trials (0: all cores)");
    auto *o_n = exp_cmd->add_option("--n", exp_n, "shortcut for --override n=... (wishart-det: shape [n, d] with --d)")->default_str("");
    auto *o_d = exp_cmd->add_option("--d", exp_d, "shortcut for --override d=... (wishart-det: shape [n, d] with --n)")->default_str("");
    auto *o_depth = exp_cmd->add_option("--depth", exp_depth, "shortcut for --override depth=...")->default_str("");
    auto *o_trials = exp_cmd->add_option("--trials", exp_trials, "shortcut for --override trials=...")->default_str("");
    add_common(exp_cmd, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::FileError &e) {
        return report_error("Io", e.what(), kIo);
    } catch (const CLI::ParseError &e) {
        return report_error("Usage", e.what(), kUsage);
    }

    try {
        if (*chain_cmd)
            return run_chain(chain, common.seed);

        if (*fp_cmd) {
            const bnlab::Activation a(bnlab::parse_activation(fp_activation));
            const auto kind = bnlab::parse_norm(fp_norm);
            bnlab::RngStream stream(common.seed, 0);
            const auto fp = bnlab::solve_fixed_point(a, kind, fp_n, stream, fp_opt);
            emit({{"n", fp.n},
                  {"b_star", fp.b_star},
                  {"c_star", fp.c_star},
                  {"stderr", fp.mc_stderr},
                  {"b_stderr", fp.b_stderr},
                  {"c_stderr", fp.c_stderr},
                  {"iterations", fp.iterations},
                  {"eigenvalues", fp.eigenvalues},
                  {"seed", common.seed}},
                 common.format);
            return kOk;
        }

        if (*dist_cmd) {
            const bnlab::Activation a(bnlab::parse_activation(dist_activation));
            const auto est = bnlab::distortion(a, dist_n, dist_restarts,
                                               bnlab::RngStream(common.seed, 0));
            emit({{"gamma", est.gamma},
                  {"maximizer", est.maximizer},
                  {"restarts_used", est.restarts_used},
                  {"seed", common.seed}},
                 common.format);
            return kOk;
        }

        if (*mp_cmd) {
            auto rows = read_numeric_csv(mp_eigs);
            std::vector<std::vector<double>> spectra;
            if (!rows.empty() && rows.front().size() == 1) {
                spectra.emplace_back();
                for (const auto &r : rows)
                    spectra.back().push_back(r[0]);
            } else {
                spectra = std::move(rows);
            }
            if (spectra.empty())
                throw bnlab::Error(bnlab::ErrorCode::TooFewEigenvalues, "no eigenvalues in " + mp_eigs);
            const bnlab::MpLaw law(static_cast<double>(mp_n) / static_cast<double>(mp_d));
            std::vector<double> pool;
            for (const auto &s : spectra) {
                const auto b = bnlab::median_normalized_bulk(s, mp_drop);
                pool.insert(pool.end(), b.begin(), b.end());
            }
            std::sort(pool.begin(), pool.end());
            const double hw = bnlab::thresholds::kMpBandSigmas * std::sqrt(law.ratio);
            emit({{"ks", bnlab::ks_against_mp(pool, law)},
                  {"band_fraction", bnlab::band_fraction(pool, 1.0, hw)},
                  {"count", pool.size()}},
                 common.format);
            return kOk;
        }

        if (*exp_cmd) {
            json cfg = bnlab::default_config(exp_name);
            const std::pair<CLI::Option *, std::pair<const char *, std::size_t>> shortcuts[] = {
                {o_n, {"n", exp_n}}, {o_d, {"d", exp_d}}, {o_depth, {"depth", exp_depth}},
                {o_trials, {"trials", exp_trials}}};
            if (exp_name == "wishart-det" && (o_n->count() > 0 || o_d->count() > 0)) {
                // One shape from --n/--d.
                if (o_n->count() == 0 || o_d->count() == 0)
                    throw bnlab::Error(bnlab::ErrorCode::BadParameter,
                                       "wishart-det needs --n and --d together");
                cfg["shapes"] = json::array({json::array({exp_n, exp_d})});
                o_n->clear();
                o_d->clear();
            }
            for (const auto &[opt, kv] : shortcuts)
                if (opt->count() > 0)
                    bnlab::apply_override(cfg, std::string(kv.first) + "=" + std::to_string(kv.second));
            for (const auto &o : overrides)
                bnlab::apply_override(cfg, o);
            const std::filesystem::path out = exp_out.empty() ? "out_" + exp_name : exp_out;
            bnlab::prepare_output_dir(out);
            bnlab::ExperimentReport pending;
            pending.name = exp_name;
            pending.config = cfg;
            pending.seed = common.seed;
            bnlab::write_manifest(out, pending, false);
            const auto rep = bnlab::run_experiment(exp_name, cfg, common.seed,
                                                   exp_workers ? exp_workers : bnlab::default_workers());
            bnlab::write_report(out, rep);
            std::cout << json({{"experiment", exp_name}, {"out", out.string()},
                               {"derived", rep.derived}}).dump() << '\n';
            return kOk;
        }
    } catch (const bnlab::Error &e) {
        return report_error(std::string(bnlab::error_name(e.code())), e.what(),
                            exit_code_for(e.code()));
    } catch (const json::exception &e) {
        return report_error("BadParameter", e.what(), kUsage);
    } catch (const std::exception &e) {
        return report_error("Internal", e.what(), kNumerical);
    }
    return kUsage;
}
