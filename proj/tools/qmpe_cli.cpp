// Copyright 2026 The qmpe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qmpe: command-line driver for single runs, campaigns, fits and the
// simulator equivalence checks.
//
// Exit codes: 0 success, 1 flagged run, 2 configuration error,
// 3 verification failure.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qmpe/qmpe.hpp"

namespace fs = std::filesystem;
using namespace qmpe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFlagged = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerify = 3;

struct Options {
    int d = 1;
    std::vector<double> epsilons{1e-3};
    int k_max = 10;
    int grid = 0;
    std::vector<double> gammas;
    std::uint64_t seed = 0;
    std::int64_t m_max = 1000;
    std::vector<double> theta;
    bool no_outcomes = false;
    int repetitions = 100;
    unsigned threads = 0;
    bool fresh = false;
    int tail = 3;
    std::string out;
    std::vector<std::string> inputs;
    std::vector<double> combination;
    double p_err = 0.0;
    std::size_t cases = 1000;
    bool inject_failure = false;
};

/// Config-level problem detected after parsing (maps to exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path output_dir(const Options &opt) {
    fs::path dir = ".";
    if (!opt.out.empty()) {
        dir = opt.out;
    } else if (const char *env = std::getenv("QMPE_OUTPUT_DIR"); env && *env) {
        dir = env;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

RunConfig make_run_config(const Options &opt, double epsilon) {
    RunConfig c;
    c.d = opt.d;
    c.epsilon = epsilon;
    c.k_max = opt.k_max;
    c.grid_points = opt.grid;
    c.noise.gammas = opt.gammas;
    c.seed = opt.seed;
    c.m_max = opt.m_max;
    if (!opt.theta.empty()) c.theta_true = opt.theta;
    c.record_outcomes = !opt.no_outcomes;
    c.validate();
    c.grid_points = c.resolved_grid_points();
    return c;
}

std::string eps_tag(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", eps);
    return buf;
}

std::ofstream open_output(const fs::path &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << std::setprecision(12);
    return out;
}

/// "#"-prefixed metadata block for plot tables and text summaries.
void write_text_header(std::ostream &out, const Json &meta, const std::string &columns) {
    out << "# qmpe " << kVersion << '\n';
    out << "# command: " << meta.at("command").get<std::string>() << '\n';
    out << "# config: " << meta.at("config").dump() << '\n';
    if (!columns.empty()) out << "# columns: " << columns << '\n';
}

std::string format_vector(const std::vector<double> &v) {
    std::ostringstream s;
    s << std::setprecision(10) << '(';
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
    s << ')';
    return s.str();
}

// ---------------------------------------------------------------- run

int cmd_run(const Options &opt) {
    if (opt.epsilons.size() != 1) throw ConfigError("run takes exactly one --epsilon value");
    const RunConfig config = make_run_config(opt, opt.epsilons.front());
    const fs::path dir = output_dir(opt);
    const Json meta = meta_header("run", config_to_json(config));

    const RunResult result = run_estimation(config);
    {
        auto out = open_output(dir / "run.jsonl");
        write_run_records(result, meta, out);
    }

    std::ostringstream s;
    write_text_header(s, meta, "");
    s << std::setprecision(6);
    s << "round      M        m         N_T     p_half  truth_in_C  stalled\n";
    for (const auto &r : result.rounds) {
        s << std::setw(5) << r.k << std::setw(7) << r.M << std::setw(9) << r.m << std::setw(12)
          << r.cumulative_resources << std::setw(11) << r.p_half_final << std::setw(12)
          << (r.truth_in_c ? "yes" : "no") << std::setw(9) << (r.stalled ? "yes" : "no") << '\n';
    }
    if (!result.rounds.empty()) {
        const auto &last = result.rounds.back();
        s << "final estimate: " << format_vector(last.estimate) << '\n';
        s << "true phases:    " << format_vector(result.theta_true) << '\n';
        std::vector<double> err;
        for (std::size_t j = 0; j < last.estimate.size(); ++j) {
            err.push_back(std::abs(wrap_difference(last.estimate[j] - result.theta_true[j])));
        }
        s << "abs error:      " << format_vector(err) << '\n';
        s << "N_T:            " << total_resources(result.rounds) << '\n';
        s << "covariance V:\n";
        for (Eigen::Index i = 0; i < last.covariance.rows(); ++i) {
            s << "  ";
            for (Eigen::Index j = 0; j < last.covariance.cols(); ++j) s << std::setw(14) << last.covariance(i, j);
            s << '\n';
        }
        bool all_in = true;
        for (const auto &r : result.rounds) all_in = all_in && r.truth_in_c;
        s << "truth inside every cut: " << (all_in ? "yes" : "no") << '\n';
    }
    if (result.flagged()) s << "FLAGGED: " << result.flag_reason << '\n';
    {
        auto out = open_output(dir / "run_summary.txt");
        out << s.str();
    }
    std::cout << s.str();
    return result.flagged() ? kExitFlagged : kExitOk;
}

// ---------------------------------------------------------------- analysis

Json fit_to_json(const FitSummary &f) {
    Json j;
    j["mean"] = f.value;
    j["median"] = f.median;
    j["stddev"] = f.stddev;
    j["stderr"] = f.standard_error();
    j["samples"] = f.samples;
    return j;
}

Json analyze_campaign(const CampaignStats &stats, int tail) {
    Json j;
    const int d = stats.d();
    j["epsilon"] = stats.config.epsilon;
    j["d"] = d;
    j["k_max"] = stats.config.k_max;
    j["campaign_seed"] = stats.campaign_seed;
    j["runs"] = stats.runs.size();
    j["flagged"] = stats.n_flagged();
    j["aborted"] = stats.n_aborted();
    j["fit_runs"] = stats.n_fit_runs();

    if (stats.n_fit_runs() > 0 && stats.config.k_max >= tail) {
        Json h = fit_to_json(fit_heisenberg_constant(stats, tail));
        if (d <= 3) h["reference"] = reference::heisenberg_constant(d, stats.config.epsilon);
        j["heisenberg_constant"] = std::move(h);
        if (d >= 2) {
            j["correlation_ratio"] = fit_to_json(correlation_ratio(stats, tail));
            j["correlation_advantage_fraction"] = correlation_advantage_fraction(stats, tail);
        }
    } else {
        j["heisenberg_constant"] = nullptr;
    }

    if (stats.n_sim() > 0) {
        const auto e = campaign_error_rate(stats);
        Json er;
        er["p_err"] = e.p_err;
        er["delta"] = e.delta;
        er["degenerate"] = e.degenerate;
        er["n_err"] = stats.n_err();
        er["n_sim"] = stats.n_sim();
        er["rounds"] = stats.rounds_per_run();
        er["first_round_errors"] = stats.first_round_errors();
        er["first_error_by_round"] = stats.first_error_by_round();
        if (d <= 3) er["reference"] = reference::kErrorPrefactor[d - 1] * stats.config.epsilon;
        j["error_rate"] = std::move(er);
    }

    if (!stats.config.noise.noiseless()) {
        try {
            const auto rep = noise_crossover_analysis(stats, tail);
            Json n;
            n["crossover_scale"] = rep.crossover_scale;
            n["capped_round"] = rep.capped_round;
            n["crossover_resources"] = rep.crossover_resources;
            n["early_rounds"] = {rep.early_first_round, rep.early_last_round};
            n["late_first_round"] = rep.late_first_round;
            n["early_slope"] = rep.early_slope;
            n["late_slope"] = rep.late_slope;
            n["late_nt_variance"] = fit_to_json(rep.late_nt_variance);
            n["late_relative_spread"] = rep.late_relative_spread;
            n["late_constant"] = rep.late_constant;
            n["sub_shot_noise"] = rep.sub_shot_noise;
            j["noise_crossover"] = std::move(n);
        } catch (const Error &e) {
            j["noise_crossover"] = std::string("not applicable: ") + e.what();
        }
    }
    return j;
}

std::string scaling_columns(int d) {
    std::string cols = "N_T";
    for (int i = 1; i <= d; ++i) {
        for (int j = i; j <= d; ++j) cols += " V" + std::to_string(i) + std::to_string(j) + "*N_T^2";
    }
    return cols;
}

/// Per-sample and per-round-mean scaling tables (N_T vs V_ij N_T^2).
void write_scaling_tables(const CampaignStats &stats, const Json &meta, const fs::path &dir, const std::string &tag) {
    const int d = stats.d();
    {
        auto out = open_output(dir / ("scaling_eps" + tag + ".dat"));
        write_text_header(out, meta, scaling_columns(d) + " k run");
        for (const auto &run : stats.runs) {
            if (run.result.flagged()) continue;
            for (const auto &r : run.result.rounds) {
                const auto nt = static_cast<double>(r.cumulative_resources);
                out << r.cumulative_resources;
                for (int i = 0; i < d; ++i) {
                    for (int j = i; j < d; ++j) out << ' ' << r.covariance(i, j) * nt * nt;
                }
                out << ' ' << r.k << ' ' << run.index << '\n';
            }
        }
    }
    {
        auto out = open_output(dir / ("scaling_mean_eps" + tag + ".dat"));
        write_text_header(out, meta, "mean_" + scaling_columns(d) + " k samples");
        for (const auto &avg : round_averages(stats)) {
            if (avg.samples == 0) continue;
            out << avg.resources;
            for (int i = 0; i < d; ++i) {
                for (int j = i; j < d; ++j) out << ' ' << avg.scaled_covariance[static_cast<std::size_t>(i * d + j)];
            }
            out << ' ' << avg.k << ' ' << avg.samples << '\n';
        }
    }
}

/// Writes the per-epsilon fit summary plus the (eps, C_H) and (eps, P_err)
/// tables; returns the summary document.
Json write_fit_outputs(const std::vector<Json> &analyses, const Json &meta, const fs::path &dir) {
    Json doc;
    doc["meta"] = meta;
    doc["campaigns"] = analyses;

    std::vector<std::pair<double, double>> points;
    {
        auto ch = open_output(dir / "ch_vs_eps.dat");
        write_text_header(ch, meta, "epsilon C_H_mean C_H_stderr C_H_median samples");
        auto pe = open_output(dir / "perr_vs_eps.dat");
        write_text_header(pe, meta, "epsilon P_err delta N_err N_sim");
        for (const auto &a : analyses) {
            const double eps = a.at("epsilon").get<double>();
            if (a.contains("heisenberg_constant") && !a["heisenberg_constant"].is_null()) {
                const auto &h = a["heisenberg_constant"];
                ch << eps << ' ' << h["mean"].get<double>() << ' ' << h["stderr"].get<double>() << ' '
                   << h["median"].get<double>() << ' ' << h["samples"].get<std::size_t>() << '\n';
            }
            if (a.contains("error_rate")) {
                const auto &e = a["error_rate"];
                pe << eps << ' ' << e["p_err"].get<double>() << ' ' << e["delta"].get<double>() << ' '
                   << e["n_err"].get<std::size_t>() << ' ' << e["n_sim"].get<std::size_t>() << '\n';
                points.emplace_back(eps, e["p_err"].get<double>());
            }
        }
    }
    try {
        const auto fit = fit_error_model(points);
        Json m;
        m["c1"] = fit.c1;
        m["c2"] = fit.c2;
        m["c_linear"] = fit.c_linear;
        m["points"] = fit.points;
        doc["error_model"] = std::move(m);
    } catch (const Error &e) {
        doc["error_model"] = std::string("not fitted: ") + e.what();
    }
    auto out = open_output(dir / "fit_summary.json");
    out << doc.dump(2) << '\n';
    return doc;
}

void print_analysis(const Json &a) {
    std::cout << std::setprecision(6);
    std::cout << "epsilon " << a["epsilon"].get<double>() << ": " << a["runs"].get<std::size_t>() << " runs, "
              << a["flagged"].get<std::size_t>() << " flagged (" << a["aborted"].get<std::size_t>() << " aborted)\n";
    if (!a["heisenberg_constant"].is_null()) {
        const auto &h = a["heisenberg_constant"];
        std::cout << "  plateau V_jj*N_T^2: mean " << h["mean"].get<double>() << " +- " << h["stderr"].get<double>()
                  << ", median " << h["median"].get<double>();
        if (h.contains("reference")) std::cout << " (reference " << h["reference"].get<double>() << ")";
        std::cout << '\n';
    }
    if (a.contains("correlation_ratio")) {
        std::cout << "  correlation ratio: " << a["correlation_ratio"]["mean"].get<double>() << " +- "
                  << a["correlation_ratio"]["stderr"].get<double>() << '\n';
    }
    if (a.contains("error_rate")) {
        const auto &e = a["error_rate"];
        std::cout << "  per-round error rate: " << e["p_err"].get<double>() << " +- " << e["delta"].get<double>()
                  << " (" << e["n_err"].get<std::size_t>() << "/" << e["n_sim"].get<std::size_t>() << " runs)";
        if (e.contains("reference")) std::cout << " (reference " << e["reference"].get<double>() << ")";
        std::cout << '\n';
    }
    if (a.contains("noise_crossover")) {
        const auto &n = a["noise_crossover"];
        if (n.is_string()) {
            std::cout << "  noise crossover: " << n.get<std::string>() << '\n';
        } else {
            std::cout << "  noise crossover: early slope " << n["early_slope"].get<double>() << ", late slope "
                      << n["late_slope"].get<double>() << ", late N_T*V " << n["late_nt_variance"]["mean"].get<double>()
                      << '\n';
        }
    }
}

// ---------------------------------------------------------------- campaign

CampaignStats load_campaign(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    return campaign_from_records(read_campaign_records(in));
}

int cmd_campaign(const Options &opt) {
    if (opt.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    const fs::path dir = output_dir(opt);
    std::vector<Json> analyses;
    Json all_config;
    all_config["epsilons"] = opt.epsilons;
    all_config["repetitions"] = opt.repetitions;
    all_config["tail"] = opt.tail;

    for (double eps : opt.epsilons) {
        RunConfig config = make_run_config(opt, eps);
        config.theta_true.reset();
        const std::string tag = eps_tag(eps);
        const fs::path records = dir / ("campaign_eps" + tag + ".jsonl");

        RunConfig recorded = config;
        recorded.seed = opt.seed;
        Json meta_config;
        meta_config["run"] = config_to_json(recorded);
        meta_config["repetitions"] = opt.repetitions;
        meta_config["threads"] = "any";
        const Json meta = meta_header("campaign", meta_config);
        all_config["run"] = meta_config["run"];
        all_config["run"].erase("epsilon");

        CampaignOptions options;
        options.threads = opt.threads;
        if (!opt.fresh && fs::exists(records)) {
            std::ifstream in(records);
            auto file = read_campaign_records(in);
            if (file.meta.at("config").at("run") != meta_config["run"]) {
                throw ConfigError(records.string() + " was produced with a different configuration (use --fresh)");
            }
            for (auto &[idx, run] : file.runs) {
                if (idx < static_cast<std::size_t>(opt.repetitions)) options.completed.emplace(idx, std::move(run));
            }
            std::cout << "resuming " << records.string() << ": " << options.completed.size() << " runs on file\n";
        }

        // Append as runs finish so an interrupted campaign can resume, then
        // rewrite the file in index order.
        {
            std::ofstream journal(records, std::ios::binary | std::ios::trunc);
            if (!journal) throw ConfigError("cannot write " + records.string());
            journal << meta.dump() << '\n';
            for (const auto &[idx, run] : options.completed) journal << run_summary_to_json(run).dump() << '\n';
            journal.flush();
            options.on_run_complete = [&journal](const RunSummary &s) {
                journal << run_summary_to_json(s).dump() << '\n';
                journal.flush();
            };
            const auto stats = run_campaign(config, opt.repetitions, opt.seed, std::move(options));
            journal.close();
            {
                auto out = open_output(records);
                write_campaign_records(stats, meta, out);
            }
            write_scaling_tables(stats, meta, dir, tag);
            analyses.push_back(analyze_campaign(stats, opt.tail));
        }
        print_analysis(analyses.back());
    }
    write_fit_outputs(analyses, meta_header("campaign", all_config), dir);
    return kExitOk;
}

// ---------------------------------------------------------------- fit

int cmd_fit(const Options &opt) {
    if (opt.inputs.empty()) throw ConfigError("fit needs at least one --input campaign file");
    const fs::path dir = output_dir(opt);
    std::vector<Json> analyses;
    Json cfg;
    cfg["inputs"] = opt.inputs;
    cfg["tail"] = opt.tail;
    for (const auto &path : opt.inputs) {
        const auto stats = load_campaign(path);
        const Json meta = meta_header("fit", cfg);
        write_scaling_tables(stats, meta, dir, eps_tag(stats.config.epsilon));
        analyses.push_back(analyze_campaign(stats, opt.tail));
        print_analysis(analyses.back());
    }
    const auto doc = write_fit_outputs(analyses, meta_header("fit", cfg), dir);
    if (doc["error_model"].is_object()) {
        std::cout << "error model P_err = c1 eps^c2: c1 " << doc["error_model"]["c1"].get<double>() << ", c2 "
                  << doc["error_model"]["c2"].get<double>() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------- compare

int cmd_compare(const Options &opt) {
    if (opt.inputs.size() != 1) throw ConfigError("compare takes exactly one --input campaign file");
    const auto stats = load_campaign(opt.inputs.front());
    const int d = stats.d();
    if (d < 2) throw ConfigError("compare needs a campaign with d >= 2");
    std::vector<double> n = opt.combination;
    if (n.empty()) {
        n.assign(static_cast<std::size_t>(d), 0.0);
        n[0] = 1.0;
        n[1] = -1.0;
    }
    if (static_cast<int>(n.size()) != d) throw ConfigError("--n must have d entries");

    double p_err = opt.p_err;
    if (p_err <= 0.0) {
        const auto e = campaign_error_rate(stats);
        if (!(e.p_err > 0.0 && e.p_err < 1.0)) {
            throw ConfigError("campaign error rate is 0 or 1; pass --perr explicitly");
        }
        p_err = e.p_err;
    }
    const auto parallel = linear_combination_plateau(stats, n, opt.tail);
    const double sequential = sequential_baseline_variance(d, n, p_err, 1.0);
    const double advantage = correlation_advantage_fraction(stats, opt.tail);

    Json cfg;
    cfg["input"] = opt.inputs.front();
    cfg["n"] = n;
    cfg["p_err"] = p_err;
    cfg["tail"] = opt.tail;
    Json doc;
    doc["meta"] = meta_header("compare", cfg);
    doc["parallel"] = fit_to_json(parallel);
    doc["sequential"] = sequential;
    doc["ratio"] = parallel.value / sequential;
    doc["correlation_advantage_fraction"] = advantage;
    const fs::path dir = output_dir(opt);
    auto out = open_output(dir / "compare.json");
    out << doc.dump(2) << '\n';

    std::cout << std::setprecision(6) << "linear combination n = " << format_vector(n) << ", P_err = " << p_err
              << '\n'
              << "  parallel   n^T V n * N_T^2: " << parallel.value << " +- " << parallel.standard_error() << " ("
              << parallel.samples << " samples)\n"
              << "  sequential baseline:        " << sequential << '\n'
              << "  correlation advantage in " << 100.0 * advantage << "% of samples\n";
    return kExitOk;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const Options &opt) {
    if (opt.cases < 1) throw ConfigError("--cases must be >= 1");
    VerifyOptions v;
    v.cases = opt.cases;
    v.seed = opt.seed;
    v.inject_failure = opt.inject_failure;
    bool ok = true;
    for (const auto &b : run_verification(v)) {
        std::cout << std::setprecision(3) << std::left << std::setw(38) << b.name << std::right << " cases "
                  << std::setw(6) << b.cases << "  max |delta| " << std::scientific << b.max_deviation << "  tol "
                  << b.tolerance << std::defaultfloat << "  " << std::fixed << b.seconds << " s" << std::defaultfloat
                  << "  " << (b.passed() ? "ok" : "FAIL") << '\n';
        for (const auto &f : b.failures) {
            std::cout << "    case " << f.index << " seed " << f.seed << " deviation " << std::scientific
                      << f.deviation << std::defaultfloat << '\n';
        }
        ok = ok && b.passed();
    }
    return ok ? kExitOk : kExitVerify;
}

// ---------------------------------------------------------------- options

void add_model_options(CLI::App *cmd, Options &opt, bool many_eps) {
    cmd->add_option("--d", opt.d, "number of phases")->capture_default_str();
    auto *eps = cmd->add_option("--epsilon", opt.epsilons, "decision parameter(s) in (0,1)")->capture_default_str();
    if (many_eps) {
        eps->delimiter(',');
    } else {
        eps->expected(1);
    }
    cmd->add_option("--kmax", opt.k_max, "number of rounds")->capture_default_str();
    cmd->add_option("--G", opt.grid, "grid points per dimension (0 = default for d)")->capture_default_str();
    cmd->add_option("--gamma", opt.gammas, "dephasing rates Gamma_1..Gamma_d")->delimiter(',');
    cmd->add_option("--seed", opt.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--mmax", opt.m_max, "per-round measurement cap")->capture_default_str();
    cmd->add_option("--out", opt.out, "output directory (default $QMPE_OUTPUT_DIR or .)");
    cmd->add_flag("--no-outcomes", opt.no_outcomes, "omit per-measurement outcomes from records");
}

}  // namespace

int main(int argc, char **argv) {
    // One option set per subcommand: a config file may carry sections for
    // several subcommands, and those must not leak into each other.
    Options run_opt, campaign_opt, fit_opt, compare_opt, verify_opt;
    verify_opt.seed = 1;
    CLI::App app{"Multiparameter quantum phase estimation simulator"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML configuration file; [run]/[campaign]/... sections, flags override");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_version_flag("--version", kVersion);

    auto *run = app.add_subcommand("run", "single estimation run");
    add_model_options(run, run_opt, false);
    run->add_option("--theta", run_opt.theta, "true phases (default: drawn from the seed)")->delimiter(',');

    auto *campaign = app.add_subcommand("campaign", "independent runs, fits and plot tables");
    add_model_options(campaign, campaign_opt, true);
    campaign->add_option("--repetitions", campaign_opt.repetitions, "runs per epsilon")->capture_default_str();
    campaign->add_option("--threads", campaign_opt.threads, "worker threads (0 = auto)")->capture_default_str();
    campaign->add_option("--tail", campaign_opt.tail, "plateau fit window in rounds")->capture_default_str();
    campaign->add_flag("--fresh", campaign_opt.fresh, "ignore existing record files instead of resuming");

    auto *fit = app.add_subcommand("fit", "refit persisted campaign records");
    fit->add_option("--input", fit_opt.inputs, "campaign record files")->required();
    fit->add_option("--tail", fit_opt.tail, "plateau fit window in rounds")->capture_default_str();
    fit->add_option("--out", fit_opt.out, "output directory (default $QMPE_OUTPUT_DIR or .)");

    auto *compare = app.add_subcommand("compare", "parallel vs sequential variance of a linear combination");
    compare->add_option("--input", compare_opt.inputs, "campaign record file")->required();
    compare->add_option("--n", compare_opt.combination, "coefficients (default e_1 - e_2)")->delimiter(',');
    compare->add_option("--perr", compare_opt.p_err, "per-round error rate for the baseline (default: measured)");
    compare->add_option("--tail", compare_opt.tail, "plateau fit window in rounds")->capture_default_str();
    compare->add_option("--out", compare_opt.out, "output directory (default $QMPE_OUTPUT_DIR or .)");

    auto *verify = app.add_subcommand("verify", "closed form vs simulator equivalence batteries");
    verify->add_option("--cases", verify_opt.cases, "state-vector cases (other batteries use a fifth)")->capture_default_str();
    verify->add_option("--seed", verify_opt.seed, "battery seed")->capture_default_str();
    verify->add_flag("--inject-failure", verify_opt.inject_failure, "corrupt one case (tests the failure path)");

    for (auto *sub : {run, campaign, fit, compare, verify}) sub->allow_config_extras(CLI::config_extras_mode::error);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(run_opt);
        if (campaign->parsed()) return cmd_campaign(campaign_opt);
        if (fit->parsed()) return cmd_fit(fit_opt);
        if (compare->parsed()) return cmd_compare(compare_opt);
        return cmd_verify(verify_opt);
    } catch (const ConfigError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Json::exception &e) {
        std::cerr << "error: malformed record file: " << e.what() << '\n';
        return kExitConfig;
    }
}
