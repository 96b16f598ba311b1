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

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "qmpe/error.hpp"
#include "qmpe/experiments.hpp"
#include "qmpe/protocol.hpp"

namespace qmpe {

inline constexpr const char *kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// Line-delimited records. Every file starts with a "meta" line; the field
// order of each record type is fixed by the writers below and documented in
// docs/formats.md.

inline Json config_to_json(const RunConfig &config) {
    Json j;
    j["d"] = config.d;
    j["epsilon"] = config.epsilon;
    j["k_max"] = config.k_max;
    j["grid_points"] = config.resolved_grid_points();
    j["gammas"] = config.noise.gammas;
    j["seed"] = config.seed;
    j["m_max"] = config.m_max;
    if (config.theta_true) {
        j["theta_true"] = *config.theta_true;
    } else {
        j["theta_true"] = "random";
    }
    j["record_outcomes"] = config.record_outcomes;
    return j;
}

inline RunConfig config_from_json(const Json &j) {
    RunConfig c;
    c.d = j.at("d").get<int>();
    c.epsilon = j.at("epsilon").get<double>();
    c.k_max = j.at("k_max").get<int>();
    c.grid_points = j.at("grid_points").get<int>();
    c.noise.gammas = j.at("gammas").get<std::vector<double>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.m_max = j.at("m_max").get<std::int64_t>();
    if (j.at("theta_true").is_array()) c.theta_true = j.at("theta_true").get<std::vector<double>>();
    c.record_outcomes = j.at("record_outcomes").get<bool>();
    return c;
}

inline Json covariance_to_json(const CovarianceMatrix &v) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < v.cols(); ++j) row.push_back(v(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline CovarianceMatrix covariance_from_json(const Json &rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    CovarianceMatrix v(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != n) {
            throw Error(ErrorCode::invalid_dimension, "covariance row length");
        }
        for (Eigen::Index j = 0; j < n; ++j) v(i, j) = rows[i][j].get<double>();
    }
    return v;
}

inline Json round_to_json(const RoundRecord &r) {
    Json j;
    j["type"] = "round";
    j["k"] = r.k;
    j["M"] = r.M;
    j["m"] = r.m;
    j["resources"] = r.cumulative_resources;
    j["p_half"] = r.p_half_final;
    j["truth_in_c"] = r.truth_in_c;
    j["stalled"] = r.stalled;
    j["estimate"] = r.estimate;
    j["covariance"] = covariance_to_json(r.covariance);
    Json outcomes = Json::array();
    for (const auto &meas : r.outcomes) {
        Json o;
        o["phi"] = meas.phi;
        o["o"] = meas.outcome;
        outcomes.push_back(std::move(o));
    }
    j["outcomes"] = std::move(outcomes);
    return j;
}

inline RoundRecord round_from_json(const Json &j) {
    RoundRecord r;
    r.k = j.at("k").get<int>();
    r.M = j.at("M").get<std::int64_t>();
    r.m = j.at("m").get<std::int64_t>();
    r.cumulative_resources = j.at("resources").get<std::int64_t>();
    r.p_half_final = j.at("p_half").get<double>();
    r.truth_in_c = j.at("truth_in_c").get<bool>();
    r.stalled = j.at("stalled").get<bool>();
    r.estimate = j.at("estimate").get<std::vector<double>>();
    r.covariance = covariance_from_json(j.at("covariance"));
    for (const auto &o : j.at("outcomes")) r.outcomes.push_back({o.at("phi").get<std::vector<double>>(), o.at("o").get<int>()});
    return r;
}

inline Json meta_header(const std::string &command, Json config) {
    Json j;
    j["type"] = "meta";
    j["format"] = "qmpe-records";
    j["version"] = kVersion;
    j["command"] = command;
    j["config"] = std::move(config);
    return j;
}

/// Run file: meta line, one "round" line per round, closing "result" line.
inline void write_run_records(const RunResult &result, const Json &meta, std::ostream &out) {
    out << meta.dump() << '\n';
    for (const auto &r : result.rounds) out << round_to_json(r).dump() << '\n';
    Json tail;
    tail["type"] = "result";
    tail["theta_true"] = result.theta_true;
    tail["aborted"] = result.aborted;
    tail["stalled"] = result.stalled();
    tail["flag_reason"] = result.flag_reason;
    tail["rounds"] = result.rounds.size();
    tail["total_resources"] = result.rounds.empty() ? 0 : total_resources(result.rounds);
    if (!result.rounds.empty()) {
        tail["final_estimate"] = result.final_estimate();
    } else {
        tail["final_estimate"] = Json::array();
    }
    out << tail.dump() << '\n';
}

struct RunFile {
    Json meta;
    RunResult result;
};

inline RunFile read_run_records(std::istream &in) {
    RunFile file;
    std::string line;
    bool first = true;
    bool closed = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::invalid_argument, "malformed record line");
        const std::string type = j.value("type", "");
        if (first) {
            if (type != "meta") throw Error(ErrorCode::invalid_argument, "missing meta header");
            file.meta = j;
            first = false;
        } else if (type == "round") {
            file.result.rounds.push_back(round_from_json(j));
        } else if (type == "result") {
            file.result.theta_true = j.at("theta_true").get<std::vector<double>>();
            file.result.aborted = j.at("aborted").get<bool>();
            file.result.flag_reason = j.at("flag_reason").get<std::string>();
            closed = true;
        }
    }
    if (first) throw Error(ErrorCode::invalid_argument, "empty record file");
    if (!closed) throw Error(ErrorCode::invalid_argument, "run record file has no result line");
    return file;
}

inline Json run_summary_to_json(const RunSummary &run) {
    Json j;
    j["type"] = "run";
    j["index"] = run.index;
    j["seed"] = run.seed;
    j["theta_true"] = run.result.theta_true;
    j["aborted"] = run.result.aborted;
    j["flag_reason"] = run.result.flag_reason;
    Json rounds = Json::array();
    for (const auto &r : run.result.rounds) rounds.push_back(round_to_json(r));
    j["rounds"] = std::move(rounds);
    return j;
}

inline RunSummary run_summary_from_json(const Json &j) {
    RunSummary run;
    run.index = j.at("index").get<std::size_t>();
    run.seed = j.at("seed").get<std::uint64_t>();
    run.result.theta_true = j.at("theta_true").get<std::vector<double>>();
    run.result.aborted = j.at("aborted").get<bool>();
    run.result.flag_reason = j.at("flag_reason").get<std::string>();
    for (const auto &r : j.at("rounds")) run.result.rounds.push_back(round_from_json(r));
    return run;
}

/// Campaign file: meta line, then one "run" line per run ordered by index.
inline void write_campaign_records(const CampaignStats &stats, const Json &meta, std::ostream &out) {
    out << meta.dump() << '\n';
    for (const auto &run : stats.runs) out << run_summary_to_json(run).dump() << '\n';
}

struct CampaignFile {
    Json meta;
    std::map<std::size_t, RunSummary> runs;
};

/// Reads a (possibly partial, possibly unordered) campaign record file.
/// A truncated last line is ignored so that interrupted campaigns resume.
inline CampaignFile read_campaign_records(std::istream &in) {
    CampaignFile file;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        if (first) {
            if (j.value("type", "") != "meta") throw Error(ErrorCode::invalid_argument, "missing meta header");
            file.meta = std::move(j);
            first = false;
            continue;
        }
        if (j.value("type", "") == "run") {
            auto run = run_summary_from_json(j);
            const auto idx = run.index;
            file.runs[idx] = std::move(run);
        }
    }
    if (first) throw Error(ErrorCode::invalid_argument, "empty record file");
    return file;
}

/// Rebuilds campaign statistics from a complete record file.
inline CampaignStats campaign_from_records(const CampaignFile &file) {
    CampaignStats stats;
    const Json &cfg = file.meta.at("config");
    stats.config = config_from_json(cfg.at("run"));
    stats.campaign_seed = stats.config.seed;
    for (const auto &[idx, run] : file.runs) stats.runs.push_back(run);
    return stats;
}

}  // namespace qmpe
