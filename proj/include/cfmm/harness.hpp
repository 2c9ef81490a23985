// SPDX-License-Identifier: Apache-2.0
//
// Scenario runner: wires the map, walkers, ray tracer, serving-set logic
// and rate evaluation into the drop/interval loop, and writes the
// machine-readable outputs. Everything is keyed off the master seed so a
// given (config, seed) pair always produces the same bytes.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "cfmm/assoc.hpp"
#include "cfmm/channel.hpp"
#include "cfmm/config.hpp"
#include "cfmm/metrics.hpp"
#include "cfmm/mobility.hpp"
#include "cfmm/phy.hpp"
#include "cfmm/rng.hpp"
#include "cfmm/sitemap.hpp"

namespace cfmm {

// One (drop, interval, UE) observation: service state, rates under both
// precoding schemes, and the association events of that interval.
struct UeIntervalRow {
    int drop = 0;
    int interval = 0;
    int ue = 0;
    bool connected = false;
    int master = -1;
    int pilot = -1;
    int cluster_size = 0;
    int n_candidates = 0;
    double se_mr = 0.0;
    double se_rzf = 0.0;
    double sinr_mr = 0.0;
    double sinr_rzf = 0.0;
    int master_handover = 0;
    int pilot_change = 0;
    int denial = 0;
    int reconnect = 0;
};

struct TraceRow {
    int drop = 0;
    int interval = 0;
    int ue = 0;
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
};

struct RunReport {
    std::vector<UeIntervalRow> rows;
    std::vector<TraceRow> traces;  // filled when requested
    long clamp_anomalies = 0;
    long scan_exhausted = 0;
    std::vector<std::string> invariant_violations;

    long anomaly_total() const { return clamp_anomalies + scan_exhausted; }
};

namespace detail {

inline AssocParams assoc_params_of(const ScenarioConfig& cfg) {
    AssocParams p;
    p.tau_p = cfg.tau_p;
    p.m_max = cfg.policy == Policy::Udn ? 1 : cfg.m_max;
    p.m_ho_db = cfg.m_ho_db;
    p.gain_threshold = cfg.gain_threshold;
    p.pilot_metric = cfg.pilot_metric;
    p.ue_order = cfg.ue_order;
    return p;
}

inline PhyParams phy_params_of(const ScenarioConfig& cfg) {
    PhyParams p;
    p.tau_c = cfg.tau_c;
    p.tau_p = cfg.tau_p;
    p.sigma2 = cfg.sigma2;
    p.p_max = cfg.p_max;
    p.p_ul = cfg.p_ul;
    p.power_exponent = cfg.power_exponent;
    p.n_blocks = cfg.n_blocks;
    p.n_threads = cfg.threads;
    return p;
}

}  // namespace detail

// Run the whole scenario. Drops are independent and sequential; the Monte
// Carlo inside each interval fans out over cfg.threads workers without
// affecting the result.
inline RunReport run_scenario(const ScenarioConfig& cfg, bool with_traces = false) {
    const SiteMap map(cfg.map_width, cfg.map_height, cfg.buildings, cfg.inner_margin);
    const int K = cfg.n_ues;
    const int L = cfg.n_aps();

    std::vector<APSite> sites(L);
    for (int l = 0; l < L; ++l) {
        sites[l].pos = cfg.ap_positions[l];
        sites[l].height = cfg.ap_height;
        sites[l].boresight = cfg.boresights[l];
        sites[l].n_antennas = cfg.n_antennas;
    }
    ChannelConfig chan;
    chan.f_c = cfg.f_c;
    chan.rho_refl_db = cfg.rho_refl_db;
    chan.max_reflections = cfg.max_reflections;
    chan.ue_height = cfg.ue_height;

    const AssocParams ap = detail::assoc_params_of(cfg);
    const PhyParams phy = detail::phy_params_of(cfg);

    RunReport rep;
    rep.rows.reserve(std::size_t(cfg.n_drops) * cfg.n_intervals * K);

    for (int d = 0; d < cfg.n_drops; ++d) {
        std::vector<UEMobilityState> walkers(K);
        for (int k = 0; k < K; ++k) {
            auto rng = derive_stream(cfg.seed, StreamTag::MobilityInit, d, k);
            walkers[k] = init_mobility(map, cfg.mobility, rng);
        }

        std::vector<std::vector<PathSet>> paths(K, std::vector<PathSet>(L));
        Eigen::MatrixXd beta(K, L);
        auto retrace = [&]() {
            for (int k = 0; k < K; ++k) {
                const Vec2 ue = pixel_center(walkers[k].pos);
                for (int l = 0; l < L; ++l) {
                    paths[k][l] = trace_paths(map, sites[l], ue, chan);
                    beta(k, l) = avg_gain(paths[k][l]);
                }
            }
        };

        AssocState st;
        for (int n = 0; n < cfg.n_intervals; ++n) {
            AssocEvents ev;
            if (n == 0) {
                retrace();
                auto rng = derive_stream(cfg.seed, StreamTag::AssocTieBreak, d, n);
                std::tie(st, ev) = initial_access(beta, ap, rng);
            } else {
                for (int k = 0; k < K; ++k) {
                    auto rng = derive_stream(cfg.seed, StreamTag::MobilityStep, d, n, k);
                    const MobilityStepInfo info =
                        step_mobility(walkers[k], map, cfg.mobility, rng);
                    if (info.scan_exhausted) ++rep.scan_exhausted;
                }
                retrace();
                auto rng = derive_stream(cfg.seed, StreamTag::AssocTieBreak, d, n);
                switch (cfg.policy) {
                    case Policy::Dynamic:
                        ev = update(st, beta, ap, rng);
                        break;
                    case Policy::IaEveryStep: {
                        auto [fresh, ignored] = initial_access(beta, ap, rng);
                        ev = diff_events(st, fresh);
                        st = std::move(fresh);
                        break;
                    }
                    case Policy::Udn:
                        ev = udn_step(st, beta, ap, rng);
                        break;
                }
            }

            for (const std::string& msg : check_invariants(st, beta, ap))
                rep.invariant_violations.push_back("drop " + std::to_string(d) +
                                                   " interval " + std::to_string(n) +
                                                   ": " + msg);

            SEJob job;
            job.paths = &paths;
            job.aps = &sites;
            job.assoc = &st;
            job.beta = &beta;
            job.phy = phy;
            job.seed = cfg.seed;
            job.drop = uint64_t(d);
            job.interval = uint64_t(n);
            const SEResult se = evaluate_se(job);
            rep.clamp_anomalies += se.clamp_anomalies;

            for (int k = 0; k < K; ++k) {
                UeIntervalRow row;
                row.drop = d;
                row.interval = n;
                row.ue = k;
                row.connected = st.ues[k].connected;
                row.master = st.ues[k].master;
                row.pilot = st.ues[k].pilot;
                row.cluster_size = int(st.ues[k].cluster.size());
                row.n_candidates = int(st.ues[k].candidates.size());
                row.se_mr = se.se_mr(k);
                row.se_rzf = se.se_rzf(k);
                row.sinr_mr = se.sinr_mr(k);
                row.sinr_rzf = se.sinr_rzf(k);
                row.master_handover = ev.master_handover[k];
                row.pilot_change = ev.pilot_change[k];
                row.denial = ev.denial[k];
                row.reconnect = ev.reconnect[k];
                rep.rows.push_back(row);
                if (with_traces) {
                    const Vec2 pos = pixel_center(walkers[k].pos);
                    rep.traces.push_back(
                        {d, n, k, pos.x, pos.y, walkers[k].heading});
                }
            }
        }
    }
    return rep;
}

// Mobility-only pass: walk every UE through every drop and record the
// trajectory, skipping propagation and rate evaluation entirely.
inline RunReport trace_mobility(const ScenarioConfig& cfg) {
    const SiteMap map(cfg.map_width, cfg.map_height, cfg.buildings, cfg.inner_margin);
    const int K = cfg.n_ues;
    RunReport rep;
    rep.traces.reserve(std::size_t(cfg.n_drops) * cfg.n_intervals * K);
    for (int d = 0; d < cfg.n_drops; ++d) {
        std::vector<UEMobilityState> walkers(K);
        for (int k = 0; k < K; ++k) {
            auto rng = derive_stream(cfg.seed, StreamTag::MobilityInit, d, k);
            walkers[k] = init_mobility(map, cfg.mobility, rng);
        }
        for (int n = 0; n < cfg.n_intervals; ++n) {
            if (n > 0) {
                for (int k = 0; k < K; ++k) {
                    auto rng = derive_stream(cfg.seed, StreamTag::MobilityStep, d, n, k);
                    if (step_mobility(walkers[k], map, cfg.mobility, rng).scan_exhausted)
                        ++rep.scan_exhausted;
                }
            }
            for (int k = 0; k < K; ++k) {
                const Vec2 pos = pixel_center(walkers[k].pos);
                rep.traces.push_back({d, n, k, pos.x, pos.y, walkers[k].heading});
            }
        }
    }
    return rep;
}

namespace detail {

// Fixed, locale-independent float text so identical doubles give identical
// bytes everywhere.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// Percentiles, event totals and rates, cluster statistics and diagnostics.
// The per-drop blocks carry what a between-drops error bar needs.
inline json summarize(const ScenarioConfig& cfg, const RunReport& rep) {
    std::vector<double> se_mr, se_rzf;
    std::vector<std::vector<double>> drop_mr(cfg.n_drops), drop_rzf(cfg.n_drops);
    long handovers = 0, pilot_changes = 0, denials = 0, reconnects = 0;
    double cluster_sum = 0.0;
    long connected_rows = 0;
    int min_candidates = rep.rows.empty() ? 0 : rep.rows.front().n_candidates;

    for (const UeIntervalRow& r : rep.rows) {
        se_mr.push_back(r.se_mr);
        se_rzf.push_back(r.se_rzf);
        drop_mr[r.drop].push_back(r.se_mr);
        drop_rzf[r.drop].push_back(r.se_rzf);
        handovers += r.master_handover;
        pilot_changes += r.pilot_change;
        denials += r.denial;
        reconnects += r.reconnect;
        if (r.connected) {
            cluster_sum += r.cluster_size;
            ++connected_rows;
        }
        min_candidates = std::min(min_candidates, r.n_candidates);
    }

    auto pct_block = [](const std::vector<double>& v) {
        json b;
        b["p05"] = percentile(v, 5.0);
        b["p25"] = percentile(v, 25.0);
        b["p50"] = percentile(v, 50.0);
        b["p75"] = percentile(v, 75.0);
        b["p95"] = percentile(v, 95.0);
        b["mean"] = mean_of(v);
        return b;
    };

    std::vector<double> p05_mr, p05_rzf, p50_mr, p50_rzf;
    for (int d = 0; d < cfg.n_drops; ++d) {
        p05_mr.push_back(percentile(drop_mr[d], 5.0));
        p05_rzf.push_back(percentile(drop_rzf[d], 5.0));
        p50_mr.push_back(percentile(drop_mr[d], 50.0));
        p50_rzf.push_back(percentile(drop_rzf[d], 50.0));
    }

    const double ue_seconds = double(cfg.n_drops) * double(cfg.n_ues) *
                              double(cfg.n_intervals) * cfg.mobility.t_ho;

    json s;
    s["policy"] = to_string(cfg.policy);
    s["seed"] = cfg.seed;
    s["n_drops"] = cfg.n_drops;
    s["n_intervals"] = cfg.n_intervals;
    s["n_ues"] = cfg.n_ues;
    s["n_aps"] = cfg.n_aps();
    s["se_mr"] = pct_block(se_mr);
    s["se_rzf"] = pct_block(se_rzf);
    s["per_drop"] = {{"p05_mr", p05_mr},
                     {"p05_rzf", p05_rzf},
                     {"p50_mr", p50_mr},
                     {"p50_rzf", p50_rzf}};
    s["std_error"] = {{"p05_mr", std_error_of(p05_mr)},
                      {"p05_rzf", std_error_of(p05_rzf)},
                      {"p50_mr", std_error_of(p50_mr)},
                      {"p50_rzf", std_error_of(p50_rzf)}};
    s["events"] = {
        {"master_handovers", handovers},
        {"pilot_changes", pilot_changes},
        {"denials", denials},
        {"reconnects", reconnects},
        {"master_handover_rate_per_ue_s", double(handovers) / ue_seconds},
        {"pilot_change_rate_per_ue_s", double(pilot_changes) / ue_seconds}};
    s["cluster"] = {
        {"avg_size", connected_rows > 0 ? cluster_sum / double(connected_rows) : 0.0},
        {"min_candidates", min_candidates},
        {"connected_ue_intervals", connected_rows}};
    s["diagnostics"] = {{"clamp_anomalies", rep.clamp_anomalies},
                        {"scan_exhausted", rep.scan_exhausted},
                        {"invariant_violations", long(rep.invariant_violations.size())}};
    return s;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace detail

inline std::string metrics_csv(const RunReport& rep) {
    std::string out =
        "drop,interval,ue,connected,master,pilot,cluster_size,n_candidates,"
        "se_mr,se_rzf,sinr_mr,sinr_rzf,master_handover,pilot_change,denial,"
        "reconnect\n";
    for (const UeIntervalRow& r : rep.rows) {
        out += std::to_string(r.drop) + ',' + std::to_string(r.interval) + ',' +
               std::to_string(r.ue) + ',' + (r.connected ? "1" : "0") + ',' +
               std::to_string(r.master) + ',' + std::to_string(r.pilot) + ',' +
               std::to_string(r.cluster_size) + ',' +
               std::to_string(r.n_candidates) + ',' + detail::fmt_double(r.se_mr) +
               ',' + detail::fmt_double(r.se_rzf) + ',' +
               detail::fmt_double(r.sinr_mr) + ',' + detail::fmt_double(r.sinr_rzf) +
               ',' + std::to_string(r.master_handover) + ',' +
               std::to_string(r.pilot_change) + ',' + std::to_string(r.denial) +
               ',' + std::to_string(r.reconnect) + '\n';
    }
    return out;
}

inline std::string events_csv(const RunReport& rep) {
    std::string out = "drop,interval,ue,event\n";
    for (const UeIntervalRow& r : rep.rows) {
        const std::string prefix = std::to_string(r.drop) + ',' +
                                   std::to_string(r.interval) + ',' +
                                   std::to_string(r.ue) + ',';
        if (r.master_handover) out += prefix + "master_handover\n";
        if (r.pilot_change) out += prefix + "pilot_change\n";
        if (r.denial) out += prefix + "denial\n";
        if (r.reconnect) out += prefix + "reconnect\n";
    }
    return out;
}

inline std::string traces_csv(const RunReport& rep) {
    std::string out = "drop,interval,ue,x,y,heading\n";
    for (const TraceRow& t : rep.traces) {
        out += std::to_string(t.drop) + ',' + std::to_string(t.interval) + ',' +
               std::to_string(t.ue) + ',' + detail::fmt_double(t.x) + ',' +
               detail::fmt_double(t.y) + ',' + detail::fmt_double(t.heading) + '\n';
    }
    return out;
}

// Write manifest.json, metrics.csv, events.csv and summary.json (plus
// traces.csv when traces were collected) under out_dir.
inline void write_outputs(const ScenarioConfig& cfg, const RunReport& rep,
                          const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    json manifest;
    manifest["tool"] = "cfmm";
    manifest["format_version"] = 1;
    json outputs = json::array({"manifest.json", "metrics.csv", "events.csv",
                                "summary.json"});
    if (!rep.traces.empty()) outputs.push_back("traces.csv");
    manifest["outputs"] = outputs;
    manifest["config"] = config_to_json(cfg);

    detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    detail::write_file(dir / "metrics.csv", metrics_csv(rep));
    detail::write_file(dir / "events.csv", events_csv(rep));
    detail::write_file(dir / "summary.json", summarize(cfg, rep).dump(2) + "\n");
    if (!rep.traces.empty()) detail::write_file(dir / "traces.csv", traces_csv(rep));
}

}  // namespace cfmm
