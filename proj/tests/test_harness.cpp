// SPDX-License-Identifier: Apache-2.0
//
// End-to-end runner checks on a small scenario: report shape, event
// accounting, policy semantics, determinism of the emitted bytes, and the
// one-interval equivalence of the incremental policy with a rebuild.

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "cfmm/harness.hpp"

using namespace cfmm;

namespace {

ScenarioConfig small_scenario() {
    json doc = json::parse(R"({
      "map": { "width": 60, "height": 60, "inner_margin": 8,
               "buildings": [[22, 22, 38, 34]] },
      "aps": { "positions": [[8, 8], [52, 8], [8, 52], [52, 52], [30, 8]],
               "n_antennas": 2 },
      "ues": { "count": 4 },
      "radio": { "tau_p": 2, "noise_w": 1e-11 },
      "assoc": { "m_max": 2, "gain_threshold_db": -104.0 },
      "mobility": { "d_min_m": 10.0, "d_max_m": 25.0 },
      "run": { "policy": "dynamic", "n_drops": 2, "n_intervals": 6,
               "n_blocks": 12, "seed": 3 }
    })");
    ScenarioConfig c = parse_config(doc);
    resolve_and_validate(c);
    return c;
}

}  // namespace

TEST_CASE("report covers every drop, interval and UE exactly once", "[harness]") {
    const ScenarioConfig cfg = small_scenario();
    const RunReport rep = run_scenario(cfg);
    REQUIRE(rep.rows.size() == std::size_t(2 * 6 * 4));
    REQUIRE(rep.invariant_violations.empty());
    REQUIRE(rep.clamp_anomalies == 0);

    std::size_t i = 0;
    for (int d = 0; d < 2; ++d)
        for (int n = 0; n < 6; ++n)
            for (int k = 0; k < 4; ++k, ++i) {
                REQUIRE(rep.rows[i].drop == d);
                REQUIRE(rep.rows[i].interval == n);
                REQUIRE(rep.rows[i].ue == k);
            }

    for (const UeIntervalRow& r : rep.rows) {
        if (!r.connected) {
            REQUIRE(r.se_mr == 0.0);
            REQUIRE(r.se_rzf == 0.0);
            REQUIRE(r.cluster_size == 0);
        } else {
            REQUIRE(r.cluster_size >= 1);
            REQUIRE(r.cluster_size <= 2);
            REQUIRE(r.se_rzf >= 0.0);
        }
    }
}

TEST_CASE("single-anchor policy never grows a cluster", "[harness]") {
    ScenarioConfig cfg = small_scenario();
    cfg.policy = Policy::Udn;
    const RunReport rep = run_scenario(cfg);
    REQUIRE(rep.invariant_violations.empty());
    for (const UeIntervalRow& r : rep.rows)
        if (r.connected) REQUIRE(r.cluster_size == 1);
}

TEST_CASE("summary accounting is consistent with the rows", "[harness]") {
    const ScenarioConfig cfg = small_scenario();
    const RunReport rep = run_scenario(cfg);
    const json s = summarize(cfg, rep);

    long ho = 0, pc = 0, dn = 0, rc = 0;
    for (const UeIntervalRow& r : rep.rows) {
        ho += r.master_handover;
        pc += r.pilot_change;
        dn += r.denial;
        rc += r.reconnect;
    }
    REQUIRE(s["events"]["master_handovers"].get<long>() == ho);
    REQUIRE(s["events"]["pilot_changes"].get<long>() == pc);
    REQUIRE(s["events"]["denials"].get<long>() == dn);
    REQUIRE(s["events"]["reconnects"].get<long>() == rc);

    const double ue_seconds = 2.0 * 4.0 * 6.0 * cfg.mobility.t_ho;
    REQUIRE(s["events"]["pilot_change_rate_per_ue_s"].get<double>() ==
            Catch::Approx(double(pc) / ue_seconds).epsilon(1e-12));

    // Percentile table must be monotone.
    for (const char* block : {"se_mr", "se_rzf"}) {
        const json& b = s[block];
        REQUIRE(b["p05"].get<double>() <= b["p25"].get<double>());
        REQUIRE(b["p25"].get<double>() <= b["p50"].get<double>());
        REQUIRE(b["p50"].get<double>() <= b["p75"].get<double>());
        REQUIRE(b["p75"].get<double>() <= b["p95"].get<double>());
    }
    REQUIRE(s["per_drop"]["p05_rzf"].size() == 2);
}

TEST_CASE("identical seeds give identical bytes, thread count included",
          "[harness]") {
    const ScenarioConfig cfg = small_scenario();
    const RunReport a = run_scenario(cfg);
    const RunReport b = run_scenario(cfg);
    REQUIRE(metrics_csv(a) == metrics_csv(b));
    REQUIRE(summarize(cfg, a).dump() == summarize(cfg, b).dump());

    ScenarioConfig threaded = cfg;
    threaded.threads = 4;
    const RunReport c = run_scenario(threaded);
    REQUIRE(metrics_csv(a) == metrics_csv(c));

    ScenarioConfig other = cfg;
    other.seed = 4;
    const RunReport d = run_scenario(other);
    REQUIRE(metrics_csv(a) != metrics_csv(d));
}

TEST_CASE("one static interval: incremental policy equals a full rebuild",
          "[harness]") {
    ScenarioConfig cfg = small_scenario();
    cfg.n_drops = 1;
    cfg.n_intervals = 1;
    const RunReport a = run_scenario(cfg);
    cfg.policy = Policy::IaEveryStep;
    const RunReport b = run_scenario(cfg);
    REQUIRE(metrics_csv(a) == metrics_csv(b));
}

TEST_CASE("mobility-only trace has one row per drop, interval and UE",
          "[harness]") {
    const ScenarioConfig cfg = small_scenario();
    const RunReport rep = trace_mobility(cfg);
    REQUIRE(rep.traces.size() == std::size_t(2 * 6 * 4));
    const SiteMap map(cfg.map_width, cfg.map_height, cfg.buildings, cfg.inner_margin);
    for (const TraceRow& t : rep.traces) {
        const Pixel p{int(t.x + 0.5), int(t.y + 0.5)};
        REQUIRE(map.is_free_for_ue(p));
    }
    // The full run walks the exact same trajectories.
    const RunReport full = run_scenario(cfg, true);
    REQUIRE(traces_csv(full) == traces_csv(rep));
}

TEST_CASE("output files land on disk and parse back", "[harness]") {
    namespace fs = std::filesystem;
    const ScenarioConfig cfg = small_scenario();
    const RunReport rep = run_scenario(cfg, true);

    const fs::path dir = fs::temp_directory_path() / "cfmm_harness_test";
    fs::remove_all(dir);
    write_outputs(cfg, rep, dir.string());

    for (const char* name :
         {"manifest.json", "metrics.csv", "events.csv", "summary.json", "traces.csv"})
        REQUIRE(fs::exists(dir / name));

    std::ifstream mf(dir / "manifest.json");
    const json manifest = json::parse(mf);
    REQUIRE(manifest["tool"] == "cfmm");
    REQUIRE(manifest["config"]["ues"]["count"].get<int>() == 4);

    std::ifstream mc(dir / "metrics.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(mc, line)) ++lines;
    REQUIRE(lines == rep.rows.size() + 1);  // header included
    fs::remove_all(dir);
}
