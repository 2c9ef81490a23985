// SPDX-License-Identifier: Apache-2.0
//
// Scenario configuration: a single JSON document parsed into plain structs,
// with strict key checking (typos are errors, not silent defaults), unit
// conversions, and derived defaults resolved up front so the manifest can
// echo back the exact values a run used.

#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfmm/assoc.hpp"
#include "cfmm/channel.hpp"
#include "cfmm/mobility.hpp"
#include "cfmm/phy.hpp"
#include "cfmm/sitemap.hpp"

namespace cfmm {

using json = nlohmann::ordered_json;

// Raised for anything wrong with the scenario document; the CLI maps it to
// its configuration-error exit code.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class Policy { Dynamic, IaEveryStep, Udn };

inline std::string to_string(Policy p) {
    switch (p) {
        case Policy::Dynamic: return "dynamic";
        case Policy::IaEveryStep: return "ia_every_step";
        case Policy::Udn: return "udn";
    }
    throw std::logic_error("unreachable");
}

inline Policy policy_from_string(const std::string& s) {
    if (s == "dynamic") return Policy::Dynamic;
    if (s == "ia_every_step") return Policy::IaEveryStep;
    if (s == "udn") return Policy::Udn;
    throw ConfigError("unknown policy '" + s + "' (expected dynamic, ia_every_step or udn)");
}

struct ScenarioConfig {
    // map
    double map_width = 0.0;
    double map_height = 0.0;
    double inner_margin = 0.0;
    std::vector<Rect> buildings;

    // access points
    std::vector<Vec2> ap_positions;
    double ap_height = 6.0;
    int n_antennas = 8;
    std::vector<double> boresights;  // resolved: one per AP

    // user terminals
    int n_ues = 0;
    double ue_height = 1.5;

    // propagation
    double f_c = 28e9;
    double bandwidth = 500e6;
    double rho_refl_db = -6.0;
    int max_reflections = 1;

    // radio resources
    double p_max = 1.0;
    double p_ul = 0.1;
    double sigma2 = 1e-11;
    int tau_c = 200;
    int tau_p = 10;
    double power_exponent = 0.5;

    // association
    int m_max = 5;
    double m_ho_db = 3.0;
    double gain_threshold = 0.0;  // resolved: sigma2 / p_ul when absent
    PilotMetric pilot_metric = PilotMetric::Basic;
    UeOrder ue_order = UeOrder::Ascending;

    // mobility
    MobilityParams mobility;

    // run control
    Policy policy = Policy::Dynamic;
    int n_drops = 1;
    int n_intervals = 1;
    int n_blocks = 100;
    uint64_t seed = 1;
    int threads = 1;
    std::optional<long> anomaly_budget;  // absent = never fatal

    int n_aps() const { return int(ap_positions.size()); }
};

namespace detail {

inline void expect_keys(const json& obj, const std::string& where,
                        const std::vector<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (const auto& a : allowed) known = known || key == a;
        if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T require(const json& obj, const std::string& where, const std::string& key) {
    if (!obj.contains(key))
        throw ConfigError("missing required key '" + key + "' in " + where);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("key '" + key + "' in " + where + " has the wrong type");
    }
}

template <typename T>
T optional_or(const json& obj, const std::string& where, const std::string& key,
              T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("key '" + key + "' in " + where + " has the wrong type");
    }
}

inline void check_positive(double v, const std::string& name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(name + " must be a positive finite number");
}

}  // namespace detail

inline ScenarioConfig parse_config(const json& doc) {
    using detail::expect_keys;
    using detail::optional_or;
    using detail::require;

    expect_keys(doc, "the document root",
                {"map", "aps", "ues", "channel", "radio", "assoc", "mobility", "run"});
    ScenarioConfig c;

    // --- map ---------------------------------------------------------
    const json map = require<json>(doc, "the document root", "map");
    expect_keys(map, "map", {"width", "height", "inner_margin", "buildings"});
    c.map_width = require<double>(map, "map", "width");
    c.map_height = require<double>(map, "map", "height");
    c.inner_margin = optional_or<double>(map, "map", "inner_margin", 0.0);
    for (const auto& b : optional_or<json>(map, "map", "buildings", json::array())) {
        if (!b.is_array() || b.size() != 4)
            throw ConfigError("each building must be [x0, y0, x1, y1]");
        c.buildings.push_back(Rect{b[0].get<double>(), b[1].get<double>(),
                                   b[2].get<double>(), b[3].get<double>()});
    }

    // --- access points -------------------------------------------------
    const json aps = require<json>(doc, "the document root", "aps");
    expect_keys(aps, "aps", {"positions", "height", "n_antennas", "boresights"});
    const json pos = require<json>(aps, "aps", "positions");
    if (!pos.is_array() || pos.empty())
        throw ConfigError("aps.positions must be a non-empty array of [x, y]");
    for (const auto& p : pos) {
        if (!p.is_array() || p.size() != 2)
            throw ConfigError("each AP position must be [x, y]");
        c.ap_positions.push_back(Vec2{p[0].get<double>(), p[1].get<double>()});
    }
    c.ap_height = optional_or<double>(aps, "aps", "height", 6.0);
    c.n_antennas = optional_or<int>(aps, "aps", "n_antennas", 8);
    if (aps.contains("boresights")) {
        const json bs = aps.at("boresights");
        if (!bs.is_array() || bs.size() != c.ap_positions.size())
            throw ConfigError("aps.boresights must list one angle per AP");
        for (const auto& b : bs) c.boresights.push_back(b.get<double>());
    }

    // --- user terminals -------------------------------------------------
    const json ues = require<json>(doc, "the document root", "ues");
    expect_keys(ues, "ues", {"count", "height"});
    c.n_ues = require<int>(ues, "ues", "count");
    c.ue_height = optional_or<double>(ues, "ues", "height", 1.5);

    // --- propagation ----------------------------------------------------
    const json chan = optional_or<json>(doc, "the document root", "channel", json::object());
    expect_keys(chan, "channel",
                {"f_c_hz", "bandwidth_hz", "rho_refl_db", "max_reflections"});
    c.f_c = optional_or<double>(chan, "channel", "f_c_hz", 28e9);
    c.bandwidth = optional_or<double>(chan, "channel", "bandwidth_hz", 500e6);
    c.rho_refl_db = optional_or<double>(chan, "channel", "rho_refl_db", -6.0);
    c.max_reflections = optional_or<int>(chan, "channel", "max_reflections", 1);

    // --- radio resources --------------------------------------------------
    const json radio = require<json>(doc, "the document root", "radio");
    expect_keys(radio, "radio",
                {"p_max_w", "p_ul_w", "noise_w", "tau_c", "tau_p", "power_exponent"});
    c.p_max = optional_or<double>(radio, "radio", "p_max_w", 1.0);
    c.p_ul = optional_or<double>(radio, "radio", "p_ul_w", 0.1);
    c.sigma2 = optional_or<double>(radio, "radio", "noise_w", 1e-11);
    c.tau_c = optional_or<int>(radio, "radio", "tau_c", 200);
    c.tau_p = require<int>(radio, "radio", "tau_p");
    c.power_exponent = optional_or<double>(radio, "radio", "power_exponent", 0.5);

    // --- association ----------------------------------------------------
    const json assoc = require<json>(doc, "the document root", "assoc");
    expect_keys(assoc, "assoc",
                {"m_max", "m_ho_db", "gain_threshold_db", "pilot_metric", "ue_order"});
    c.m_max = require<int>(assoc, "assoc", "m_max");
    c.m_ho_db = optional_or<double>(assoc, "assoc", "m_ho_db", 3.0);
    if (assoc.contains("gain_threshold_db")) {
        c.gain_threshold =
            std::pow(10.0, require<double>(assoc, "assoc", "gain_threshold_db") / 10.0);
    }
    const std::string metric =
        optional_or<std::string>(assoc, "assoc", "pilot_metric", "basic");
    if (metric == "basic") c.pilot_metric = PilotMetric::Basic;
    else if (metric == "ssb") c.pilot_metric = PilotMetric::Ssb;
    else throw ConfigError("assoc.pilot_metric must be 'basic' or 'ssb'");
    const std::string order =
        optional_or<std::string>(assoc, "assoc", "ue_order", "ascending");
    if (order == "ascending") c.ue_order = UeOrder::Ascending;
    else if (order == "seeded_random") c.ue_order = UeOrder::SeededRandom;
    else throw ConfigError("assoc.ue_order must be 'ascending' or 'seeded_random'");

    // --- mobility ---------------------------------------------------------
    const json mob = optional_or<json>(doc, "the document root", "mobility", json::object());
    expect_keys(mob, "mobility", {"h_steps", "d_min_m", "d_max_m", "v_ue_mps", "t_ho_s"});
    c.mobility.h_steps = optional_or<int>(mob, "mobility", "h_steps", 3);
    c.mobility.d_min = optional_or<double>(mob, "mobility", "d_min_m", 50.0);
    c.mobility.d_max = optional_or<double>(mob, "mobility", "d_max_m", 100.0);
    c.mobility.v_ue = optional_or<double>(mob, "mobility", "v_ue_mps", 1.5);
    c.mobility.t_ho = optional_or<double>(mob, "mobility", "t_ho_s", 2.0);

    // --- run control -------------------------------------------------------
    const json run = require<json>(doc, "the document root", "run");
    expect_keys(run, "run",
                {"policy", "n_drops", "n_intervals", "n_blocks", "seed", "threads",
                 "anomaly_budget"});
    c.policy = policy_from_string(require<std::string>(run, "run", "policy"));
    c.n_drops = optional_or<int>(run, "run", "n_drops", 1);
    c.n_intervals = optional_or<int>(run, "run", "n_intervals", 1);
    c.n_blocks = optional_or<int>(run, "run", "n_blocks", 100);
    c.seed = optional_or<uint64_t>(run, "run", "seed", 1);
    c.threads = optional_or<int>(run, "run", "threads", 1);
    if (run.contains("anomaly_budget"))
        c.anomaly_budget = require<long>(run, "run", "anomaly_budget");

    return c;
}

// Fill derived defaults and check everything the modules will assume.
// Throws ConfigError with a hint at the offending field.
inline void resolve_and_validate(ScenarioConfig& c) {
    using detail::check_positive;

    check_positive(c.map_width, "map.width");
    check_positive(c.map_height, "map.height");
    if (c.inner_margin < 0.0) throw ConfigError("map.inner_margin must be non-negative");

    // The map constructor re-validates rectangles; surface its complaints
    // as configuration errors.
    SiteMap map = [&] {
        try {
            return SiteMap(c.map_width, c.map_height, c.buildings, c.inner_margin);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("map: ") + e.what());
        }
    }();

    if (c.n_ues < 1) throw ConfigError("ues.count must be at least 1");
    check_positive(c.ue_height, "ues.height");
    check_positive(c.ap_height, "aps.height");
    if (c.n_antennas < 1) throw ConfigError("aps.n_antennas must be at least 1");
    for (std::size_t l = 0; l < c.ap_positions.size(); ++l) {
        const Vec2 p = c.ap_positions[l];
        if (!map.point_admissible(p))
            throw ConfigError("aps.positions[" + std::to_string(l) +
                              "] lies outside the map or inside a building");
    }
    if (c.boresights.empty()) {
        // Default: arrays face the map centre.
        const Vec2 centre{c.map_width / 2.0, c.map_height / 2.0};
        for (const Vec2& p : c.ap_positions) c.boresights.push_back(bearing(p, centre));
    }

    check_positive(c.f_c, "channel.f_c_hz");
    check_positive(c.bandwidth, "channel.bandwidth_hz");
    if (c.max_reflections < 0 || c.max_reflections > 2)
        throw ConfigError("channel.max_reflections must be 0, 1 or 2");

    check_positive(c.p_max, "radio.p_max_w");
    check_positive(c.p_ul, "radio.p_ul_w");
    check_positive(c.sigma2, "radio.noise_w");
    if (c.tau_p < 1) throw ConfigError("radio.tau_p must be at least 1");
    if (c.tau_c <= c.tau_p) throw ConfigError("radio.tau_c must exceed radio.tau_p");
    if (c.power_exponent < 0.0)
        throw ConfigError("radio.power_exponent must be non-negative");

    if (c.m_max < 1) throw ConfigError("assoc.m_max must be at least 1");
    if (c.m_ho_db < 0.0) throw ConfigError("assoc.m_ho_db must be non-negative");
    if (c.gain_threshold == 0.0) {
        // Default noticeability: uplink SNR of exactly one.
        c.gain_threshold = c.sigma2 / c.p_ul;
    }
    check_positive(c.gain_threshold, "assoc.gain_threshold_db");

    if (c.mobility.h_steps < 1) throw ConfigError("mobility.h_steps must be at least 1");
    check_positive(c.mobility.d_min, "mobility.d_min_m");
    if (c.mobility.d_max < c.mobility.d_min)
        throw ConfigError("mobility.d_max_m must be at least d_min_m");
    check_positive(c.mobility.v_ue, "mobility.v_ue_mps");
    check_positive(c.mobility.t_ho, "mobility.t_ho_s");

    if (c.n_drops < 1) throw ConfigError("run.n_drops must be at least 1");
    if (c.n_intervals < 1) throw ConfigError("run.n_intervals must be at least 1");
    if (c.n_blocks < 1) throw ConfigError("run.n_blocks must be at least 1");
    if (c.threads < 1) throw ConfigError("run.threads must be at least 1");
    if (c.anomaly_budget && *c.anomaly_budget < 0)
        throw ConfigError("run.anomaly_budget must be non-negative");
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    ScenarioConfig c = parse_config(doc);
    resolve_and_validate(c);
    return c;
}

// The exact values a run used, for the manifest.
inline json config_to_json(const ScenarioConfig& c) {
    json doc;
    doc["map"] = {{"width", c.map_width},
                  {"height", c.map_height},
                  {"inner_margin", c.inner_margin}};
    json blds = json::array();
    for (const Rect& r : c.buildings) blds.push_back({r.x0, r.y0, r.x1, r.y1});
    doc["map"]["buildings"] = blds;

    json pos = json::array();
    for (const Vec2& p : c.ap_positions) pos.push_back({p.x, p.y});
    doc["aps"] = {{"positions", pos},
                  {"height", c.ap_height},
                  {"n_antennas", c.n_antennas},
                  {"boresights", c.boresights}};
    doc["ues"] = {{"count", c.n_ues}, {"height", c.ue_height}};
    doc["channel"] = {{"f_c_hz", c.f_c},
                      {"bandwidth_hz", c.bandwidth},
                      {"rho_refl_db", c.rho_refl_db},
                      {"max_reflections", c.max_reflections}};
    doc["radio"] = {{"p_max_w", c.p_max},
                    {"p_ul_w", c.p_ul},
                    {"noise_w", c.sigma2},
                    {"tau_c", c.tau_c},
                    {"tau_p", c.tau_p},
                    {"power_exponent", c.power_exponent}};
    doc["assoc"] = {{"m_max", c.m_max},
                    {"m_ho_db", c.m_ho_db},
                    {"gain_threshold_db", 10.0 * std::log10(c.gain_threshold)},
                    {"pilot_metric", c.pilot_metric == PilotMetric::Ssb ? "ssb" : "basic"},
                    {"ue_order",
                     c.ue_order == UeOrder::SeededRandom ? "seeded_random" : "ascending"}};
    doc["mobility"] = {{"h_steps", c.mobility.h_steps},
                       {"d_min_m", c.mobility.d_min},
                       {"d_max_m", c.mobility.d_max},
                       {"v_ue_mps", c.mobility.v_ue},
                       {"t_ho_s", c.mobility.t_ho}};
    doc["run"] = {{"policy", to_string(c.policy)},
                  {"n_drops", c.n_drops},
                  {"n_intervals", c.n_intervals},
                  {"n_blocks", c.n_blocks},
                  {"seed", c.seed},
                  {"threads", c.threads}};
    if (c.anomaly_budget) doc["run"]["anomaly_budget"] = *c.anomaly_budget;
    return doc;
}

}  // namespace cfmm
