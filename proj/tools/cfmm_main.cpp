// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Subcommands:
//   run      full simulation, writes manifest/metrics/events/summary
//   validate parse and check a scenario document
//   trace    mobility-only trajectory dump
// Exit codes: 0 success, 2 configuration error, 3 anomaly budget exceeded.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cfmm/config.hpp"
#include "cfmm/harness.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::string policy;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
};

void apply_overrides(cfmm::ScenarioConfig& cfg, const CommonOpts& opt) {
    if (!opt.policy.empty()) cfg.policy = cfmm::policy_from_string(opt.policy);
    if (opt.seed_given) cfg.seed = opt.seed;
    if (opt.threads > 0) cfg.threads = opt.threads;
    if (cfg.policy == cfmm::Policy::Udn) {
        // The baseline is single-anchor by definition; the association
        // parameterisation enforces it during the run.
    }
}

int cmd_run(const CommonOpts& opt, bool with_traces) {
    cfmm::ScenarioConfig cfg = cfmm::load_config(opt.config_path);
    apply_overrides(cfg, opt);

    const cfmm::RunReport rep = cfmm::run_scenario(cfg, with_traces);
    cfmm::write_outputs(cfg, rep, opt.out_dir);

    const cfmm::json s = cfmm::summarize(cfg, rep);
    std::cout << "wrote " << opt.out_dir << "/{manifest.json, metrics.csv, "
              << "events.csv, summary.json" << (with_traces ? ", traces.csv" : "")
              << "}\n"
              << "policy " << cfmm::to_string(cfg.policy) << ", seed " << cfg.seed
              << ", " << cfg.n_drops << " drops x " << cfg.n_intervals
              << " intervals x " << cfg.n_ues << " UEs\n"
              << "95%-likely SE  mr " << s["se_mr"]["p05"].dump() << "  rzf "
              << s["se_rzf"]["p05"].dump() << " bit/s/Hz\n";

    if (!rep.invariant_violations.empty()) {
        std::cerr << "warning: " << rep.invariant_violations.size()
                  << " structural invariant violation(s); first: "
                  << rep.invariant_violations.front() << "\n";
    }
    if (rep.clamp_anomalies > 0 || rep.scan_exhausted > 0) {
        std::cerr << "note: " << rep.clamp_anomalies << " clamped denominator(s), "
                  << rep.scan_exhausted << " exhausted obstacle scan(s)\n";
    }
    if (cfg.anomaly_budget && rep.anomaly_total() > *cfg.anomaly_budget) {
        std::cerr << "error: anomaly total " << rep.anomaly_total()
                  << " exceeds the configured budget of " << *cfg.anomaly_budget
                  << "\n";
        return 3;
    }
    return 0;
}

int cmd_validate(const CommonOpts& opt) {
    cfmm::ScenarioConfig cfg = cfmm::load_config(opt.config_path);
    if (!opt.policy.empty()) cfg.policy = cfmm::policy_from_string(opt.policy);
    std::cout << "configuration OK: " << cfg.n_aps() << " APs, " << cfg.n_ues
              << " UEs, policy " << cfmm::to_string(cfg.policy) << "\n";
    return 0;
}

int cmd_trace(const CommonOpts& opt) {
    cfmm::ScenarioConfig cfg = cfmm::load_config(opt.config_path);
    apply_overrides(cfg, opt);
    const cfmm::RunReport rep = cfmm::trace_mobility(cfg);
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);
    cfmm::detail::write_file(fs::path(opt.out_dir) / "traces.csv",
                             cfmm::traces_csv(rep));
    std::cout << "wrote " << opt.out_dir << "/traces.csv (" << rep.traces.size()
              << " rows, " << rep.scan_exhausted << " exhausted scans)\n";
    return 0;
}

void add_common(CLI::App* sub, CommonOpts& opt, bool with_out) {
    sub->add_option("--config", opt.config_path, "scenario JSON document")
        ->required();
    sub->add_option("--policy", opt.policy,
                    "override run.policy (dynamic | ia_every_step | udn)");
    auto* seed = sub->add_option("--seed", opt.seed, "override run.seed");
    sub->callback([&opt, seed] { opt.seed_given = seed->count() > 0; });
    if (with_out) {
        sub->add_option("--out", opt.out_dir, "output directory (default: out)");
        sub->add_option("--threads", opt.threads, "override run.threads");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "cfmm: deterministic downlink simulator for user-centric distributed "
        "MIMO under mobility"};
    app.require_subcommand(1);

    CommonOpts run_opt, val_opt, trace_opt;
    bool with_traces = false;

    CLI::App* run = app.add_subcommand("run", "run a scenario and write reports");
    add_common(run, run_opt, true);
    run->add_flag("--trace", with_traces, "also write traces.csv");

    CLI::App* validate = app.add_subcommand("validate", "check a scenario document");
    add_common(validate, val_opt, false);

    CLI::App* trace =
        app.add_subcommand("trace", "mobility-only trajectory dump (traces.csv)");
    add_common(trace, trace_opt, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_opt, with_traces);
        if (validate->parsed()) return cmd_validate(val_opt);
        if (trace->parsed()) return cmd_trace(trace_opt);
    } catch (const cfmm::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
