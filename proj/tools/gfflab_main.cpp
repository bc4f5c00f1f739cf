// Command-line front end: config-driven Monte Carlo estimates, power-law
// fits from saved records, the harmonic/martingale diagnostics, the loop-soup
// isomorphism check, the Brownian-bridge oracle, the outer-margin bias
// harness, and the acceptance suite.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gfflab/acceptance.hpp"
#include "gfflab/config.hpp"
#include "gfflab/errors.hpp"
#include "gfflab/experiments.hpp"
#include "gfflab/fit.hpp"
#include "gfflab/records.hpp"

namespace {

// Options shared by the config-driven subcommands. A config file is applied
// first, then any flag the user passed overrides the file key.
struct CommonOpts {
    std::string config_path;
    std::map<std::string, std::string> overrides;

    void add_estimate_flags(CLI::App* cmd, bool with_quantity) {
        cmd->add_option("--config", config_path, "key = value config file");
        auto bind = [this, cmd](const std::string& flag, const std::string& key,
                                const std::string& help) {
            auto* opt = cmd->add_option("--" + flag, help);
            opt->each([this, key](const std::string& v) { overrides[key] = v; });
        };
        if (with_quantity)
            bind("quantity", "quantity",
                 "one-arm | crossing | two-point | q-variance | martingale | isomorphism | "
                 "oracle-bridge");
        bind("d", "d", "lattice dimension (>= 3)");
        bind("ladder", "ladder", "comma-separated N (or |x|) ladder");
        bind("pairs", "pairs", "crossing pairs as n:N,n:N,...");
        bind("trials", "trials", "Monte Carlo trials");
        bind("margin", "margin", "outer box margin (box radius = margin * max N, smoothed)");
        bind("margins", "margins", "comma-separated margins (bias harness / bridge grid values)");
        bind("seed", "seed", "master seed");
        bind("workers", "workers", "worker threads (0 = honor GFFLAB_THREADS)");
        bind("output", "output", "output path prefix (.csv/.json are appended)");
        bind("frac", "frac", "blocking cut fraction in (0,1]");
        bind("steps", "steps", "bridge oracle steps per rep");
        bind("reps", "reps", "bridge oracle reps");
    }

    gfflab::ExperimentConfig build() const {
        gfflab::ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg.apply(gfflab::parse_config_text(gfflab::read_text_file(config_path)));
        }
        cfg.apply(overrides);
        return cfg;
    }
};

int cmd_estimate(const CommonOpts& opts) {
    return gfflab::run_experiment(opts.build());
}

int cmd_fixed_quantity(const CommonOpts& opts, gfflab::Quantity q) {
    gfflab::ExperimentConfig cfg = opts.build();
    cfg.quantity = q;
    return gfflab::run_experiment(cfg);
}

int cmd_fit(const std::string& input, std::uint64_t bootstrap, std::uint64_t seed) {
    const std::vector<gfflab::EstimateRecord> records =
        gfflab::records_from_csv(gfflab::read_text_file(input));
    const std::vector<gfflab::FitPoint> points = gfflab::fit_points_from_records(records);
    // CSV inputs carry no per-trial bitmaps, so the bootstrap falls back to
    // lognormal point perturbations; rerun from seeds for the block version.
    gfflab::FitReport rep = gfflab::fit_exponent(points, bootstrap, seed, nullptr);
    rep.provenance = "records from " + input;
    std::printf("%s\n", gfflab::fit_report_json(rep).c_str());
    return 0;
}

int cmd_bias_harness(const CommonOpts& opts) {
    const gfflab::ExperimentConfig cfg = opts.build();
    if (cfg.ladder.size() != 1)
        throw gfflab::ValidationError("bias-harness takes a single ladder entry (N)");
    const gfflab::BiasHarnessResult res =
        gfflab::run_bias_harness(cfg.d, cfg.ladder[0], cfg.margins, cfg.trials, cfg.seed,
                                 cfg.resolved_workers());
    const std::string json = gfflab::bias_harness_json(res);
    if (!cfg.output.empty()) {
        gfflab::write_text_file(cfg.output + ".csv", gfflab::records_to_csv(res.records));
        gfflab::write_text_file(cfg.output + ".json", json);
    }
    std::fputs(res.notes.c_str(), stdout);
    if (cfg.output.empty()) std::printf("%s\n", json.c_str());
    return 0;
}

int cmd_acceptance(const std::string& suite, std::uint64_t seed, int workers,
                   const std::string& output) {
    const std::vector<int> ids = gfflab::acceptance_selection(suite);
    const gfflab::AcceptanceReport report = gfflab::run_acceptance(ids, seed, workers);
    if (!output.empty()) {
        gfflab::write_text_file(output + ".json", gfflab::acceptance_report_json(report));
    }
    std::printf("acceptance: %s (%zu criteria, %.0fs)\n", report.all_ok ? "OK" : "FAILED",
                report.results.size(), report.wall_s);
    return report.all_ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo laboratory for critical level-set percolation of the "
                 "Gaussian free field on the metric graph"};
    app.require_subcommand(1);

    int exit_code = 0;

    CommonOpts est_opts;
    auto* est = app.add_subcommand("estimate", "run a config-driven Monte Carlo estimate");
    est_opts.add_estimate_flags(est, true);
    est->callback([&]() { exit_code = cmd_estimate(est_opts); });

    std::string fit_input;
    std::uint64_t fit_bootstrap = 1000;
    std::uint64_t fit_seed = 1;
    auto* fit = app.add_subcommand("fit", "fit a power law to saved estimate records");
    fit->add_option("--input", fit_input, "records CSV file")->required();
    fit->add_option("--bootstrap", fit_bootstrap, "bootstrap rounds (default 1000)");
    fit->add_option("--seed", fit_seed, "bootstrap seed");
    fit->callback([&]() { exit_code = cmd_fit(fit_input, fit_bootstrap, fit_seed); });

    CommonOpts mart_opts;
    auto* mart = app.add_subcommand("diagnose-martingale",
                                    "exploration-martingale diagnostics (ladder = ball radius)");
    mart_opts.add_estimate_flags(mart, false);
    mart->callback(
        [&]() { exit_code = cmd_fixed_quantity(mart_opts, gfflab::Quantity::Martingale); });

    CommonOpts iso_opts;
    auto* iso = app.add_subcommand("check-isomorphism",
                                   "loop-soup occupation vs half squared field "
                                   "(ladder = box radius, trials = samples per route)");
    iso_opts.add_estimate_flags(iso, false);
    iso->callback(
        [&]() { exit_code = cmd_fixed_quantity(iso_opts, gfflab::Quantity::Isomorphism); });

    CommonOpts bridge_opts;
    auto* bridge = app.add_subcommand("oracle-bridge",
                                      "Brownian-bridge opening oracle on an endpoint grid "
                                      "(margins = endpoint values, default 0.25,0.5,1,2)");
    bridge_opts.add_estimate_flags(bridge, false);
    bridge->callback(
        [&]() { exit_code = cmd_fixed_quantity(bridge_opts, gfflab::Quantity::OracleBridge); });

    CommonOpts bias_opts;
    auto* bias = app.add_subcommand("bias-harness",
                                    "one-arm estimates across outer margins (ladder = N)");
    bias_opts.add_estimate_flags(bias, false);
    bias->callback([&]() { exit_code = cmd_bias_harness(bias_opts); });

    std::string suite = "full";
    std::uint64_t acc_seed = 1;
    int acc_workers = 0;
    std::string acc_output;
    auto* acc = app.add_subcommand("acceptance", "run the acceptance suite");
    acc->add_option("--suite", suite, "fast | full | comma-separated criterion ids");
    acc->add_option("--seed", acc_seed, "master seed");
    acc->add_option("--workers", acc_workers, "worker threads (0 = honor GFFLAB_THREADS)");
    acc->add_option("--output", acc_output, "report path prefix (.json is appended)");
    acc->callback([&]() {
        gfflab::ExperimentConfig wc;
        wc.workers = acc_workers;
        exit_code = cmd_acceptance(suite, acc_seed, wc.resolved_workers(), acc_output);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return exit_code;
}
