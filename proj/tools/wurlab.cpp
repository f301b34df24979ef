// wurlab: analytic evaluation, sweeps, round-mode simulation and validation of the
// UAV wake-up clustering MAC schemes. Data goes to stdout or --out; logs to stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wurlab/analytic.hpp"
#include "wurlab/config.hpp"
#include "wurlab/metrics.hpp"
#include "wurlab/numfmt.hpp"
#include "wurlab/simulate.hpp"
#include "wurlab/sweep.hpp"

namespace {

using namespace wurlab;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string scheme;  // empty selects the subcommand default
    std::string n;
    std::string out;
    std::optional<double> horizon;
    std::optional<int> rounds;
    int jobs = 1;
};

ProtocolConfig base_config(const CommonOptions& o) {
    ProtocolConfig c = o.config_path.empty() ? default_paper_config() : load_config_file(o.config_path);
    c = apply_env_overrides(c);
    if (o.seed) c.seed = *o.seed;
    if (o.horizon) c.sim.horizon = *o.horizon;
    if (o.rounds) c.sim.rounds = *o.rounds;
    validate(c);
    return c;
}

void emit(const CommonOptions& o, const std::string& text) {
    if (o.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file '" + o.out + "'");
    f << text;
    if (!f.flush()) throw std::runtime_error("write to '" + o.out + "' failed");
}

MacScheme single_scheme(const std::string& text) {
    const auto schemes = parse_schemes(text);
    if (schemes.size() != 1) throw UsageError("this subcommand takes a single --scheme");
    return schemes.front();
}

std::string optional_number(const std::optional<double>& v) { return v ? format_double(*v) : "n/a"; }

int cmd_analytic(const CommonOptions& o) {
    const ProtocolConfig base = base_config(o);
    const auto scheme = single_scheme(o.scheme);
    const auto ns = o.n.empty() ? std::vector<int>{base.traffic.n_nodes} : parse_n_values(o.n);
    std::string text;
    for (int n : ns) {
        ProtocolConfig c = base;
        c.mac.scheme = scheme;
        c.traffic.n_nodes = n;
        validate(c);
        const auto m = evaluate_scheme(c);
        text += "scheme " + std::string(scheme_slug(scheme)) + "\n";
        text += "n " + std::to_string(n) + "\n";
        if (m.gamma)
            text += "gamma " + format_double(*m.gamma) + "\n";
        else
            text += "alpha " + optional_number(m.alpha) + "\n";
        text += "p_loss " + format_double(m.p_loss) + "\n";
        text += "d_a " + format_double(m.d_a) + " s\n";
        text += "e_r " + format_double(m.e_r) + " J\n";
        if (m.solution.multiple_roots) std::cerr << "warning: several roots found, smallest reported\n";
        if (ns.size() > 1) text += "\n";
    }
    emit(o, text);
    return kExitOk;
}

SweepSpec sweep_spec(const CommonOptions& o, const std::string& schemes, const std::string& engines) {
    SweepSpec spec;
    spec.schemes = parse_schemes(schemes);
    if (!o.n.empty()) spec.n_values = parse_n_values(o.n);
    spec.engines = parse_engines(engines);
    spec.seed = o.seed.value_or(1);
    spec.horizon = o.horizon;
    spec.rounds = o.rounds;
    spec.jobs = o.jobs;
    return spec;
}

void progress(const std::string& line) { std::cerr << line << '\n'; }

int cmd_sweep(const CommonOptions& o, const std::string& engines) {
    const auto spec = sweep_spec(o, o.scheme, engines);
    const auto rows = run_sweep(base_config(o), spec, progress);
    emit(o, sweep_csv(rows));
    return kExitOk;
}

int cmd_simulate(const CommonOptions& o, const std::string& event_log_path) {
    ProtocolConfig c = base_config(o);
    c.mac.scheme = single_scheme(o.scheme);
    if (!o.n.empty()) {
        const auto ns = parse_n_values(o.n);
        if (ns.size() != 1) throw UsageError("simulate takes a single --n value");
        c.traffic.n_nodes = ns.front();
    }
    validate(c);

    std::ofstream log_file;
    RoundOptions options;
    if (!event_log_path.empty()) {
        log_file.open(event_log_path, std::ios::binary);
        if (!log_file) throw std::runtime_error("cannot open event log '" + event_log_path + "'");
        options.event_log = &log_file;
    }
    const auto run = run_round_mode(c, options);
    const auto s = estimate_round_stats(run.rounds, c.mac.scheme, c.traffic.n_nodes, c.sim.batches);

    auto est = [](const Estimate& e, const char* unit) {
        return format_double(e.value) + " +- " + format_double(e.ci) + unit;
    };
    std::string text;
    text += "scheme " + std::string(scheme_slug(c.mac.scheme)) + "\n";
    text += "n " + std::to_string(c.traffic.n_nodes) + "\n";
    text += "rounds " + std::to_string(s.rounds) + "\n";
    text += "success_rate " + (s.success_rate ? est(*s.success_rate, "") : std::string("n/a")) + "\n";
    text += "collision_rate " + (s.collision_rate ? est(*s.collision_rate, "") : std::string("n/a")) + "\n";
    text += "alpha " + (s.alpha ? est(*s.alpha, "") : std::string("n/a")) + "\n";
    text += "mean_delay " + est(s.mean_delay, " s") + "\n";
    text += "mean_energy " + est(s.mean_energy, " J") + "\n";
    text += "cluster_size " + est(s.cluster_size, "") + "\n";
    emit(o, text);
    return kExitOk;
}

int cmd_validate(const CommonOptions& o, double inject_cca_scale) {
    SweepSpec spec = sweep_spec(o, o.scheme, "analytic");
    if (o.n.empty()) spec.n_values = {5, 25, 50, 100};
    std::function<void(ProtocolConfig&)> override_fn;
    if (inject_cca_scale != 1.0) {
        override_fn = [inject_cca_scale](ProtocolConfig& c) { c.link.cca_duration *= inject_cca_scale; };
    }
    const auto reports = run_validation(base_config(o), spec, Tolerances{}, override_fn, progress);
    emit(o, reports_json(reports) + "\n");
    bool all_pass = true;
    for (const auto& r : reports) {
        for (const auto& w : r.warnings)
            std::cerr << "warning: " << scheme_slug(r.scheme) << " N=" << r.n_nodes << ": " << w << '\n';
        for (const auto& c : r.checks) {
            if (!c.pass)
                std::cerr << scheme_slug(r.scheme) << " N=" << r.n_nodes << ": " << c.metric
                          << " delta " << format_double(c.delta) << " outside tolerance "
                          << format_double(c.tolerance) << (c.relative ? " (relative)" : "") << '\n';
        }
        all_pass = all_pass && r.pass;
    }
    return all_pass ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Analytic model and simulator for UAV wake-up clustering MAC schemes"};
    app.require_subcommand(1);
    CommonOptions o;
    std::string engines = "analytic";
    std::string event_log;
    double inject_cca_scale = 1.0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--out", o.out, "output file (default stdout)");
    };
    auto add_point = [&](CLI::App* sub, const std::string& scheme_help) {
        sub->add_option("--scheme", o.scheme, scheme_help);
        sub->add_option("--n", o.n, "node counts: 50, 2,10,50 or 5..100[:step]");
    };
    auto add_sim = [&](CLI::App* sub) {
        sub->add_option("--horizon", o.horizon, "queue-mode horizon, virtual seconds")->check(CLI::PositiveNumber);
        sub->add_option("--rounds", o.rounds, "round-mode rounds")->check(CLI::PositiveNumber);
    };

    auto* defaults = app.add_subcommand("defaults", "print the default configuration");
    defaults->add_option("--out", o.out, "output file (default stdout)");

    auto* analytic = app.add_subcommand("analytic", "evaluate the analytic model");
    add_common(analytic);
    add_point(analytic, "scm, cca, csma_ca or adp");

    auto* sweep = app.add_subcommand("sweep", "CSV over schemes, N and engines");
    add_common(sweep);
    add_point(sweep, "comma list of schemes or 'all'");
    add_sim(sweep);
    sweep->add_option("--engines", engines, "comma list of analytic, queue_sim, round_sim");
    sweep->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);

    auto* simulate = app.add_subcommand("simulate", "round-mode simulation");
    add_common(simulate);
    add_point(simulate, "scm, cca, csma_ca or adp");
    add_sim(simulate);
    simulate->add_option("--event-log", event_log, "write the tab-separated event log here");

    auto* validate_cmd = app.add_subcommand("validate", "analytic model against simulation, JSON report");
    add_common(validate_cmd);
    add_point(validate_cmd, "comma list of schemes or 'all'");
    add_sim(validate_cmd);
    validate_cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    validate_cmd->add_option("--inject-cca-scale", inject_cca_scale,
                             "multiply the CCA duration on the analytic side only (fault injection)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (o.scheme.empty()) o.scheme = sweep->parsed() || validate_cmd->parsed() ? "all" : "cca";

    try {
        if (defaults->parsed()) {
            emit(o, save_config(default_paper_config()));
            return kExitOk;
        }
        if (analytic->parsed()) return cmd_analytic(o);
        if (sweep->parsed()) return cmd_sweep(o, engines);
        if (simulate->parsed()) return cmd_simulate(o, event_log);
        if (validate_cmd->parsed()) return cmd_validate(o, inject_cca_scale);
    } catch (const SolverError& e) {
        const auto& s = e.solution();
        std::cerr << "error: " << e.what() << " (residual " << format_double(s.residual) << ", bracket ["
                  << format_double(s.bracket_low) << ", " << format_double(s.bracket_high) << "])\n";
        return kExitSolver;
    } catch (const ConfigParseError& e) {
        std::cerr << "config error, line " << e.line() << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error, " << e.field() << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
