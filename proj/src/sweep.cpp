#include "wurlab/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "wurlab/analytic.hpp"
#include "wurlab/numfmt.hpp"
#include "wurlab/simulate.hpp"

namespace wurlab {

std::string_view engine_name(Engine engine) {
    switch (engine) {
        case Engine::analytic: return "analytic";
        case Engine::queue_sim: return "queue_sim";
        case Engine::round_sim: return "round_sim";
    }
    return "?";
}

Engine parse_engine(std::string_view text) {
    for (Engine e : {Engine::analytic, Engine::queue_sim, Engine::round_sim})
        if (engine_name(e) == text) return e;
    throw std::invalid_argument("unknown engine '" + std::string(text) + "'");
}

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        const auto next = text.find(sep, pos);
        auto part = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
        while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
        if (!part.empty()) parts.push_back(part);
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return parts;
}

int parse_count(std::string_view text) {
    long long v = 0;
    if (!parse_int64(text, v) || v < 1 || v > 1'000'000)
        throw std::invalid_argument("invalid node count '" + std::string(text) + "'");
    return static_cast<int>(v);
}

}  // namespace

std::vector<int> parse_n_values(std::string_view text) {
    std::vector<int> out;
    if (const auto dots = text.find(".."); dots != std::string_view::npos) {
        auto rest = text.substr(dots + 2);
        int step = 1;
        if (const auto colon = rest.find(':'); colon != std::string_view::npos) {
            step = parse_count(rest.substr(colon + 1));
            rest = rest.substr(0, colon);
        }
        const int lo = parse_count(text.substr(0, dots));
        const int hi = parse_count(rest);
        if (hi < lo) throw std::invalid_argument("empty N range '" + std::string(text) + "'");
        for (int n = lo; n <= hi; n += step) out.push_back(n);
        return out;
    }
    for (auto part : split(text, ',')) out.push_back(parse_count(part));
    if (out.empty()) throw std::invalid_argument("no N values given");
    return out;
}

std::vector<MacScheme> parse_schemes(std::string_view text) {
    std::vector<MacScheme> out;
    if (text == "all") return {MacScheme::scm, MacScheme::cca, MacScheme::csma_ca, MacScheme::adp};
    for (auto part : split(text, ',')) {
        const auto scheme = parse_scheme(part);
        if (!scheme) throw std::invalid_argument("unknown scheme '" + std::string(part) + "'");
        out.push_back(*scheme);
    }
    if (out.empty()) throw std::invalid_argument("no schemes given");
    return out;
}

std::vector<Engine> parse_engines(std::string_view text) {
    std::vector<Engine> out;
    for (auto part : split(text, ',')) out.push_back(parse_engine(part));
    if (out.empty()) throw std::invalid_argument("no engines given");
    return out;
}

void validate_sweep(const SweepSpec& spec) {
    if (spec.schemes.empty()) throw std::invalid_argument("sweep needs at least one scheme");
    if (spec.engines.empty()) throw std::invalid_argument("sweep needs at least one engine");
    if (spec.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

ProtocolConfig point_config(const ProtocolConfig& base, const SweepSpec& spec, MacScheme scheme, int n) {
    ProtocolConfig c = base;
    c.mac.scheme = scheme;
    c.traffic.n_nodes = n;
    c.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(scheme), static_cast<std::uint64_t>(n));
    if (spec.horizon) c.sim.horizon = *spec.horizon;
    if (spec.rounds) c.sim.rounds = *spec.rounds;
    validate(c);
    return c;
}

namespace {

std::vector<int> effective_n(const SweepSpec& spec) {
    if (!spec.n_values.empty()) return spec.n_values;
    std::vector<int> all;
    for (int n = 5; n <= 100; ++n) all.push_back(n);
    return all;
}

/// Runs `work(i)` for i in [0, count) on `jobs` threads; the first exception wins.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& work) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const auto i = next.fetch_add(1);
            if (i >= count) return;
            try {
                work(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

struct Task {
    MacScheme scheme;
    int n;
    Engine engine;
};

SweepRow run_task(const ProtocolConfig& base, const SweepSpec& spec, const Task& task) {
    const ProtocolConfig c = point_config(base, spec, task.scheme, task.n);
    SweepRow row;
    row.scheme = task.scheme;
    row.n = task.n;
    row.engine = task.engine;
    switch (task.engine) {
        case Engine::analytic: {
            const auto m = evaluate_scheme(c);
            row.alpha = m.alpha;
            row.gamma = m.gamma;
            row.p_loss = m.p_loss;
            row.d_a = m.d_a;
            row.e_r = m.e_r;
            break;
        }
        case Engine::queue_sim: {
            const auto q = simulate_queue_stats(c);
            row.alpha = q.alpha.value;
            row.p_loss = q.p_loss.value;
            row.d_a = q.d_a.value;
            row.e_r = q.e_r.value;
            row.ci_alpha = q.alpha.ci;
            row.ci_p_loss = q.p_loss.ci;
            row.ci_d_a = q.d_a.ci;
            row.ci_e_r = q.e_r.ci;
            break;
        }
        case Engine::round_sim: {
            const auto run = run_round_mode(c);
            const auto s = estimate_round_stats(run.rounds, c.mac.scheme, c.traffic.n_nodes, c.sim.batches);
            if (task.scheme == MacScheme::scm) {
                if (s.collision_rate) row.gamma = s.collision_rate->value;
            } else if (s.alpha) {
                row.alpha = s.alpha->value;
                row.ci_alpha = s.alpha->ci;
            }
            if (s.success_rate) {
                row.p_loss = 1.0 - s.success_rate->value;
                row.ci_p_loss = s.success_rate->ci;
            }
            row.d_a = s.mean_delay.value;
            row.e_r = s.mean_energy.value;
            row.ci_d_a = s.mean_delay.ci;
            row.ci_e_r = s.mean_energy.ci;
            break;
        }
    }
    return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ProtocolConfig& base, const SweepSpec& spec,
                                const std::function<void(const std::string&)>& progress) {
    validate_sweep(spec);
    auto schemes = spec.schemes;
    auto engines = spec.engines;
    auto ns = effective_n(spec);
    std::sort(schemes.begin(), schemes.end());
    schemes.erase(std::unique(schemes.begin(), schemes.end()), schemes.end());
    std::sort(engines.begin(), engines.end());
    engines.erase(std::unique(engines.begin(), engines.end()), engines.end());
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

    std::vector<Task> tasks;
    for (auto s : schemes)
        for (int n : ns)
            for (auto e : engines)
                if (!(e == Engine::queue_sim && s == MacScheme::scm)) tasks.push_back({s, n, e});

    std::vector<SweepRow> rows(tasks.size());
    std::mutex progress_mutex;
    parallel_for(tasks.size(), spec.jobs, [&](std::size_t i) {
        rows[i] = run_task(base, spec, tasks[i]);
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(std::string(scheme_slug(tasks[i].scheme)) + " N=" + std::to_string(tasks[i].n) + " " +
                     std::string(engine_name(tasks[i].engine)));
        }
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::ostringstream out;
    out << kSweepCsvHeader << '\n';
    for (const auto& r : rows) {
        out << scheme_slug(r.scheme) << ',' << r.n << ',' << engine_name(r.engine) << ',' << opt(r.alpha) << ','
            << opt(r.gamma) << ',' << format_double(r.p_loss) << ',' << format_double(r.d_a) << ','
            << format_double(r.e_r) << ',' << opt(r.ci_alpha) << ',' << opt(r.ci_p_loss) << ',' << opt(r.ci_d_a)
            << ',' << opt(r.ci_e_r) << '\n';
    }
    return out.str();
}

std::vector<ComparisonReport> run_validation(const ProtocolConfig& base, const SweepSpec& spec,
                                             const Tolerances& tolerances,
                                             const std::function<void(ProtocolConfig&)>& analytic_override,
                                             const std::function<void(const std::string&)>& progress) {
    validate_sweep(spec);
    std::vector<Task> tasks;
    auto ns = effective_n(spec);
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    auto schemes = spec.schemes;
    std::sort(schemes.begin(), schemes.end());
    schemes.erase(std::unique(schemes.begin(), schemes.end()), schemes.end());
    for (auto s : schemes)
        for (int n : ns) tasks.push_back({s, n, s == MacScheme::scm ? Engine::round_sim : Engine::queue_sim});

    std::vector<ComparisonReport> reports(tasks.size());
    std::mutex progress_mutex;
    parallel_for(tasks.size(), spec.jobs, [&](std::size_t i) {
        const auto& t = tasks[i];
        const ProtocolConfig sim_config = point_config(base, spec, t.scheme, t.n);
        ProtocolConfig analytic_config = sim_config;
        if (analytic_override) analytic_override(analytic_config);
        const auto analytic = evaluate_scheme(analytic_config);
        std::optional<QueueStats> queue;
        std::optional<RoundStats> round;
        if (t.engine == Engine::queue_sim) {
            queue = simulate_queue_stats(sim_config);
        } else {
            const auto run = run_round_mode(sim_config);
            round = estimate_round_stats(run.rounds, t.scheme, t.n, sim_config.sim.batches);
        }
        reports[i] = compare(analytic, queue, round, tolerances);
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(std::string(scheme_slug(t.scheme)) + " N=" + std::to_string(t.n) +
                     (reports[i].pass ? " pass" : " FAIL"));
        }
    });
    return reports;
}

}  // namespace wurlab
