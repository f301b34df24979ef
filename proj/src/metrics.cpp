#include "wurlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace wurlab {

namespace {

constexpr double kZ95 = 1.96;

struct Ratio {
    double num = 0;
    double den = 0;
};

/// Pooled ratio with a batch-means half-width over the batches that saw any data.
Estimate batch_ratio(const std::vector<Ratio>& batches) {
    Estimate est;
    double num = 0, den = 0;
    std::vector<double> per_batch;
    for (const auto& b : batches) {
        num += b.num;
        den += b.den;
        if (b.den > 0) per_batch.push_back(b.num / b.den);
    }
    est.observations = static_cast<std::size_t>(den);
    est.value = den > 0 ? num / den : 0.0;
    const auto k = per_batch.size();
    if (k >= 2) {
        double mean = 0;
        for (double x : per_batch) mean += x;
        mean /= static_cast<double>(k);
        double ss = 0;
        for (double x : per_batch) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / static_cast<double>(k - 1));
        est.ci = kZ95 * sd / std::sqrt(static_cast<double>(k));
    }
    return est;
}

template <class Bins, class Num, class Den>
Estimate ratio_over(const Bins& bins, Num num, Den den) {
    std::vector<Ratio> r;
    r.reserve(bins.size());
    for (const auto& b : bins) r.push_back({num(b), den(b)});
    return batch_ratio(r);
}

}  // namespace

// ---------------------------------------------------------------------------
// Queue mode

QueueContext make_queue_context(const ProtocolConfig& config) {
    const TimingTable timing = derive_timing(config);
    const PowerTable power = derive_power(config);
    QueueContext c;
    c.scheme = config.mac.scheme;
    c.n_nodes = config.traffic.n_nodes;
    c.horizon = config.sim.horizon;
    c.t_cca = timing.t_cca;
    c.t_tr = timing.t_tr_mean;
    c.e_cca = timing.t_cca * power.p_cca;
    c.p_backoff = power.p_backoff;
    c.e_tr = exchange_energy(timing, power, config.traffic.mean_delta());
    c.warmup_fraction = config.sim.warmup_fraction;
    c.batches = config.sim.batches;
    return c;
}

QueueStatsAccumulator::QueueStatsAccumulator(const QueueContext& context)
    : ctx_(context),
      start_(context.horizon * context.warmup_fraction),
      width_((context.horizon - start_) / std::max(context.batches, 1)) {
    if (ctx_.batches < 2) throw EstimationError("batch means needs at least 2 batches");
    if (!(ctx_.horizon > start_)) throw EstimationError("warm-up leaves no observation window");
    bins_.resize(static_cast<std::size_t>(ctx_.batches));
}

int QueueStatsAccumulator::batch_of(double time) const {
    if (time < start_ || time > ctx_.horizon) return -1;
    const int b = static_cast<int>((time - start_) / width_);
    return std::min(b, ctx_.batches - 1);
}

void QueueStatsAccumulator::on_cca(int, double, double end, bool busy) {
    const int b = batch_of(end);
    if (b < 0) return;
    auto& bin = bins_[static_cast<std::size_t>(b)];
    bin.ccas += 1;
    if (busy) bin.busy += 1;
}

void QueueStatsAccumulator::on_frame(const FrameRecord& f) {
    const int b = batch_of(f.hol_end);
    if (b < 0) return;
    auto& bin = bins_[static_cast<std::size_t>(b)];
    const double hol = f.hol_end - f.hol_start;
    bin.frames += 1;
    if (!f.delivered) bin.lost += 1;
    bin.hol += hol;
    bin.d_a += hol + (f.delivered ? ctx_.t_tr : 0.0);
    bin.e_r += f.backoff_time * ctx_.p_backoff + f.ccas * ctx_.e_cca + (f.delivered ? ctx_.e_tr : 0.0);
}

void QueueStatsAccumulator::on_cycle(const CycleRecord& c) {
    const int b = batch_of(c.end);
    if (b < 0) return;
    auto& bin = bins_[static_cast<std::size_t>(b)];
    bin.cycles += 1;
    bin.cycle_frames += c.frames;
}

// A CCA started at s reads busy iff s lies in (start - t_cca, end) of some transmission.
// Transmissions arrive in start order, so the union is merged on the fly.
void QueueStatsAccumulator::on_transmission(int, double start, double end) {
    const double lo = start - ctx_.t_cca;
    if (open_hi_ >= open_lo_ && lo <= open_hi_) {
        open_hi_ = std::max(open_hi_, end);
        return;
    }
    add_busy_time(open_lo_, open_hi_);
    open_lo_ = lo;
    open_hi_ = end;
}

void QueueStatsAccumulator::on_arrival(int, double, bool) {}

void QueueStatsAccumulator::add_busy_time(double lo, double hi) {
    lo = std::max(lo, start_);
    hi = std::min(hi, ctx_.horizon);
    if (!(hi > lo)) return;
    for (int b = 0; b < ctx_.batches; ++b) {
        const double b_lo = start_ + b * width_;
        const double b_hi = b + 1 == ctx_.batches ? ctx_.horizon : b_lo + width_;
        const double overlap = std::min(hi, b_hi) - std::max(lo, b_lo);
        if (overlap > 0) bins_[static_cast<std::size_t>(b)].busy_time += overlap;
    }
}

QueueStats QueueStatsAccumulator::finish() {
    if (!finished_) {
        add_busy_time(open_lo_, open_hi_);
        open_hi_ = open_lo_ - 1;
        finished_ = true;
    }
    QueueStats s;
    s.scheme = ctx_.scheme;
    s.n_nodes = ctx_.n_nodes;
    s.batches = ctx_.batches;
    s.window_start = start_;
    s.window_end = ctx_.horizon;

    s.alpha = ratio_over(bins_, [](const Batch& b) { return b.busy; }, [](const Batch& b) { return b.ccas; });
    s.p_loss = ratio_over(bins_, [](const Batch& b) { return b.lost; }, [](const Batch& b) { return b.frames; });
    s.hol_delay = ratio_over(bins_, [](const Batch& b) { return b.hol; }, [](const Batch& b) { return b.frames; });
    s.d_a = ratio_over(bins_, [](const Batch& b) { return b.d_a; }, [](const Batch& b) { return b.frames; });
    s.e_r = ratio_over(bins_, [](const Batch& b) { return b.e_r; }, [](const Batch& b) { return b.frames; });
    s.frames_per_cycle = ratio_over(
        bins_, [](const Batch& b) { return b.cycle_frames; }, [](const Batch& b) { return b.cycles; });
    const double last_width = ctx_.horizon - (start_ + (ctx_.batches - 1) * width_);
    std::vector<Ratio> busy_time;
    for (int b = 0; b < ctx_.batches; ++b)
        busy_time.push_back({bins_[static_cast<std::size_t>(b)].busy_time, b + 1 == ctx_.batches ? last_width : width_});
    s.alpha_time = batch_ratio(busy_time);
    s.alpha_time.observations = s.alpha.observations;

    s.ccas = s.alpha.observations;
    s.frames = s.p_loss.observations;
    s.cycles = s.frames_per_cycle.observations;
    const auto needed = static_cast<std::size_t>(ctx_.batches) * 10;
    s.low_data = s.ccas < needed || s.frames < needed;
    return s;
}

QueueStats estimate_queue_stats(const QueueLog& log, double warmup_fraction, int batches) {
    QueueContext c;
    c.scheme = log.scheme;
    c.n_nodes = log.n_nodes;
    c.horizon = log.horizon;
    c.t_cca = log.t_cca;
    c.t_tr = log.t_tr;
    c.e_cca = log.e_cca;
    c.p_backoff = log.p_backoff;
    c.e_tr = log.e_tr;
    c.warmup_fraction = warmup_fraction;
    c.batches = batches;
    QueueStatsAccumulator acc(c);
    for (const auto& r : log.ccas) acc.on_cca(r.node, r.start, r.end, r.busy);
    for (const auto& f : log.frames) acc.on_frame(f);
    for (const auto& cy : log.cycles) acc.on_cycle(cy);
    for (const auto& t : log.transmissions) acc.on_transmission(t.node, t.start, t.end);
    return acc.finish();
}

QueueStats simulate_queue_stats(const ProtocolConfig& config, QueueRun* run) {
    QueueStatsAccumulator acc(make_queue_context(config));
    QueueRun r = run_queue_mode(config, static_cast<QueueObserver&>(acc));
    if (run) *run = std::move(r);
    return acc.finish();
}

// ---------------------------------------------------------------------------
// Round mode

RoundStats estimate_round_stats(const std::vector<RoundTrace>& rounds, MacScheme scheme, int n_nodes,
                                int batches) {
    if (rounds.empty()) throw EstimationError("round statistics need at least one round");
    struct Bin {
        double rounds = 0, cluster = 0;
        double participants = 0, clustered = 0, decided = 0;
        double delay = 0, delays = 0, energy = 0;
        double sent = 0, collided = 0, ccas = 0, busy = 0;
    };
    const auto r_count = rounds.size();
    const auto b_count = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(batches, 1)), r_count));
    std::vector<Bin> bins(b_count);

    RoundStats s;
    s.scheme = scheme;
    s.n_nodes = n_nodes;
    s.rounds = r_count;
    for (std::size_t i = 0; i < r_count; ++i) {
        auto& bin = bins[i * b_count / r_count];
        const auto& trace = rounds[i];
        bin.rounds += 1;
        bin.cluster += trace.cluster_size;
        for (const auto& n : trace.nodes) {
            if (n.outcome == NodeOutcome::queue_empty) continue;
            bin.participants += 1;
            bin.decided += 1;
            if (n.outcome == NodeOutcome::clustered) bin.clustered += 1;
            if (n.delay) {
                bin.delay += *n.delay;
                bin.delays += 1;
            }
            bin.energy += n.energy;
            if (n.jreq_sent) bin.sent += 1;
            if (n.jreq_collided) bin.collided += 1;
            bin.ccas += n.ccas;
            bin.busy += n.busy_ccas;
        }
    }

    s.cluster_size = ratio_over(bins, [](const Bin& b) { return b.cluster; }, [](const Bin& b) { return b.rounds; });
    s.mean_delay = ratio_over(bins, [](const Bin& b) { return b.delay; }, [](const Bin& b) { return b.delays; });
    s.mean_energy = ratio_over(bins, [](const Bin& b) { return b.energy; }, [](const Bin& b) { return b.participants; });
    double participants = 0, sent = 0, ccas = 0;
    for (const auto& b : bins) {
        participants += b.participants;
        sent += b.sent;
        ccas += b.ccas;
    }
    s.participants = static_cast<std::size_t>(participants);
    if (participants > 0)
        s.success_rate =
            ratio_over(bins, [](const Bin& b) { return b.clustered; }, [](const Bin& b) { return b.decided; });
    if (sent > 0)
        s.collision_rate = ratio_over(bins, [](const Bin& b) { return b.collided; }, [](const Bin& b) { return b.sent; });
    if (ccas > 0) s.alpha = ratio_over(bins, [](const Bin& b) { return b.busy; }, [](const Bin& b) { return b.ccas; });
    return s;
}

// ---------------------------------------------------------------------------
// Comparison

const MetricCheck* ComparisonReport::find(const std::string& metric) const {
    for (const auto& c : checks)
        if (c.metric == metric) return &c;
    return nullptr;
}

namespace {

MetricCheck make_check(std::string metric, double analytic, double simulated, double ci, double tolerance,
                       bool relative) {
    MetricCheck c;
    c.metric = std::move(metric);
    c.analytic = analytic;
    c.simulated = simulated;
    c.delta = simulated - analytic;
    c.abs_delta = std::abs(c.delta);
    c.rel_delta = analytic != 0.0 ? c.abs_delta / std::abs(analytic)
                                  : (c.abs_delta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    c.tolerance = tolerance;
    c.relative = relative;
    c.ci = ci;
    c.pass = (relative ? c.rel_delta : c.abs_delta) <= tolerance;
    return c;
}

}  // namespace

ComparisonReport compare(const SchemeMetrics& analytic, const std::optional<QueueStats>& queue,
                         const std::optional<RoundStats>& round, const Tolerances& tol) {
    auto same_point = [&](MacScheme scheme, int n) { return scheme == analytic.scheme && n == analytic.n_nodes; };
    if (queue && !same_point(queue->scheme, queue->n_nodes))
        throw ComparisonError("queue statistics describe a different (scheme, N) point");
    if (round && !same_point(round->scheme, round->n_nodes))
        throw ComparisonError("round statistics describe a different (scheme, N) point");

    ComparisonReport r;
    r.scheme = analytic.scheme;
    r.n_nodes = analytic.n_nodes;
    r.analytic = analytic;
    r.queue = queue;
    r.round = round;

    if (analytic.scheme == MacScheme::scm) {
        if (!round || !round->collision_rate || !analytic.gamma)
            throw ComparisonError("SCM comparison needs the round-mode JReq collision rate");
        r.checks.push_back(make_check("gamma", *analytic.gamma, round->collision_rate->value,
                                      round->collision_rate->ci, tol.gamma, false));
    } else {
        if (!queue || !analytic.alpha) throw ComparisonError("contention comparison needs queue-mode statistics");
        r.checks.push_back(make_check("alpha", *analytic.alpha, queue->alpha.value, queue->alpha.ci, tol.alpha, false));
        r.checks.push_back(make_check("p_loss", analytic.p_loss, queue->p_loss.value, queue->p_loss.ci, tol.p_loss, false));
        r.checks.push_back(make_check("d_a", analytic.d_a, queue->d_a.value, queue->d_a.ci, tol.d_a, true));
        r.checks.push_back(make_check("e_r", analytic.e_r, queue->e_r.value, queue->e_r.ci, tol.e_r, true));
        if (queue->low_data) r.warnings.push_back("queue-mode run has fewer observations than batches x 10");
    }
    if (analytic.solution.multiple_roots)
        r.warnings.push_back("busy-probability map has several roots; the smallest was used");

    r.pass = std::all_of(r.checks.begin(), r.checks.end(), [](const MetricCheck& c) { return c.pass; });
    return r;
}

namespace {

using nlohmann::json;

json number(double x) {
    if (!std::isfinite(x)) return nullptr;
    return x;
}

json estimate_json(const Estimate& e) {
    return json{{"value", number(e.value)}, {"ci95", number(e.ci)}, {"observations", e.observations}};
}

json optional_estimate(const std::optional<Estimate>& e) { return e ? estimate_json(*e) : json(nullptr); }

json report_tree(const ComparisonReport& r) {
    json j;
    j["scheme"] = std::string(scheme_slug(r.scheme));
    j["n"] = r.n_nodes;

    const auto& a = r.analytic;
    json an{{"p_loss", number(a.p_loss)}, {"d_a_s", number(a.d_a)}, {"e_r_j", number(a.e_r)},
            {"e_d_hol_s", number(a.e_d_hol)}, {"a0", number(a.a0)}, {"e_tau", number(a.e_tau)}};
    an["alpha"] = a.alpha ? number(*a.alpha) : json(nullptr);
    an["gamma"] = a.gamma ? number(*a.gamma) : json(nullptr);
    an["solver"] = json{{"converged", a.solution.converged},
                        {"residual", number(a.solution.residual)},
                        {"iterations", a.solution.iterations},
                        {"multiple_roots", a.solution.multiple_roots}};
    j["analytic"] = an;

    if (r.queue) {
        const auto& q = *r.queue;
        j["queue_sim"] = json{{"alpha", estimate_json(q.alpha)},
                              {"alpha_time_weighted", estimate_json(q.alpha_time)},
                              {"p_loss", estimate_json(q.p_loss)},
                              {"hol_delay_s", estimate_json(q.hol_delay)},
                              {"frames_per_cycle", estimate_json(q.frames_per_cycle)},
                              {"d_a_s", estimate_json(q.d_a)},
                              {"e_r_j", estimate_json(q.e_r)},
                              {"batches", q.batches},
                              {"low_data", q.low_data},
                              {"window_s", json::array({number(q.window_start), number(q.window_end)})}};
    } else {
        j["queue_sim"] = nullptr;
    }
    if (r.round) {
        const auto& s = *r.round;
        j["round_sim"] = json{{"success_rate", optional_estimate(s.success_rate)},
                              {"collision_rate", optional_estimate(s.collision_rate)},
                              {"alpha", optional_estimate(s.alpha)},
                              {"mean_delay_s", estimate_json(s.mean_delay)},
                              {"mean_energy_j", estimate_json(s.mean_energy)},
                              {"cluster_size", estimate_json(s.cluster_size)},
                              {"rounds", s.rounds}};
    } else {
        j["round_sim"] = nullptr;
    }

    json checks = json::array();
    for (const auto& c : r.checks) {
        checks.push_back(json{{"metric", c.metric},
                              {"analytic", number(c.analytic)},
                              {"simulated", number(c.simulated)},
                              {"delta", number(c.delta)},
                              {"abs_delta", number(c.abs_delta)},
                              {"rel_delta", number(c.rel_delta)},
                              {"tolerance", c.tolerance},
                              {"tolerance_kind", c.relative ? "relative" : "absolute"},
                              {"ci95", number(c.ci)},
                              {"pass", c.pass}});
    }
    j["checks"] = checks;
    j["warnings"] = r.warnings;
    j["pass"] = r.pass;
    return j;
}

}  // namespace

std::string report_json(const ComparisonReport& report, int indent) { return report_tree(report).dump(indent); }

std::string reports_json(const std::vector<ComparisonReport>& reports, int indent) {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(report_tree(r));
    return arr.dump(indent);
}

}  // namespace wurlab
