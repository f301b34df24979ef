#include <algorithm>
#include <cmath>
#include <ostream>

#include "wurlab/numfmt.hpp"
#include "wurlab/simulate.hpp"

namespace wurlab {

int RoundTrace::count(NodeOutcome outcome) const {
    return static_cast<int>(
        std::count_if(nodes.begin(), nodes.end(), [outcome](const auto& n) { return n.outcome == outcome; }));
}

double effective_setup_timeout(const ProtocolConfig& config, const TimingTable& timing) {
    if (config.sim.setup_timeout > 0) return config.sim.setup_timeout;
    const auto& mac = config.mac;
    const double per_attempt = (mac.cw - 1) * mac.slot_duration + timing.t_cca;
    return 2.0 * (timing.t_mst + (mac.ma + 1) * per_attempt + timing.t_jreq);
}

namespace {

// Arrival streams are kept apart from the contention streams so that the frame
// process does not depend on how many backoff draws a scheme makes.
constexpr std::uint64_t kArrivalDomain = 0xa771a1;

void log_event(std::ostream* log, const Event& e) {
    if (!log) return;
    *log << format_double(e.time) << '\t';
    if (e.actor == kUavActor)
        *log << "uav";
    else
        *log << "sn" << e.actor;
    *log << '\t' << event_kind_name(e.kind) << '\t' << e.payload << '\n';
}

class RoundSimulator {
public:
    RoundSimulator(const ProtocolConfig& config, const RoundOptions& options)
        : config_(config),
          options_(options),
          timing_(derive_timing(config)),
          power_(derive_power(config)),
          streams_(config.seed, config.traffic.n_nodes),
          queue_(options.tie_break, splitmix64(config.seed ^ 0x7157ULL)),
          setup_timeout_(effective_setup_timeout(config, timing_)) {
        const int n = config.traffic.n_nodes;
        const std::uint64_t arrival_seed = derive_seed(config.seed, kArrivalDomain);
        nodes_.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            auto& s = nodes_[static_cast<std::size_t>(i)];
            s.id = i;
            s.scheme = config.mac.scheme;
            s.queue = 1;
            s.max_queue_seen = 1;
            arrivals_.emplace_back(arrival_seed, static_cast<std::uint64_t>(i));
        }
        run_.max_queue = n > 0 ? 1 : 0;
    }

    RoundRun run() {
        const int rounds = options_.rounds.value_or(config_.sim.rounds);
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) schedule_arrival(i, 0.0);
        run_.rounds.reserve(static_cast<std::size_t>(std::max(rounds, 0)));
        double t = 0.0;
        for (int r = 0; r < rounds; ++r) t = run_round(r, t);
        run_.exclusivity_violations = channel_.exclusivity_violations();
        return std::move(run_);
    }

private:
    void schedule(const Event& e) { queue_.schedule(e); }

    void schedule_arrival(int node, double after) {
        Event e;
        e.time = after + draw_exponential(arrivals_[static_cast<std::size_t>(node)], config_.traffic.lambda);
        e.actor = node;
        e.kind = EventKind::frame_arrival;
        schedule(e);
    }

    void uav_event(double time, EventKind kind, std::int64_t detail) {
        Event e;
        e.time = time;
        e.actor = kUavActor;
        e.kind = kind;
        e.payload = detail;
        e.token = static_cast<std::uint64_t>(round_);
        schedule(e);
    }

    double run_round(int r, double t0) {
        round_ = r;
        const int n = static_cast<int>(nodes_.size());
        participants_ = 0;
        resolved_ = 0;
        asleep_ = 0;
        wuc_seen_ = 0;
        setup_closed_ = false;
        tdma_pending_ = false;
        received_.clear();

        for (auto& s : nodes_) {
            s.ledger.reset(PowerState::wuc_listen, t0);
            s.mode = SnMode::sleep;
            s.attempt = 0;
            s.delay.reset();
            s.outcome = NodeOutcome::queue_empty;
            s.jreq_sent = s.jreq_collided = false;
            s.ccas = s.busy_ccas = s.backoff_slots = 0;
            s.frames_in_round = 0;
            s.delta = 0;
            ++s.token;
            Event e;
            e.time = t0 + timing_.t_wuc;
            e.actor = s.id;
            e.kind = EventKind::wuc_delivered;
            e.token = s.token;
            schedule(e);
        }
        uav_event(t0 + timing_.t_wuc + setup_timeout_, EventKind::timeout, r);

        double now = t0;
        while (!(asleep_ == n && !tdma_pending_ && wuc_seen_ == n)) {
            const Event e = queue_.pop();
            now = e.time;
            dispatch(e);
        }
        return finish_round(r, t0, now);
    }

    void dispatch(const Event& e) {
        if (e.kind == EventKind::frame_arrival) {
            log_event(options_.event_log, e);
            auto& s = nodes_[static_cast<std::size_t>(e.actor)];
            if (s.queue < kQueueCapacity) {
                ++s.queue;
                run_.max_queue = std::max(run_.max_queue, s.queue);
            } else {
                ++run_.blocked_arrivals;
            }
            schedule_arrival(e.actor, e.time);
            return;
        }
        if (e.actor == kUavActor) {
            if (e.token != static_cast<std::uint64_t>(round_)) return;
            if (e.kind == EventKind::timeout && setup_closed_) return;
            log_event(options_.event_log, e);
            if (e.kind == EventKind::timeout)
                on_setup_timeout(e.time);
            else
                on_tdma_broadcast_end(e.time);
            return;
        }

        auto& s = nodes_[static_cast<std::size_t>(e.actor)];
        if (e.token != s.token) return;
        log_event(options_.event_log, e);
        StepContext ctx{config_, timing_, channel_, streams_.node(e.actor)};
        auto out = step_sn(s, e, ctx);
        for (const auto& emitted : out.emitted) schedule(emitted);
        if (e.kind == EventKind::tdma_assigned && e.payload == 1) schedule_slot(s);
        run_.max_ccas_per_round = std::max(run_.max_ccas_per_round, s.ccas);

        switch (out.signal) {
            case SnSignal::asleep_empty:
                ++asleep_;
                break;
            case SnSignal::jreq_delivered:
                received_.push_back({s.id, s.delta});
                ++resolved_;
                break;
            case SnSignal::jreq_collided:
            case SnSignal::dropped:
                ++resolved_;
                break;
            case SnSignal::asleep:
                ++asleep_;
                break;
            case SnSignal::none:
            case SnSignal::data_done:
                break;
        }
        if (e.kind == EventKind::wuc_delivered) {
            ++wuc_seen_;
            if (out.signal != SnSignal::asleep_empty) ++participants_;
        }
        maybe_close_setup(e.time);
        channel_.prune(e.time - timing_.t_cca);
    }

    void maybe_close_setup(double now) {
        if (setup_closed_ || wuc_seen_ < static_cast<int>(nodes_.size())) return;
        if (participants_ == 0) {
            setup_closed_ = true;
            return;
        }
        if (resolved_ == participants_) close_setup(now);
    }

    void on_setup_timeout(double now) {
        ++run_.setup_timeouts;
        for (auto& s : nodes_) {
            if (!is_contending(s.mode)) continue;
            StepContext ctx{config_, timing_, channel_, streams_.node(s.id)};
            std::vector<Event> out;
            abort_setup(s, now, ctx, out);
            for (const auto& e : out) schedule(e);
            ++resolved_;
        }
        close_setup(now);
    }

    void close_setup(double now) {
        setup_closed_ = true;
        tdma_pending_ = true;
        uav_event(now + timing_.t_tdma, EventKind::tdma_assigned, static_cast<std::int64_t>(received_.size()));
    }

    void on_tdma_broadcast_end(double now) {
        tdma_pending_ = false;
        const auto schedule_list = assign_tdma(received_, timing_, now);
        std::vector<bool> included(nodes_.size(), false);
        for (const auto& a : schedule_list) included[static_cast<std::size_t>(a.node)] = true;

        for (auto& s : nodes_) {
            if (s.mode != SnMode::await_tdma) continue;
            Event e;
            e.time = now;
            e.actor = s.id;
            e.kind = EventKind::tdma_assigned;
            e.payload = included[static_cast<std::size_t>(s.id)] ? 1 : 0;
            e.token = s.token;
            schedule(e);
        }
        slot_of_.assign(nodes_.size(), SlotAssignment{});
        for (const auto& a : schedule_list) slot_of_[static_cast<std::size_t>(a.node)] = a;
    }

    // Slot starts are released only once the node has processed its assignment, so the
    // order of equal-time events cannot put SlotStart ahead of TdmaAssigned.
    void schedule_slot(const SnState& s) {
        const auto& a = slot_of_[static_cast<std::size_t>(s.id)];
        Event e;
        e.time = a.start;
        e.actor = s.id;
        e.kind = EventKind::slot_start;
        e.payload = a.slots;
        e.token = s.token;
        schedule(e);
    }

    double finish_round(int r, double t0, double end) {
        RoundTrace trace;
        trace.index = r;
        trace.start = t0;
        trace.duration = end - t0;
        trace.nodes.reserve(nodes_.size());
        for (auto& s : nodes_) {
            s.ledger.close(end);
            NodeRoundRecord rec;
            rec.outcome = s.outcome;
            rec.delay = s.delay;
            rec.energy = s.ledger.energy(power_);
            rec.membership = s.ledger.total_time();
            for (int k = 0; k < kPowerStateCount; ++k) rec.durations[k] = s.ledger.duration(static_cast<PowerState>(k));
            rec.delta = s.delta;
            rec.ccas = s.ccas;
            rec.busy_ccas = s.busy_ccas;
            rec.backoff_slots = s.backoff_slots;
            rec.jreq_sent = s.jreq_sent;
            rec.jreq_collided = s.jreq_collided;
            if (s.outcome == NodeOutcome::clustered) {
                ++trace.cluster_size;
                trace.frames_delivered += s.frames_in_round;
            }
            run_.max_conservation_error =
                std::max(run_.max_conservation_error, std::abs(rec.membership - trace.duration));
            trace.nodes.push_back(rec);
        }
        run_.rounds.push_back(std::move(trace));
        return end;
    }

    const ProtocolConfig& config_;
    const RoundOptions& options_;
    TimingTable timing_;
    PowerTable power_;
    RandomStreams streams_;
    std::vector<RandomStream> arrivals_;
    EventQueue queue_;
    Channel channel_;
    double setup_timeout_;
    std::vector<SnState> nodes_;
    std::vector<JreqRecord> received_;
    std::vector<SlotAssignment> slot_of_;
    RoundRun run_;

    int round_ = 0;
    int participants_ = 0;
    int resolved_ = 0;
    int asleep_ = 0;
    int wuc_seen_ = 0;
    bool setup_closed_ = false;
    bool tdma_pending_ = false;
};

}  // namespace

RoundRun run_round_mode(const ProtocolConfig& config, const RoundOptions& options) {
    validate(config);
    RoundSimulator sim(config, options);
    return sim.run();
}

}  // namespace wurlab
