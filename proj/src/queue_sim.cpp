#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wurlab/analytic.hpp"
#include "wurlab/simulate.hpp"

namespace wurlab {

void QueueLog::on_cca(int node, double start, double end, bool busy) { ccas.push_back({node, start, end, busy}); }
void QueueLog::on_frame(const FrameRecord& frame) { frames.push_back(frame); }
void QueueLog::on_cycle(const CycleRecord& cycle) { cycles.push_back(cycle); }
void QueueLog::on_transmission(int node, double start, double end) { transmissions.push_back({node, start, end}); }
void QueueLog::on_arrival(int, double, bool was_blocked) {
    ++arrivals;
    if (was_blocked) ++blocked;
}

namespace {

constexpr std::uint64_t kArrivalDomain = 0xa771a1;

struct QueueNode {
    int queue = 0;
    bool serving = false;
    int attempt = 0;
    int ccas = 0;
    double backoff_time = 0;
    double hol_start = 0;
    double cca_start = 0;
    double cycle_start = 0;
    int cycle_frames = 0;
    EnergyLedger ledger{PowerState::sleep, 0.0};
};

class QueueSimulator {
public:
    QueueSimulator(const ProtocolConfig& config, QueueObserver& observer)
        : config_(config),
          observer_(observer),
          timing_(derive_timing(config)),
          streams_(config.seed, config.traffic.n_nodes),
          channel_(Channel::Options{.allow_self_overlap = true, .record_occupancy = false}),
          nodes_(static_cast<std::size_t>(config.traffic.n_nodes)) {
        const std::uint64_t arrival_seed = derive_seed(config.seed, kArrivalDomain);
        for (int i = 0; i < config.traffic.n_nodes; ++i) arrivals_.emplace_back(arrival_seed, static_cast<std::uint64_t>(i));
    }

    QueueRun run() {
        const double horizon = config_.sim.horizon;
        const auto n = static_cast<int>(nodes_.size());
        for (int i = 0; i < n; ++i) schedule_arrival(i, 0.0);

        while (!queue_.empty() && queue_.top().time <= horizon) {
            const Event e = queue_.pop();
            ++result_.events;
            switch (e.kind) {
                case EventKind::frame_arrival: on_arrival(e.actor, e.time); break;
                case EventKind::backoff_expired: start_cca(e.actor, e.time); break;
                case EventKind::cca_complete: on_cca_complete(e.actor, e.time); break;
                case EventKind::tx_end: on_tx_end(static_cast<std::uint64_t>(e.payload)); break;
                default: throw ProtocolFault("unexpected queue-mode event " + std::string(event_kind_name(e.kind)));
            }
        }

        result_.horizon = horizon;
        result_.exclusivity_violations = channel_.exclusivity_violations();
        for (auto& node : nodes_) {
            node.ledger.close(horizon);
            result_.max_conservation_error =
                std::max(result_.max_conservation_error, std::abs(node.ledger.total_time() - horizon));
            std::array<double, kPowerStateCount> d{};
            for (int k = 0; k < kPowerStateCount; ++k) d[k] = node.ledger.duration(static_cast<PowerState>(k));
            result_.ledger_durations.push_back(d);
        }
        return std::move(result_);
    }

private:
    QueueNode& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }

    void emit(double time, int actor, EventKind kind, std::int64_t detail = 0) {
        Event e;
        e.time = time;
        e.actor = actor;
        e.kind = kind;
        e.payload = detail;
        queue_.schedule(e);
    }

    void schedule_arrival(int id, double after) {
        emit(after + draw_exponential(arrivals_[static_cast<std::size_t>(id)], config_.traffic.lambda), id,
             EventKind::frame_arrival);
    }

    void on_arrival(int id, double t) {
        auto& s = node(id);
        const bool blocked = s.queue >= kQueueCapacity;
        observer_.on_arrival(id, t, blocked);
        if (!blocked) {
            ++s.queue;
            result_.max_queue = std::max(result_.max_queue, s.queue);
            if (!s.serving) {
                s.cycle_start = t;
                s.cycle_frames = 0;
                start_service(id, t);
            }
        }
        schedule_arrival(id, t);
    }

    void start_service(int id, double t) {
        auto& s = node(id);
        s.serving = true;
        s.attempt = 0;
        s.ccas = 0;
        s.backoff_time = 0;
        s.hol_start = t;
        begin_attempt(id, t);
    }

    void begin_attempt(int id, double t) {
        auto& s = node(id);
        const auto& mac = config_.mac;
        if (attempt_has_backoff(mac.scheme, s.attempt, mac)) {
            const auto slots = draw_uniform_int(streams_.node(id), 0, mac.cw - 1);
            if (slots > 0) {
                const double wait = static_cast<double>(slots) * mac.slot_duration;
                s.backoff_time += wait;
                s.ledger.enter(PowerState::backoff, t);
                emit(t + wait, id, EventKind::backoff_expired, slots);
                return;
            }
        }
        start_cca(id, t);
    }

    void start_cca(int id, double t) {
        auto& s = node(id);
        s.cca_start = t;
        s.ledger.enter(PowerState::cca, t);
        emit(t + timing_.t_cca, id, EventKind::cca_complete);
    }

    void on_cca_complete(int id, double t) {
        auto& s = node(id);
        const bool busy = channel_.cca_sample(s.cca_start, timing_.t_cca, id) == CcaVerdict::busy;
        observer_.on_cca(id, s.cca_start, t, busy);
        ++s.ccas;
        result_.max_ccas_per_frame = std::max(result_.max_ccas_per_frame, s.ccas);
        channel_.prune(t - timing_.t_cca);

        if (!busy) {
            const auto tx = channel_.begin_transmission(id, t, timing_.t_tr_mean);
            observer_.on_transmission(id, t, t + timing_.t_tr_mean);
            emit(t + timing_.t_tr_mean, kChannelActor, EventKind::tx_end, static_cast<std::int64_t>(tx));
            finish_frame(id, t, true);
            return;
        }
        ++s.attempt;
        if (s.attempt == config_.mac.ma + 1) {
            finish_frame(id, t, false);
            return;
        }
        begin_attempt(id, t);
    }

    void finish_frame(int id, double t, bool delivered) {
        auto& s = node(id);
        observer_.on_frame(FrameRecord{id, s.hol_start, t, delivered, s.ccas, s.backoff_time});
        --s.queue;
        ++s.cycle_frames;
        if (s.queue > 0) {
            start_service(id, t);
            return;
        }
        s.serving = false;
        s.ledger.enter(PowerState::sleep, t);
        observer_.on_cycle(CycleRecord{id, s.cycle_start, t, s.cycle_frames});
    }

    void on_tx_end(std::uint64_t tx_id) {
        if (channel_.end_transmission(tx_id).collided) ++result_.simultaneous_collisions;
    }

    const ProtocolConfig& config_;
    QueueObserver& observer_;
    TimingTable timing_;
    RandomStreams streams_;
    std::vector<RandomStream> arrivals_;
    EventQueue queue_;
    Channel channel_;
    std::vector<QueueNode> nodes_;
    QueueRun result_;
};

}  // namespace

QueueRun run_queue_mode(const ProtocolConfig& config, QueueObserver& observer) {
    validate(config);
    if (config.mac.scheme == MacScheme::scm)
        throw std::invalid_argument("queue mode needs a sensing scheme; SCM never performs CCA");
    if (!(config.sim.horizon > 0)) throw std::invalid_argument("queue mode needs a positive horizon");
    QueueSimulator sim(config, observer);
    return sim.run();
}

QueueRun run_queue_mode(const ProtocolConfig& config, QueueLog& log) {
    const TimingTable timing = derive_timing(config);
    const PowerTable power = derive_power(config);
    log.horizon = config.sim.horizon;
    log.t_cca = timing.t_cca;
    log.t_tr = timing.t_tr_mean;
    log.e_cca = timing.t_cca * power.p_cca;
    log.p_backoff = power.p_backoff;
    log.e_tr = exchange_energy(timing, power, config.traffic.mean_delta());
    log.scheme = config.mac.scheme;
    log.n_nodes = config.traffic.n_nodes;
    return run_queue_mode(config, static_cast<QueueObserver&>(log));
}

}  // namespace wurlab
