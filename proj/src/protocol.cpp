#include "wurlab/protocol.hpp"

#include <algorithm>
#include <string>

#include "wurlab/analytic.hpp"

namespace wurlab {

namespace {

bool overlaps(double a_start, double a_end, double b_start, double b_end) {
    return a_start < b_end && b_start < a_end;
}

constexpr double kClockSlack = 1e-9;

}  // namespace

// ---------------------------------------------------------------------------
// Channel

CcaVerdict Channel::cca_sample(double start, double duration, std::optional<int> exclude_source) const {
    const double end = start + duration;
    for (const auto& t : live_) {
        if (exclude_source && t.source == *exclude_source) continue;
        if (overlaps(t.start, t.end, start, end)) return CcaVerdict::busy;
    }
    return CcaVerdict::idle;
}

std::uint64_t Channel::begin_transmission(int source, double start, double duration) {
    const double end = start + duration;
    if (!options_.allow_self_overlap) {
        for (const auto& t : live_) {
            if (t.source == source && !t.finished && t.end > start)
                throw ProtocolFault("source " + std::to_string(source) + " started a second transmission at " +
                                    std::to_string(start) + " while on air");
        }
    }
    Transmission tx{next_id_++, source, start, end, false, false};
    for (auto& t : live_) {
        if (t.source != source && overlaps(t.start, t.end, start, end)) {
            t.collided = true;
            tx.collided = true;
        }
    }
    live_.push_back(tx);

    if (options_.record_occupancy) {
        if (!occupancy_.empty() && start <= occupancy_.back().end)
            occupancy_.back().end = std::max(occupancy_.back().end, end);
        else
            occupancy_.push_back({start, end});
    }
    return tx.id;
}

Transmission Channel::end_transmission(std::uint64_t id) {
    auto it = std::find_if(live_.begin(), live_.end(), [id](const Transmission& t) { return t.id == id; });
    if (it == live_.end() || it->finished)
        throw ProtocolFault("end of unknown or finished transmission " + std::to_string(id));
    it->finished = true;
    if (it->collided) {
        ++collided_;
    } else {
        ++delivered_;
        for (const auto& d : live_) {
            if (d.id != it->id && d.finished && !d.collided && d.source != it->source &&
                overlaps(d.start, d.end, it->start, it->end))
                ++exclusivity_violations_;
        }
    }
    return *it;
}

void Channel::prune(double time) {
    std::erase_if(live_, [time](const Transmission& t) { return t.finished && t.end <= time; });
}

std::vector<BusyInterval> Channel::occupancy_log() const { return occupancy_; }

// ---------------------------------------------------------------------------
// EnergyLedger

void EnergyLedger::close(double time) {
    if (time < since_) {
        if (since_ - time > kClockSlack)
            throw ProtocolFault("ledger moved backwards from " + std::to_string(since_) + " to " +
                                std::to_string(time));
        time = since_;
    }
    durations_[static_cast<int>(state_)] += time - since_;
    since_ = time;
}

void EnergyLedger::enter(PowerState state, double time) {
    close(time);
    state_ = state;
}

void EnergyLedger::reset(PowerState state, double time) {
    durations_.fill(0.0);
    state_ = state;
    since_ = time;
}

double EnergyLedger::total_time() const {
    double sum = 0.0;
    for (double d : durations_) sum += d;
    return sum;
}

double EnergyLedger::energy(const PowerTable& power) const {
    double sum = 0.0;
    for (int s = 0; s < kPowerStateCount; ++s) sum += durations_[s] * power.of(static_cast<PowerState>(s));
    return sum;
}

// ---------------------------------------------------------------------------
// Sensor node

std::string_view sn_mode_name(SnMode mode) {
    switch (mode) {
        case SnMode::sleep: return "Sleep";
        case SnMode::mode_switch: return "ModeSwitch";
        case SnMode::await_channel: return "AwaitChannel";
        case SnMode::backoff: return "Backoff";
        case SnMode::cca: return "Cca";
        case SnMode::tx_jreq: return "TxJreq";
        case SnMode::await_tdma: return "AwaitTdma";
        case SnMode::await_slot: return "AwaitSlot";
        case SnMode::tx_data: return "TxData";
        case SnMode::await_ack: return "AwaitAck";
        case SnMode::dropped: return "Dropped";
    }
    return "?";
}

namespace {

Event node_event(const SnState& s, double time, EventKind kind, std::int64_t detail = 0) {
    Event e;
    e.time = time;
    e.actor = s.id;
    e.kind = kind;
    e.payload = detail;
    e.token = s.token;
    return e;
}

[[noreturn]] void unreachable(const SnState& s, const Event& e) {
    throw ProtocolFault("node " + std::to_string(s.id) + " cannot accept " +
                        std::string(event_kind_name(e.kind)) + " in mode " + std::string(sn_mode_name(s.mode)));
}

void start_cca(SnState& s, double now, StepContext& ctx, std::vector<Event>& out) {
    s.mode = SnMode::cca;
    s.cca_start = now;
    s.ledger.enter(PowerState::cca, now);
    out.push_back(node_event(s, now + ctx.timing.t_cca, EventKind::cca_complete));
}

void go_to_sleep(SnState& s, double now, StepContext& ctx, std::vector<Event>& out, SnMode mode) {
    s.mode = mode;
    s.ledger.enter(PowerState::mode_switch, now);
    out.push_back(node_event(s, now + ctx.timing.t_mst, EventKind::mst_done, payload::kSleeping));
}

}  // namespace

void begin_attempt(SnState& s, double now, StepContext& ctx, std::vector<Event>& out) {
    const auto& mac = ctx.config.mac;
    if (attempt_has_backoff(s.scheme, s.attempt, mac)) {
        const auto slots = static_cast<int>(draw_uniform_int(ctx.rng, 0, mac.cw - 1));
        s.backoff_slots += slots;
        if (slots > 0) {
            s.mode = SnMode::backoff;
            s.backoff_remaining = slots;
            s.ledger.enter(PowerState::backoff, now);
            out.push_back(node_event(s, now + slots * mac.slot_duration, EventKind::backoff_expired, slots));
            return;
        }
    }
    start_cca(s, now, ctx, out);
}

void abort_setup(SnState& s, double now, StepContext& ctx, std::vector<Event>& out) {
    if (s.mode == SnMode::tx_jreq) ctx.channel.end_transmission(s.tx_id);
    ++s.token;
    s.outcome = NodeOutcome::dropped;
    s.delay = now - s.hol_since;
    go_to_sleep(s, now, ctx, out, SnMode::mode_switch);
}

StepOutput step_sn(SnState& s, const Event& e, StepContext& ctx) {
    StepOutput r;
    auto& out = r.emitted;
    const double now = e.time;
    const auto& timing = ctx.timing;

    switch (e.kind) {
        case EventKind::wuc_delivered: {
            if (s.mode != SnMode::sleep) unreachable(s, e);
            if (s.queue == 0) {
                s.outcome = NodeOutcome::queue_empty;
                s.ledger.enter(PowerState::sleep, now);
                r.signal = SnSignal::asleep_empty;
                return r;
            }
            s.hol_since = now;
            s.attempt = 0;
            s.delta = static_cast<int>(
                draw_uniform_int(ctx.rng, ctx.config.traffic.delta_min, ctx.config.traffic.delta_max));
            s.mode = SnMode::mode_switch;
            s.ledger.enter(PowerState::mode_switch, now);
            out.push_back(node_event(s, now + timing.t_mst, EventKind::mst_done, payload::kWaking));
            return r;
        }

        case EventKind::mst_done: {
            if (e.payload == payload::kWaking) {
                if (s.mode != SnMode::mode_switch) unreachable(s, e);
                if (s.scheme == MacScheme::scm) {
                    s.mode = SnMode::await_channel;
                    s.ledger.enter(PowerState::idle, now);
                    out.push_back(node_event(s, now, EventKind::tx_start, payload::kJreq));
                } else {
                    begin_attempt(s, now, ctx, out);
                }
                return r;
            }
            if (s.mode != SnMode::mode_switch && s.mode != SnMode::dropped) unreachable(s, e);
            s.mode = SnMode::sleep;
            s.ledger.enter(PowerState::sleep, now);
            r.signal = SnSignal::asleep;
            return r;
        }

        case EventKind::backoff_expired:
            if (s.mode != SnMode::backoff) unreachable(s, e);
            s.backoff_remaining = 0;
            start_cca(s, now, ctx, out);
            return r;

        case EventKind::cca_complete: {
            if (s.mode != SnMode::cca) unreachable(s, e);
            ++s.ccas;
            const auto verdict = ctx.channel.cca_sample(s.cca_start, timing.t_cca, s.id);
            if (verdict == CcaVerdict::idle) {
                s.mode = SnMode::await_channel;
                s.ledger.enter(PowerState::idle, now);
                out.push_back(node_event(s, now, EventKind::tx_start, payload::kJreq));
                return r;
            }
            ++s.busy_ccas;
            ++s.attempt;
            if (s.attempt == ctx.config.mac.ma + 1) {
                s.outcome = NodeOutcome::dropped;
                s.delay = now - s.hol_since;
                go_to_sleep(s, now, ctx, out, SnMode::dropped);
                r.signal = SnSignal::dropped;
                return r;
            }
            begin_attempt(s, now, ctx, out);
            return r;
        }

        case EventKind::tx_start: {
            if (s.mode != SnMode::await_channel && s.mode != SnMode::await_slot) unreachable(s, e);
            if (e.payload == payload::kJreq) {
                if (s.mode != SnMode::await_channel) unreachable(s, e);
                s.mode = SnMode::tx_jreq;
                s.jreq_sent = true;
                s.ledger.enter(PowerState::tx, now);
                s.tx_id = ctx.channel.begin_transmission(s.id, now, timing.t_jreq);
                out.push_back(node_event(s, now + timing.t_jreq, EventKind::tx_end, payload::kJreq));
                return r;
            }
            unreachable(s, e);
        }

        case EventKind::slot_start: {
            if (s.mode != SnMode::await_slot) unreachable(s, e);
            s.mode = SnMode::tx_data;
            s.ledger.enter(PowerState::tx, now);
            const double duration = s.delta * timing.t_t + timing.t_oh;
            s.tx_id = ctx.channel.begin_transmission(s.id, now, duration);
            out.push_back(node_event(s, now + duration, EventKind::tx_end, payload::kData));
            return r;
        }

        case EventKind::tx_end: {
            if (e.payload == payload::kJreq) {
                if (s.mode != SnMode::tx_jreq) unreachable(s, e);
                const auto tx = ctx.channel.end_transmission(s.tx_id);
                s.jreq_collided = tx.collided;
                s.mode = SnMode::await_tdma;
                s.ledger.enter(PowerState::idle, now);
                r.signal = tx.collided ? SnSignal::jreq_collided : SnSignal::jreq_delivered;
                return r;
            }
            if (s.mode != SnMode::tx_data) unreachable(s, e);
            ctx.channel.end_transmission(s.tx_id);
            s.mode = SnMode::await_ack;
            s.ledger.enter(PowerState::idle, now);  // guard interval
            out.push_back(node_event(s, now + timing.t_g + timing.t_ack, EventKind::ack_delivered));
            return r;
        }

        case EventKind::tdma_assigned: {
            if (s.mode != SnMode::await_tdma) unreachable(s, e);
            // The assignment broadcast occupied [now - t_tdma, now).
            s.ledger.enter(PowerState::rx, now - timing.t_tdma);
            if (e.payload == 1) {
                s.mode = SnMode::await_slot;
                s.ledger.enter(ctx.config.energy.include_tdma_idle ? PowerState::idle : PowerState::sleep, now);
                return r;
            }
            s.outcome = NodeOutcome::dropped;
            s.delay = now - s.hol_since;
            go_to_sleep(s, now, ctx, out, SnMode::mode_switch);
            return r;
        }

        case EventKind::ack_delivered: {
            if (s.mode != SnMode::await_ack) unreachable(s, e);
            s.ledger.enter(PowerState::rx, now - timing.t_ack);
            s.frames_in_round = s.delta;
            --s.queue;
            s.outcome = NodeOutcome::clustered;
            s.delay = now - s.hol_since;
            go_to_sleep(s, now, ctx, out, SnMode::mode_switch);
            r.signal = SnSignal::data_done;
            return r;
        }

        default: unreachable(s, e);
    }
}

// ---------------------------------------------------------------------------
// UAV

std::vector<SlotAssignment> assign_tdma(const std::vector<JreqRecord>& received, const TimingTable& timing,
                                        double first_slot) {
    std::vector<SlotAssignment> schedule;
    schedule.reserve(received.size());
    double t = first_slot;
    for (const auto& j : received) {
        schedule.push_back({j.node, t, j.delta});
        t += j.delta * timing.t_t + timing.t_oh + timing.t_g + timing.t_ack;
    }
    return schedule;
}

}  // namespace wurlab
