#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wurlab/config.hpp"
#include "wurlab/engine.hpp"

namespace wurlab {

// ---------------------------------------------------------------------------
// Shared medium. All intervals are half-open [start, end).

struct Transmission {
    std::uint64_t id = 0;
    int source = 0;  // node id or kUavActor
    double start = 0;
    double end = 0;
    bool collided = false;
    bool finished = false;
};

struct BusyInterval {
    double start = 0;
    double end = 0;
};

enum class CcaVerdict { idle, busy };

class Channel {
public:
    struct Options {
        /// Allow a source to start while its own earlier transmission is still on air.
        bool allow_self_overlap = false;
        /// Keep the merged occupancy log.
        bool record_occupancy = false;
    };

    Channel() : Channel(Options{}) {}
    explicit Channel(Options options) : options_(options) {}

    /// Busy iff some transmission not from `exclude_source` overlaps [start, start+duration).
    /// Pure read: sensing never occupies the medium.
    CcaVerdict cca_sample(double start, double duration, std::optional<int> exclude_source = {}) const;

    /// Registers a transmission and marks every overlapping one (and itself) collided.
    /// Throws ProtocolFault if `source` is already on air at `start`.
    std::uint64_t begin_transmission(int source, double start, double duration);

    /// Finalises a transmission and returns it with its collision verdict.
    Transmission end_transmission(std::uint64_t id);

    /// Forgets finished transmissions that ended at or before `time`.
    void prune(double time);

    /// Merged, disjoint occupancy intervals (only with record_occupancy).
    std::vector<BusyInterval> occupancy_log() const;

    std::size_t delivered_count() const { return delivered_; }
    std::size_t collided_count() const { return collided_; }
    /// Delivered transmissions found overlapping an earlier delivered one; always 0
    /// unless collision marking is broken.
    std::size_t exclusivity_violations() const { return exclusivity_violations_; }

private:
    Options options_;
    std::vector<Transmission> live_;
    std::uint64_t next_id_ = 1;
    std::vector<BusyInterval> occupancy_;
    std::size_t delivered_ = 0;
    std::size_t collided_ = 0;
    std::size_t exclusivity_violations_ = 0;
    std::vector<BusyInterval> delivered_tail_;  // recent delivered intervals, sorted by start
};

/// Raised on a state-machine transition that cannot happen; aborts the run.
class ProtocolFault : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Per-state time and energy accounting.

class EnergyLedger {
public:
    explicit EnergyLedger(PowerState initial = PowerState::sleep, double t0 = 0.0)
        : state_(initial), since_(t0) {}

    /// Closes the current residency at `time` and switches to `state`.
    void enter(PowerState state, double time);
    /// Accounts the current residency up to `time` without changing state.
    void close(double time);
    /// Clears the accumulated durations and restarts at `time`.
    void reset(PowerState state, double time);

    PowerState state() const { return state_; }
    double since() const { return since_; }
    double duration(PowerState state) const { return durations_[static_cast<int>(state)]; }
    double total_time() const;
    double energy(const PowerTable& power) const;

private:
    std::array<double, kPowerStateCount> durations_{};
    PowerState state_;
    double since_;
};

// ---------------------------------------------------------------------------
// Sensor-node state machine.

enum class SnMode {
    sleep,
    mode_switch,
    await_channel,
    backoff,
    cca,
    tx_jreq,
    await_tdma,
    await_slot,
    tx_data,
    await_ack,
    dropped,
};

std::string_view sn_mode_name(SnMode mode);

enum class NodeOutcome { clustered, dropped, queue_empty };

inline constexpr int kQueueCapacity = 2;

/// Payload values for node-addressed events.
namespace payload {
inline constexpr std::int64_t kWaking = 1;     // MstDone: sleep -> active
inline constexpr std::int64_t kSleeping = 0;   // MstDone: active -> sleep
inline constexpr std::int64_t kJreq = 0;       // TxEnd
inline constexpr std::int64_t kData = 1;       // TxEnd
}  // namespace payload

struct SnState {
    int id = 0;
    MacScheme scheme = MacScheme::cca;
    SnMode mode = SnMode::sleep;
    int attempt = 0;            // failed attempts for the current JReq
    int backoff_remaining = 0;  // slots
    int queue = 0;              // frames held, 0..2
    double hol_since = 0;       // wake-up (WuC delivery) time of the current round
    int delta = 0;              // data frames this round
    EnergyLedger ledger;

    // Round bookkeeping.
    int frames_in_round = 0;
    double cca_start = 0;
    std::uint64_t tx_id = 0;
    std::uint64_t token = 0;
    NodeOutcome outcome = NodeOutcome::queue_empty;
    std::optional<double> delay;
    bool jreq_sent = false;
    bool jreq_collided = false;
    int ccas = 0;
    int busy_ccas = 0;
    int backoff_slots = 0;  // total drawn this round
    std::uint64_t blocked_arrivals = 0;
    int max_queue_seen = 0;
};

/// What the UAV controller learns from one node step.
enum class SnSignal { none, asleep_empty, jreq_delivered, jreq_collided, dropped, data_done, asleep };

struct StepContext {
    const ProtocolConfig& config;
    const TimingTable& timing;
    Channel& channel;
    RandomStream& rng;
};

struct StepOutput {
    std::vector<Event> emitted;
    SnSignal signal = SnSignal::none;
};

/// Advances one node by one event addressed to it. Emitted events carry the node's
/// current token. Throws ProtocolFault for a transition the machine does not accept.
StepOutput step_sn(SnState& state, const Event& event, StepContext& ctx);

/// Starts the next contention attempt (backoff if the scheme calls for one, else CCA).
void begin_attempt(SnState& state, double now, StepContext& ctx, std::vector<Event>& out);

/// Hard setup timeout: a node still contending is marked dropped and switches back to sleep.
/// An in-flight JReq is taken off the channel.
void abort_setup(SnState& state, double now, StepContext& ctx, std::vector<Event>& out);

/// True while the node is between wake-up and the end of its JReq.
inline bool is_contending(SnMode mode) {
    switch (mode) {
        case SnMode::mode_switch:
        case SnMode::await_channel:
        case SnMode::backoff:
        case SnMode::cca:
        case SnMode::tx_jreq: return true;
        default: return false;
    }
}

// ---------------------------------------------------------------------------
// UAV side.

struct JreqRecord {
    int node = 0;
    int delta = 0;
};

struct SlotAssignment {
    int node = 0;
    double start = 0;  // first data slot
    int slots = 0;
};

struct UavState {
    std::vector<JreqRecord> received;  // arrival order
    std::vector<SlotAssignment> schedule;
    int round = 0;
};

/// Slots for every received JReq, in arrival order, starting at `first_slot`. Node i gets
/// delta_i contiguous data slots (plus header overhead); each block is followed by the
/// guard time and the ACK before the next node's block begins.
std::vector<SlotAssignment> assign_tdma(const std::vector<JreqRecord>& received, const TimingTable& timing,
                                        double first_slot);

}  // namespace wurlab
