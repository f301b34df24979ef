#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "wurlab/config.hpp"
#include "wurlab/engine.hpp"
#include "wurlab/protocol.hpp"

namespace wurlab {

// ===========================================================================
// Round mode: complete UAV rounds (WuC, setup, TDMA, data, ACK).

struct NodeRoundRecord {
    NodeOutcome outcome = NodeOutcome::queue_empty;
    std::optional<double> delay;  // WuC delivery to ACK reception, or to the drop decision
    double energy = 0;            // J, whole round membership
    double membership = 0;        // s, sum of ledger durations
    std::array<double, kPowerStateCount> durations{};
    int delta = 0;
    int ccas = 0;
    int busy_ccas = 0;
    int backoff_slots = 0;
    bool jreq_sent = false;
    bool jreq_collided = false;
};

struct RoundTrace {
    int index = 0;
    double start = 0;
    double duration = 0;
    int cluster_size = 0;
    int frames_delivered = 0;
    std::vector<NodeRoundRecord> nodes;

    int count(NodeOutcome outcome) const;
};

struct RoundOptions {
    std::ostream* event_log = nullptr;  // tab-separated time, actor, kind, detail
    TieBreak tie_break = TieBreak::insertion;
    std::optional<int> rounds;          // overrides config.sim.rounds
};

struct RoundRun {
    std::vector<RoundTrace> rounds;
    int max_queue = 0;
    int max_ccas_per_round = 0;
    std::size_t exclusivity_violations = 0;
    double max_conservation_error = 0;  // |ledger total - round duration|, worst node and round
    std::uint64_t blocked_arrivals = 0;
    std::uint64_t setup_timeouts = 0;
};

/// Setup hard timeout actually used: the configured one, or twice the worst-case
/// contention span of one node.
double effective_setup_timeout(const ProtocolConfig& config, const TimingTable& timing);

RoundRun run_round_mode(const ProtocolConfig& config, const RoundOptions& options = {});

// ===========================================================================
// Queue mode: steady-state contention with Poisson arrivals into M/G/1/2 queues.

struct FrameRecord {
    int node = 0;
    double hol_start = 0;  // frame reached the head of line and service began
    double hol_end = 0;    // last CCA completed
    bool delivered = false;
    int ccas = 0;
    double backoff_time = 0;
};

struct CycleRecord {
    int node = 0;
    double start = 0;
    double end = 0;
    int frames = 0;
};

class QueueObserver {
public:
    virtual ~QueueObserver() = default;
    virtual void on_cca(int node, double start, double end, bool busy) = 0;
    virtual void on_frame(const FrameRecord& frame) = 0;
    virtual void on_cycle(const CycleRecord& cycle) = 0;
    virtual void on_transmission(int node, double start, double end) = 0;
    virtual void on_arrival(int node, double time, bool blocked) = 0;
};

struct CcaRecord {
    int node = 0;
    double start = 0;
    double end = 0;
    bool busy = false;
};

struct TransmissionRecord {
    int node = 0;
    double start = 0;
    double end = 0;
};

/// Full in-memory record of a queue-mode run.
class QueueLog : public QueueObserver {
public:
    void on_cca(int node, double start, double end, bool busy) override;
    void on_frame(const FrameRecord& frame) override;
    void on_cycle(const CycleRecord& cycle) override;
    void on_transmission(int node, double start, double end) override;
    void on_arrival(int node, double time, bool blocked) override;

    std::vector<CcaRecord> ccas;
    std::vector<FrameRecord> frames;
    std::vector<CycleRecord> cycles;
    std::vector<TransmissionRecord> transmissions;
    std::uint64_t arrivals = 0;
    std::uint64_t blocked = 0;

    // Run context, filled in by run_queue_mode.
    double horizon = 0;
    double t_cca = 0;
    double t_tr = 0;
    double e_cca = 0;
    double p_backoff = 0;
    double e_tr = 0;
    MacScheme scheme = MacScheme::cca;
    int n_nodes = 0;
};

struct QueueRun {
    double horizon = 0;
    int max_queue = 0;
    int max_ccas_per_frame = 0;
    std::size_t exclusivity_violations = 0;
    std::size_t simultaneous_collisions = 0;  // winners of CCAs that ended together
    double max_conservation_error = 0;        // |ledger total - horizon|, worst node
    std::vector<std::array<double, kPowerStateCount>> ledger_durations;
    std::uint64_t events = 0;
};

/// SCM has no sensing and is rejected with std::invalid_argument.
QueueRun run_queue_mode(const ProtocolConfig& config, QueueObserver& observer);

/// Convenience: runs and fills `log` (including its run context).
QueueRun run_queue_mode(const ProtocolConfig& config, QueueLog& log);

}  // namespace wurlab
