#pragma once

#include <cstdint>
#include <queue>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

// Discrete-event core: virtual clock, (time, sequence)-ordered event queue and
// seeded random substreams. Everything here is single-threaded per run.

namespace wurlab {

enum class EventKind {
    frame_arrival,
    wuc_delivered,
    mst_done,
    backoff_expired,
    cca_complete,
    tx_start,
    tx_end,
    tdma_assigned,
    slot_start,
    ack_delivered,
    round_end,
    timeout,
};

std::string_view event_kind_name(EventKind kind);

inline constexpr int kUavActor = -1;
inline constexpr int kChannelActor = -2;

struct Event {
    double time = 0;
    std::uint64_t sequence = 0;  // assigned by EventQueue::schedule
    int actor = kUavActor;       // node id, kUavActor or kChannelActor
    EventKind kind = EventKind::timeout;
    std::int64_t payload = 0;    // kind-specific detail
    std::uint64_t token = 0;     // lets an actor discard events it has cancelled
};

class EngineError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class TieBreak {
    insertion,  // equal times pop in scheduling order
    shuffled,   // equal times pop in a seeded pseudo-random order
};

class EventQueue {
public:
    explicit EventQueue(TieBreak tie_break = TieBreak::insertion, std::uint64_t salt = 0);

    /// Returns the assigned sequence number. Throws EngineError if `event.time` is
    /// earlier than now().
    std::uint64_t schedule(Event event);
    Event pop();

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    double now() const { return now_; }
    const Event& top() const { return heap_.top().event; }

private:
    struct Entry {
        Event event;
        std::uint64_t key;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.event.time != b.event.time) return a.event.time > b.event.time;
            return a.key > b.key;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    double now_ = 0.0;
    std::uint64_t next_sequence_ = 0;
    TieBreak tie_break_;
    std::uint64_t salt_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// One deterministic random substream: mt19937_64 seeded through SplitMix64.
class RandomStream {
public:
    RandomStream() : RandomStream(0, 0) {}
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_id);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

/// Inverse transform -ln(1-u)/rate: u = 0 maps to 0, u -> 1 diverges.
double exponential_from_uniform(double u, double rate);

double draw_exponential(RandomStream& stream, double rate);

/// Unbiased integer on [lo, hi] by rejection; lo == hi consumes no randomness.
std::int64_t draw_uniform_int(RandomStream& stream, std::int64_t lo, std::int64_t hi);

/// One substream per node plus one environment stream, all derived from a master seed.
class RandomStreams {
public:
    RandomStreams(std::uint64_t master_seed, int node_count);

    RandomStream& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
    RandomStream& environment() { return environment_; }
    std::uint64_t master_seed() const { return master_seed_; }

private:
    std::uint64_t master_seed_;
    std::vector<RandomStream> nodes_;
    RandomStream environment_;
};

/// Derives an independent seed for a labelled sub-experiment (e.g. a sweep point).
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace wurlab
