#include "wurlab/engine.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace wurlab {

std::string_view event_kind_name(EventKind kind) {
    static constexpr std::array<std::string_view, 12> names{
        "FrameArrival", "WucDelivered", "MstDone",  "BackoffExpired", "CcaComplete", "TxStart",
        "TxEnd",        "TdmaAssigned", "SlotStart", "AckDelivered",  "RoundEnd",    "Timeout"};
    return names[static_cast<std::size_t>(kind)];
}

EventQueue::EventQueue(TieBreak tie_break, std::uint64_t salt) : tie_break_(tie_break), salt_(salt) {}

std::uint64_t EventQueue::schedule(Event event) {
    if (!(event.time >= now_)) {
        throw EngineError("event " + std::string(event_kind_name(event.kind)) + " scheduled at " +
                          std::to_string(event.time) + " before clock " + std::to_string(now_));
    }
    event.sequence = next_sequence_++;
    const std::uint64_t key =
        tie_break_ == TieBreak::insertion ? event.sequence : splitmix64(event.sequence ^ salt_);
    heap_.push(Entry{event, key});
    return event.sequence;
}

Event EventQueue::pop() {
    if (heap_.empty()) throw EngineError("pop from empty event queue");
    Event e = heap_.top().event;
    heap_.pop();
    now_ = e.time;
    return e;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : engine_(splitmix64(splitmix64(master_seed) ^ splitmix64(stream_id + 0x5851f42d4c957f2dULL))) {}

double exponential_from_uniform(double u, double rate) { return -std::log1p(-u) / rate; }

double draw_exponential(RandomStream& stream, double rate) {
    return exponential_from_uniform(stream.uniform01(), rate);
}

std::int64_t draw_uniform_int(RandomStream& stream, std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(stream.next_u64());  // full 64-bit span
    const std::uint64_t threshold = (0 - range) % range;
    std::uint64_t x = stream.next_u64();
    while (x < threshold) x = stream.next_u64();
    return lo + static_cast<std::int64_t>(x % range);
}

RandomStreams::RandomStreams(std::uint64_t master_seed, int node_count)
    : master_seed_(master_seed),
      environment_(master_seed, std::numeric_limits<std::uint64_t>::max()) {
    nodes_.reserve(static_cast<std::size_t>(node_count));
    for (int i = 0; i < node_count; ++i) nodes_.emplace_back(master_seed, static_cast<std::uint64_t>(i));
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return splitmix64(h ^ c);
}

}  // namespace wurlab
