#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <sstream>
#include <string>

#include "wurlab/metrics.hpp"
#include "wurlab/simulate.hpp"

using namespace wurlab;
using doctest::Approx;

namespace {

ProtocolConfig round_config(MacScheme scheme, int n, int rounds, std::uint64_t seed = 3) {
    auto c = default_paper_config();
    c.mac.scheme = scheme;
    c.traffic.n_nodes = n;
    c.sim.rounds = rounds;
    c.seed = seed;
    return c;
}

std::string event_log(const ProtocolConfig& c, TieBreak tie = TieBreak::insertion) {
    std::ostringstream out;
    RoundOptions o;
    o.event_log = &out;
    o.tie_break = tie;
    run_round_mode(c, o);
    return out.str();
}

constexpr MacScheme kAllSchemes[] = {MacScheme::scm, MacScheme::cca, MacScheme::csma_ca, MacScheme::adp};

}  // namespace

TEST_CASE("round mode: structural invariants on every round") {
    for (auto scheme : kAllSchemes) {
        for (int n : {1, 2, 10, 40}) {
            const auto c = round_config(scheme, n, 150);
            const auto run = run_round_mode(c);
            CAPTURE(scheme_slug(scheme));
            CAPTURE(n);
            REQUIRE(run.rounds.size() == 150);
            CHECK(run.max_conservation_error < 1e-9);
            CHECK(run.exclusivity_violations == 0);
            CHECK(run.max_queue <= kQueueCapacity);
            CHECK(run.max_ccas_per_round <= c.mac.ma + 1);
            for (const auto& r : run.rounds) {
                CHECK(r.count(NodeOutcome::clustered) + r.count(NodeOutcome::dropped) +
                          r.count(NodeOutcome::queue_empty) ==
                      n);
                int frames = 0;
                for (const auto& node : r.nodes) {
                    if (node.outcome == NodeOutcome::clustered) {
                        frames += node.delta;
                        CHECK(node.jreq_sent);
                        CHECK_FALSE(node.jreq_collided);
                    }
                    if (node.outcome == NodeOutcome::queue_empty) CHECK_FALSE(node.jreq_sent);
                    CHECK(node.ccas <= c.mac.ma + 1);
                    if (scheme == MacScheme::scm) CHECK(node.ccas == 0);
                    CHECK(node.membership == Approx(r.duration).epsilon(1e-12));
                }
                CHECK(r.frames_delivered == frames);
                CHECK(r.cluster_size == r.count(NodeOutcome::clustered));
            }
        }
    }
}

TEST_CASE("round mode: each node sends at most one JReq per round") {
    const auto log = event_log(round_config(MacScheme::cca, 30, 60));
    std::istringstream in(log);
    std::string line;
    std::map<std::string, int> jreqs;
    int rounds_seen = 0;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string time, actor, kind, detail;
        std::getline(fields, time, '\t');
        std::getline(fields, actor, '\t');
        std::getline(fields, kind, '\t');
        std::getline(fields, detail, '\t');
        if (kind == "WucDelivered" && actor == "sn0") {
            ++rounds_seen;
            jreqs.clear();
        }
        if (kind == "TxStart" && detail == "0") CHECK(++jreqs[actor] == 1);
    }
    CHECK(rounds_seen == 60);
}

TEST_CASE("round mode: identical seeds give identical logs") {
    for (auto scheme : kAllSchemes) {
        const auto c = round_config(scheme, 20, 40, 77);
        const auto a = event_log(c);
        CHECK(a == event_log(c));
        CHECK(a != event_log(round_config(scheme, 20, 40, 78)));
    }
}

TEST_CASE("round mode: CSMA-CA with a one-slot window replays CCA event for event") {
    for (int n : {1, 5, 30}) {
        auto cca = round_config(MacScheme::cca, n, 80, 5);
        auto csma = round_config(MacScheme::csma_ca, n, 80, 5);
        csma.mac.cw = 1;
        CHECK(event_log(cca) == event_log(csma));
    }
}

TEST_CASE("round mode: equal-time tie order does not change the outcome") {
    for (auto scheme : kAllSchemes) {
        const auto c = round_config(scheme, 25, 60, 9);
        RoundOptions shuffled;
        shuffled.tie_break = TieBreak::shuffled;
        const auto a = run_round_mode(c);
        const auto b = run_round_mode(c, shuffled);
        REQUIRE(a.rounds.size() == b.rounds.size());
        for (std::size_t r = 0; r < a.rounds.size(); ++r) {
            CHECK(a.rounds[r].duration == b.rounds[r].duration);
            for (std::size_t i = 0; i < a.rounds[r].nodes.size(); ++i) {
                const auto& x = a.rounds[r].nodes[i];
                const auto& y = b.rounds[r].nodes[i];
                CHECK(x.outcome == y.outcome);
                CHECK(x.delay == y.delay);
                CHECK(x.energy == y.energy);
            }
        }
    }
}

TEST_CASE("round mode: a single node is always clustered") {
    for (auto scheme : kAllSchemes) {
        const auto run = run_round_mode(round_config(scheme, 1, 200));
        for (const auto& r : run.rounds) CHECK(r.count(NodeOutcome::dropped) == 0);
    }
}

TEST_CASE("round mode: SCM at N = 50 clusters almost nobody") {
    // Every node wakes on the same WuC, so without random backoff the JReqs all overlap.
    const auto run = run_round_mode(round_config(MacScheme::scm, 50, 100));
    const auto s = estimate_round_stats(run.rounds, MacScheme::scm, 50);
    CHECK(s.cluster_size.value < 1.0);
    REQUIRE(s.collision_rate);
    CHECK(s.collision_rate->value > 0.95);

    const auto csma = run_round_mode(round_config(MacScheme::csma_ca, 50, 100));
    const auto sc = estimate_round_stats(csma.rounds, MacScheme::csma_ca, 50);
    CHECK(sc.success_rate->value > s.success_rate->value);
}

TEST_CASE("round mode: the setup timeout aborts stragglers cleanly") {
    auto c = round_config(MacScheme::csma_ca, 30, 50);
    c.sim.setup_timeout = 5e-3;
    const auto run = run_round_mode(c);
    CHECK(run.setup_timeouts > 0);
    CHECK(run.max_conservation_error < 1e-9);
    for (const auto& r : run.rounds) CHECK(r.count(NodeOutcome::clustered) + r.count(NodeOutcome::dropped) + r.count(NodeOutcome::queue_empty) == 30);
}

TEST_CASE("queue mode: a lone node always senses idle") {
    auto c = default_paper_config();
    c.traffic.n_nodes = 1;
    c.sim.horizon = 200;
    QueueLog log;
    const auto run = run_queue_mode(c, log);
    REQUIRE_FALSE(log.ccas.empty());
    for (const auto& r : log.ccas) CHECK_FALSE(r.busy);
    CHECK(run.max_conservation_error < 1e-9);
    const auto s = estimate_queue_stats(log, 0.1);
    CHECK(s.alpha.value == 0.0);
    CHECK(s.alpha.ci == 0.0);
    CHECK(s.p_loss.value == 0.0);
}

TEST_CASE("queue mode: vanishing traffic leaves the channel idle") {
    auto c = default_paper_config();
    c.traffic.n_nodes = 50;
    c.traffic.lambda = 0.001;
    c.sim.horizon = 20000;
    const auto s = simulate_queue_stats(c);
    CHECK(s.alpha_time.value < 0.003);
    CHECK(s.alpha.value < 0.02);
}

TEST_CASE("queue mode: invariants under load") {
    for (auto scheme : {MacScheme::cca, MacScheme::csma_ca, MacScheme::adp}) {
        auto c = default_paper_config();
        c.mac.scheme = scheme;
        c.traffic.n_nodes = 30;
        c.sim.horizon = 100;
        QueueLog log;
        const auto run = run_queue_mode(c, log);
        CHECK(run.max_queue <= kQueueCapacity);
        CHECK(run.max_ccas_per_frame <= c.mac.ma + 1);
        CHECK(run.max_conservation_error < 1e-9);
        CHECK(run.exclusivity_violations == 0);
        for (const auto& f : log.frames) {
            CHECK(f.ccas <= c.mac.ma + 1);
            CHECK(f.hol_end >= f.hol_start);
            if (!f.delivered) CHECK(f.ccas == c.mac.ma + 1);
        }
        for (const auto& d : run.ledger_durations) {
            double sum = 0;
            for (double x : d) sum += x;
            CHECK(sum == Approx(c.sim.horizon).epsilon(1e-12));
        }
    }
}

TEST_CASE("queue mode: streaming and replayed estimators agree") {
    auto c = default_paper_config();
    c.traffic.n_nodes = 20;
    c.sim.horizon = 200;
    QueueLog log;
    run_queue_mode(c, log);
    const auto replay = estimate_queue_stats(log, c.sim.warmup_fraction, c.sim.batches);
    const auto stream = simulate_queue_stats(c);
    CHECK(replay.alpha.value == stream.alpha.value);
    CHECK(replay.p_loss.value == stream.p_loss.value);
    CHECK(replay.d_a.value == stream.d_a.value);
    CHECK(replay.alpha_time.value == Approx(stream.alpha_time.value).epsilon(1e-12));
}

TEST_CASE("queue mode rejects SCM") {
    auto c = default_paper_config();
    c.mac.scheme = MacScheme::scm;
    QueueLog log;
    CHECK_THROWS_AS(run_queue_mode(c, log), std::invalid_argument);
}
