#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include <json.hpp>

#include "wurlab/metrics.hpp"

using namespace wurlab;
using doctest::Approx;

namespace {

QueueLog synthetic_log(int total, int busy_every_ten) {
    QueueLog log;
    log.horizon = 100.0;
    log.t_cca = 1e-3;
    log.scheme = MacScheme::cca;
    log.n_nodes = 4;
    for (int i = 0; i < total; ++i) {
        const double t = 10.5 + 89.0 * i / total;
        log.ccas.push_back({i % 4, t - log.t_cca, t, (i % 10) < busy_every_ten});
    }
    return log;
}

SchemeMetrics analytic_point(MacScheme scheme = MacScheme::cca, int n = 10) {
    SchemeMetrics m;
    m.scheme = scheme;
    m.n_nodes = n;
    m.alpha = 0.5;
    m.p_loss = 0.1;
    m.d_a = 0.02;
    m.e_r = 5e-4;
    m.solution.converged = true;
    return m;
}

QueueStats matching_queue(const SchemeMetrics& a) {
    QueueStats q;
    q.scheme = a.scheme;
    q.n_nodes = a.n_nodes;
    q.alpha.value = *a.alpha;
    q.p_loss.value = a.p_loss;
    q.d_a.value = a.d_a;
    q.e_r.value = a.e_r;
    return q;
}

}  // namespace

TEST_CASE("alpha is the busy fraction of CCA verdicts") {
    const auto s = estimate_queue_stats(synthetic_log(1000, 3), 0.1, 10);
    CHECK(s.alpha.value == Approx(0.30));
    CHECK(s.alpha.observations == 1000);
    CHECK(s.ccas == 1000);
    CHECK(s.alpha.ci < 0.05);
}

TEST_CASE("observations inside the warm-up are discarded") {
    auto log = synthetic_log(1000, 3);
    for (int i = 0; i < 500; ++i) log.ccas.push_back({0, 1.0, 1.0 + log.t_cca, true});
    const auto s = estimate_queue_stats(log, 0.1, 10);
    CHECK(s.alpha.value == Approx(0.30));
}

TEST_CASE("time-weighted busy fraction merges overlapping transmissions") {
    QueueLog log;
    log.horizon = 100;
    log.t_cca = 1.0;
    log.transmissions = {{0, 20, 30}, {1, 25, 35}, {2, 60, 65}};
    const auto s = estimate_queue_stats(log, 0.0, 2);
    // (19, 35) and (59, 65) are the busy windows for a CCA start.
    CHECK(s.alpha_time.value == Approx(22.0 / 100.0));
}

TEST_CASE("estimator preconditions") {
    CHECK_THROWS_AS(estimate_queue_stats(synthetic_log(10, 3), 0.1, 1), EstimationError);
    auto log = synthetic_log(10, 3);
    CHECK_THROWS_AS(estimate_queue_stats(log, 1.0, 10), EstimationError);
    CHECK(estimate_queue_stats(log, 0.1, 10).low_data);
    CHECK_THROWS_AS(estimate_round_stats({}, MacScheme::cca, 1), EstimationError);
}

TEST_CASE("a lone node gives alpha exactly zero") {
    auto c = default_paper_config();
    c.traffic.n_nodes = 1;
    c.sim.horizon = 300;
    const auto s = simulate_queue_stats(c);
    CHECK(s.alpha.value == 0.0);
    CHECK(s.alpha.ci == 0.0);
    CHECK(s.alpha.observations > 1000);
}

TEST_CASE("round statistics: success rate is absent without participants") {
    RoundTrace r;
    r.nodes.resize(3);
    for (auto& n : r.nodes) n.outcome = NodeOutcome::queue_empty;
    const auto s = estimate_round_stats({r, r}, MacScheme::cca, 3);
    CHECK_FALSE(s.success_rate);
    CHECK_FALSE(s.collision_rate);
    CHECK_FALSE(s.alpha);
    CHECK(s.participants == 0);
}

TEST_CASE("round statistics: rates over participants") {
    RoundTrace r;
    r.nodes.resize(4);
    r.nodes[0].outcome = NodeOutcome::clustered;
    r.nodes[0].jreq_sent = true;
    r.nodes[0].delay = 0.02;
    r.nodes[0].ccas = 2;
    r.nodes[0].busy_ccas = 1;
    r.nodes[1].outcome = NodeOutcome::dropped;
    r.nodes[1].jreq_sent = true;
    r.nodes[1].jreq_collided = true;
    r.nodes[1].delay = 0.01;
    r.nodes[1].ccas = 2;
    r.nodes[1].busy_ccas = 1;
    r.nodes[2].outcome = NodeOutcome::dropped;
    r.nodes[2].delay = 0.03;
    r.nodes[2].ccas = 8;
    r.nodes[2].busy_ccas = 8;
    r.cluster_size = 1;
    const auto s = estimate_round_stats({r}, MacScheme::cca, 4);
    REQUIRE(s.success_rate);
    CHECK(s.success_rate->value == Approx(1.0 / 3.0));
    REQUIRE(s.collision_rate);
    CHECK(s.collision_rate->value == Approx(0.5));
    REQUIRE(s.alpha);
    CHECK(s.alpha->value == Approx(10.0 / 12.0));
    CHECK(s.mean_delay.value == Approx(0.02));
    CHECK(s.cluster_size.value == 1.0);
}

TEST_CASE("comparison thresholds") {
    const auto a = analytic_point();
    SUBCASE("an alpha gap of 0.06 fails alpha alone") {
        auto q = matching_queue(a);
        q.alpha.value += 0.06;
        const auto r = compare(a, q, std::nullopt);
        CHECK_FALSE(r.pass);
        CHECK_FALSE(r.find("alpha")->pass);
        CHECK(r.find("alpha")->abs_delta == Approx(0.06));
        CHECK(r.find("p_loss")->pass);
        CHECK(r.find("d_a")->pass);
        CHECK(r.find("e_r")->pass);
    }
    SUBCASE("the check is symmetric in sign") {
        auto lo = matching_queue(a);
        lo.alpha.value -= 0.06;
        CHECK_FALSE(compare(a, lo, std::nullopt).find("alpha")->pass);
        auto near = matching_queue(a);
        near.alpha.value -= 0.04;
        CHECK(compare(a, near, std::nullopt).pass);
    }
    SUBCASE("relative metrics use the relative gap") {
        auto q = matching_queue(a);
        q.d_a.value = a.d_a * 1.14;
        q.e_r.value = a.e_r * 0.84;
        const auto r = compare(a, q, std::nullopt);
        CHECK(r.find("d_a")->pass);
        CHECK(r.find("d_a")->relative);
        CHECK_FALSE(r.find("e_r")->pass);
    }
    SUBCASE("mismatched points are rejected") {
        auto q = matching_queue(a);
        q.n_nodes = 11;
        CHECK_THROWS_AS(compare(a, q, std::nullopt), ComparisonError);
        auto s = matching_queue(a);
        s.scheme = MacScheme::adp;
        CHECK_THROWS_AS(compare(a, s, std::nullopt), ComparisonError);
        CHECK_THROWS_AS(compare(a, std::nullopt, std::nullopt), ComparisonError);
    }
    SUBCASE("SCM is judged on the JReq collision rate") {
        auto s = analytic_point(MacScheme::scm, 2);
        s.alpha.reset();
        s.gamma = 0.31;
        RoundStats rs;
        rs.scheme = MacScheme::scm;
        rs.n_nodes = 2;
        rs.collision_rate = Estimate{0.36, 0.01, 1000};
        const auto r = compare(s, std::nullopt, rs);
        REQUIRE(r.checks.size() == 1);
        CHECK(r.checks[0].metric == "gamma");
        CHECK(r.pass);
        rs.collision_rate->value = 0.39;
        CHECK_FALSE(compare(s, std::nullopt, rs).pass);
    }
}

TEST_CASE("confidence intervals shrink with the square root of the horizon") {
    auto mean_ci = [](double horizon) {
        double sum = 0;
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            auto c = default_paper_config();
            c.traffic.n_nodes = 20;
            c.sim.horizon = horizon;
            c.seed = seed;
            sum += simulate_queue_stats(c).alpha.ci;
        }
        return sum / 4;
    };
    const double ratio = mean_ci(800) / mean_ci(400);
    CHECK(ratio == Approx(1 / std::sqrt(2.0)).epsilon(0.3));
}

TEST_CASE("reports serialise to valid JSON") {
    auto a = analytic_point();
    a.e_d_hol = std::numeric_limits<double>::quiet_NaN();
    auto q = matching_queue(a);
    q.alpha.value += 0.1;
    const auto r = compare(a, q, std::nullopt);
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["scheme"] == "cca");
    CHECK(j["n"] == 10);
    CHECK(j["analytic"]["e_d_hol_s"].is_null());
    CHECK(j["analytic"]["gamma"].is_null());
    CHECK(j["round_sim"].is_null());
    CHECK(j["checks"].size() == 4);
    CHECK(j["checks"][0]["metric"] == "alpha");
    CHECK(j["checks"][0]["pass"] == false);
    CHECK(j["pass"] == false);

    const auto arr = nlohmann::json::parse(reports_json({r, r}));
    CHECK(arr.is_array());
    CHECK(arr.size() == 2);
}
