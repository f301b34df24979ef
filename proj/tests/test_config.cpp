#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <string>

#include "wurlab/config.hpp"
#include "wurlab/numfmt.hpp"

using namespace wurlab;
using doctest::Approx;

TEST_CASE("defaults carry the reference parameter table") {
    const auto c = default_paper_config();
    CHECK(c.radio.voltage == 3.0);
    CHECK(c.radio.data_rate == 250000.0);
    CHECK(c.frames.data_payload == 35);
    CHECK(c.frames.jreq == 20);
    CHECK(c.frames.ack == 11);
    CHECK(c.frames.tdma_assign == 11);
    CHECK(c.mac.ma == 7);
    CHECK(c.mac.cw == 32);
    CHECK(c.mac.slot_duration == 320e-6);
    CHECK(c.mac.adp_threshold == 5);
    CHECK(c.traffic.n_nodes == 50);
    CHECK(c.traffic.lambda == 10.0);
    CHECK(c.traffic.mean_delta() == 3.0);
    CHECK(c.link.cca_duration == 1.92e-3);
    CHECK(c.link.mode_switch_time == 1.79e-3);
    CHECK(c.link.wuc_duration == 12.2e-3);
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("derived frame times at 250 kbit/s") {
    const auto t = derive_timing(default_paper_config());
    CHECK(t.t_jreq == Approx(0.64e-3).epsilon(1e-12));
    CHECK(t.t_ack == Approx(0.352e-3).epsilon(1e-12));
    CHECK(t.t_tdma == Approx(0.352e-3).epsilon(1e-12));
    CHECK(t.t_t == Approx(1.12e-3).epsilon(1e-12));
    CHECK(t.t_g == Approx(100.0 / 3e8).epsilon(1e-12));
    CHECK(t.t_oh == 0.0);
    // 12.2 + 2*1.79 + 0.64 + 0.352 + 3*1.12 + 100/3e8*1e3 + 0.352 ms
    CHECK(t.t_tr(3) == Approx(20.484333333e-3).epsilon(1e-9));
    CHECK(t.t_tr_mean == t.t_tr(3));
    CHECK(t.t_data(1) == Approx(1.12e-3 + 100.0 / 3e8).epsilon(1e-12));
}

TEST_CASE("derived power draws") {
    const auto p = derive_power(default_paper_config());
    CHECK(p.p_tx == Approx(52.2e-3));
    CHECK(p.p_rx == Approx(56.4e-3));
    CHECK(p.p_cca == Approx(56.4e-3));
    CHECK(p.p_backoff == Approx(15.48e-3));
    CHECK(p.p_mode_switch == Approx(8.1e-3));
    CHECK(p.p_idle == Approx(60e-6));
    CHECK(p.p_sleep == Approx(24e-6));
    CHECK(p.p_wuc_listen == Approx(24e-6));
    CHECK(p.of(PowerState::tx) == p.p_tx);
    CHECK(p.of(PowerState::sleep) == p.p_sleep);
}

TEST_CASE("zero data rate is rejected by timing derivation") {
    auto c = default_paper_config();
    c.radio.data_rate = 0;
    CHECK_THROWS_AS(derive_timing(c), ConfigError);
}

TEST_CASE("validation names the offending field") {
    auto check_field = [](auto mutate, const std::string& field) {
        auto c = default_paper_config();
        mutate(c);
        try {
            validate(c);
            FAIL("expected ConfigError for " << field);
        } catch (const ConfigError& e) {
            CHECK(e.field() == field);
        }
    };
    check_field([](ProtocolConfig& c) { c.traffic.n_nodes = 0; }, "traffic.n_nodes");
    check_field([](ProtocolConfig& c) { c.traffic.lambda = -1; }, "traffic.lambda");
    check_field([](ProtocolConfig& c) { c.mac.cw = 0; }, "mac.cw");
    check_field([](ProtocolConfig& c) { c.mac.ma = -1; }, "mac.ma");
    check_field([](ProtocolConfig& c) { c.mac.adp_threshold = 9; }, "mac.adp_threshold");
    check_field([](ProtocolConfig& c) { c.traffic.delta_max = 0; }, "traffic.delta_max");
    check_field([](ProtocolConfig& c) { c.sim.batches = 1; }, "sim.batches");

    auto c = default_paper_config();
    c.mac.cw = 1;
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("save and load round-trip every field") {
    auto c = default_paper_config();
    c.mac.scheme = MacScheme::adp;
    c.traffic.n_nodes = 17;
    c.traffic.lambda = 0.1 + 0.2;  // not exactly representable as a short decimal
    c.seed = 18446744073709551615ULL;
    c.energy.include_tdma_idle = true;
    c.sim.setup_timeout = 0.25;
    const auto text = save_config(c);
    const auto back = load_config(text);
    CHECK(back == c);
    CHECK(config_digest(back) == config_digest(c));
}

TEST_CASE("parser: comments, blanks, quotes and defaults") {
    const auto c = load_config(
        "# header comment\n"
        "\n"
        "mac.scheme = \"csma_ca\"   # trailing comment\n"
        "traffic.n_nodes=12\n"
        "  traffic.lambda =  2.5  \n");
    CHECK(c.mac.scheme == MacScheme::csma_ca);
    CHECK(c.traffic.n_nodes == 12);
    CHECK(c.traffic.lambda == 2.5);
    CHECK(c.mac.cw == 32);
}

TEST_CASE("parser errors report the line") {
    auto line_of = [](const std::string& text) {
        try {
            load_config(text);
        } catch (const ConfigParseError& e) {
            return e.line();
        }
        return -1;
    };
    CHECK(line_of("mac.cw = 4\nnonsense\n") == 2);
    CHECK(line_of("no.such.key = 1\n") == 1);
    CHECK(line_of("\n\nmac.cw = abc\n") == 3);
    CHECK(line_of("mac.cw =\n") == 1);
    CHECK(line_of("mac.scheme = \"tdma\"\n") == 1);
}

TEST_CASE("loaded configs are validated") {
    CHECK_THROWS_AS(load_config("traffic.n_nodes = 0\n"), ConfigError);
}

TEST_CASE("environment overrides use the WURLAB_ prefix") {
    std::map<std::string, std::string> env{{"WURLAB_TRAFFIC_N_NODES", "7"},
                                           {"WURLAB_MAC_SCHEME", "scm"},
                                           {"WURLAB_SEED", "99"}};
    auto getenv = [&](const std::string& name) -> std::optional<std::string> {
        auto it = env.find(name);
        if (it == env.end()) return std::nullopt;
        return it->second;
    };
    const auto c = apply_env_overrides(default_paper_config(), getenv);
    CHECK(c.traffic.n_nodes == 7);
    CHECK(c.mac.scheme == MacScheme::scm);
    CHECK(c.seed == 99);
    CHECK(c.mac.cw == 32);

    env["WURLAB_MAC_CW"] = "zero";
    CHECK_THROWS(apply_env_overrides(default_paper_config(), getenv));
}

TEST_CASE("set_config_value rejects unknown keys") {
    auto c = default_paper_config();
    set_config_value(c, "mac.ma", "3");
    CHECK(c.mac.ma == 3);
    CHECK_THROWS(set_config_value(c, "mac.nope", "3"));
}

TEST_CASE("scheme names") {
    for (auto s : {MacScheme::scm, MacScheme::cca, MacScheme::csma_ca, MacScheme::adp}) {
        CHECK(parse_scheme(scheme_slug(s)) == s);
        CHECK_FALSE(scheme_name(s).empty());
    }
    CHECK_FALSE(parse_scheme("aloha").has_value());
}

TEST_CASE("number formatting round-trips") {
    for (double x : {0.0, 1.0, 0.1, 1.0 / 3.0, 20.484333333333332e-3, 1e-300, 6.02214076e23, -2.5}) {
        double back = 0;
        REQUIRE(parse_double(format_double(x), back));
        CHECK(back == x);
    }
    double v = 0;
    CHECK_FALSE(parse_double("1.5x", v));
    CHECK_FALSE(parse_double("", v));
    long long i = 0;
    CHECK(parse_int64("+42", i));
    CHECK(i == 42);
    CHECK_FALSE(parse_int64("4.2", i));
}
