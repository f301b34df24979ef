#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "wurlab/numfmt.hpp"
#include "wurlab/sweep.hpp"

using namespace wurlab;

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) rows.push_back(split_line(line));
    return rows;
}

}  // namespace

TEST_CASE("N lists and ranges") {
    CHECK(parse_n_values("5..8") == std::vector<int>{5, 6, 7, 8});
    CHECK(parse_n_values("5..20:5") == std::vector<int>{5, 10, 15, 20});
    CHECK(parse_n_values("2, 10,50") == std::vector<int>{2, 10, 50});
    CHECK(parse_n_values("7") == std::vector<int>{7});
    CHECK_THROWS_AS(parse_n_values(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_n_values(","), std::invalid_argument);
    CHECK_THROWS_AS(parse_n_values("9..3"), std::invalid_argument);
    CHECK_THROWS_AS(parse_n_values("0"), std::invalid_argument);
    CHECK_THROWS_AS(parse_n_values("x..4"), std::invalid_argument);
}

TEST_CASE("scheme and engine lists") {
    CHECK(parse_schemes("all").size() == 4);
    CHECK(parse_schemes("cca,adp") == std::vector<MacScheme>{MacScheme::cca, MacScheme::adp});
    CHECK_THROWS_AS(parse_schemes(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_schemes("cca,aloha"), std::invalid_argument);
    CHECK(parse_engines("analytic,round_sim") == std::vector<Engine>{Engine::analytic, Engine::round_sim});
    CHECK_THROWS_AS(parse_engines("monte_carlo"), std::invalid_argument);
}

TEST_CASE("empty sweep specs are usage errors") {
    SweepSpec spec;
    spec.schemes.clear();
    CHECK_THROWS_AS(run_sweep(default_paper_config(), spec), std::invalid_argument);
    SweepSpec no_engines;
    no_engines.engines.clear();
    CHECK_THROWS_AS(run_sweep(default_paper_config(), no_engines), std::invalid_argument);
}

TEST_CASE("default analytic sweep of one scheme covers N = 5..100") {
    SweepSpec spec;
    spec.schemes = {MacScheme::cca};
    const auto rows = run_sweep(default_paper_config(), spec);
    REQUIRE(rows.size() == 96);
    CHECK(rows.front().n == 5);
    CHECK(rows.back().n == 100);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].alpha);
        CHECK(*rows[i].alpha >= *rows[i - 1].alpha);
        CHECK(rows[i].p_loss >= rows[i - 1].p_loss);
    }
    const auto csv = parse_csv(sweep_csv(rows));
    REQUIRE(csv.size() == 97);
    CHECK(csv[0].size() == 12);
    for (std::size_t i = 1; i < csv.size(); ++i) CHECK(csv[i].size() == 12);
}

TEST_CASE("rows are sorted and the CSV round-trips exactly") {
    SweepSpec spec;
    spec.schemes = {MacScheme::adp, MacScheme::scm, MacScheme::cca};
    spec.n_values = {10, 3, 10};
    spec.engines = {Engine::round_sim, Engine::queue_sim, Engine::analytic};
    spec.horizon = 20.0;
    spec.rounds = 40;
    spec.jobs = 3;
    const auto rows = run_sweep(default_paper_config(), spec);
    // SCM has no queue-mode row.
    REQUIRE(rows.size() == 3 * 2 * 3 - 2);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& a = rows[i - 1];
        const auto& b = rows[i];
        CHECK(std::tie(a.scheme, a.n, a.engine) < std::tie(b.scheme, b.n, b.engine));
    }
    for (const auto& r : rows)
        if (r.scheme == MacScheme::scm) CHECK(r.engine != Engine::queue_sim);

    const auto text = sweep_csv(rows);
    const auto csv = parse_csv(text);
    CHECK(text.substr(0, kSweepCsvHeader.size()) == kSweepCsvHeader);
    REQUIRE(csv.size() == rows.size() + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& cells = csv[i + 1];
        REQUIRE(cells.size() == 12);
        CHECK(cells[0] == scheme_slug(rows[i].scheme));
        CHECK(cells[1] == std::to_string(rows[i].n));
        CHECK(cells[2] == engine_name(rows[i].engine));
        double v = 0;
        REQUIRE(parse_double(cells[6], v));
        CHECK(v == rows[i].d_a);
        REQUIRE(parse_double(cells[7], v));
        CHECK(v == rows[i].e_r);
        CHECK(cells[3].empty() == !rows[i].alpha);
        CHECK(cells[4].empty() == !rows[i].gamma);
        if (rows[i].alpha) {
            REQUIRE(parse_double(cells[3], v));
            CHECK(v == *rows[i].alpha);
        }
    }
}

TEST_CASE("sweep output does not depend on the worker count") {
    SweepSpec spec;
    spec.schemes = {MacScheme::csma_ca, MacScheme::scm};
    spec.n_values = {4, 12};
    spec.engines = {Engine::analytic, Engine::queue_sim, Engine::round_sim};
    spec.horizon = 15.0;
    spec.rounds = 30;
    spec.seed = 21;
    spec.jobs = 1;
    const auto serial = sweep_csv(run_sweep(default_paper_config(), spec));
    spec.jobs = 4;
    CHECK(serial == sweep_csv(run_sweep(default_paper_config(), spec)));
    spec.seed = 22;
    CHECK(serial != sweep_csv(run_sweep(default_paper_config(), spec)));
}

TEST_CASE("point seeds differ across points and follow the sweep seed") {
    SweepSpec spec;
    const auto base = default_paper_config();
    const auto a = point_config(base, spec, MacScheme::cca, 5);
    CHECK(a.seed != point_config(base, spec, MacScheme::cca, 6).seed);
    CHECK(a.seed != point_config(base, spec, MacScheme::adp, 5).seed);
    spec.seed = 2;
    CHECK(a.seed != point_config(base, spec, MacScheme::cca, 5).seed);
}

TEST_CASE("validation pairs each point with its simulation engine") {
    SweepSpec spec;
    spec.schemes = {MacScheme::scm, MacScheme::cca};
    spec.n_values = {3};
    spec.horizon = 30.0;
    spec.rounds = 200;
    const auto reports = run_validation(default_paper_config(), spec);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].scheme == MacScheme::scm);
    CHECK(reports[0].round);
    CHECK_FALSE(reports[0].queue);
    CHECK(reports[1].queue);
    CHECK(reports[1].checks.size() == 4);

    // Scaling the analytic CCA time alone pushes the model away from the simulation.
    spec.schemes = {MacScheme::cca};
    spec.n_values = {50};
    const auto perturbed = run_validation(default_paper_config(), spec, {},
                                          [](ProtocolConfig& c) { c.link.cca_duration *= 1.5; });
    CHECK_FALSE(perturbed[0].pass);
}
