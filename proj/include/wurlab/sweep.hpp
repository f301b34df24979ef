#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wurlab/config.hpp"
#include "wurlab/metrics.hpp"

namespace wurlab {

enum class Engine { analytic, queue_sim, round_sim };

std::string_view engine_name(Engine engine);
Engine parse_engine(std::string_view text);

struct SweepSpec {
    std::vector<MacScheme> schemes{MacScheme::scm, MacScheme::cca, MacScheme::csma_ca, MacScheme::adp};
    std::vector<int> n_values;  // empty means 5..100
    std::vector<Engine> engines{Engine::analytic};
    std::uint64_t seed = 1;
    std::optional<double> horizon;
    std::optional<int> rounds;
    int jobs = 1;
};

/// Throws std::invalid_argument for an empty scheme, N or engine list.
void validate_sweep(const SweepSpec& spec);

/// "5..100", "5..100:5" (step) or a comma list such as "2,10,50".
std::vector<int> parse_n_values(std::string_view text);
std::vector<MacScheme> parse_schemes(std::string_view text);
std::vector<Engine> parse_engines(std::string_view text);

struct SweepRow {
    MacScheme scheme = MacScheme::cca;
    int n = 0;
    Engine engine = Engine::analytic;
    std::optional<double> alpha;
    std::optional<double> gamma;
    double p_loss = 0;
    double d_a = 0;
    double e_r = 0;
    std::optional<double> ci_alpha;
    std::optional<double> ci_p_loss;
    std::optional<double> ci_d_a;
    std::optional<double> ci_e_r;
};

/// Config for one sweep point: `base` with the scheme, N and a point-specific seed.
ProtocolConfig point_config(const ProtocolConfig& base, const SweepSpec& spec, MacScheme scheme, int n);

/// Rows are sorted by (scheme, N, engine) whatever the completion order. Queue mode is
/// skipped for SCM, which never senses the channel. Solver failures propagate as SolverError.
std::vector<SweepRow> run_sweep(const ProtocolConfig& base, const SweepSpec& spec,
                                const std::function<void(const std::string&)>& progress = {});

inline constexpr std::string_view kSweepCsvHeader =
    "scheme,n,engine,alpha,gamma,p_loss,d_a_s,e_r_j,ci_alpha,ci_p_loss,ci_d_a,ci_e_r";

std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Analytic side plus the simulation that validates it, for every (scheme, N) point.
/// `analytic_override` lets callers perturb the analytic config only (fault injection).
std::vector<ComparisonReport> run_validation(
    const ProtocolConfig& base, const SweepSpec& spec, const Tolerances& tolerances = {},
    const std::function<void(ProtocolConfig&)>& analytic_override = {},
    const std::function<void(const std::string&)>& progress = {});

}  // namespace wurlab
