#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "wurlab/config.hpp"

// M/G/1/2 contention model of a tagged node competing with N-1 others, and the
// per-scheme delay/energy metrics built on top of it. All functions are pure.

namespace wurlab {

/// Thrown for inputs outside an operation's domain (e.g. w_j for SCM).
class AnalyticError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Mean accumulated contention time until (and including) the j-th attempt, j >= 1.
double accumulated_duration(MacScheme scheme, int j, const MacParams& mac, const TimingTable& timing);

/// Mean backoff time included in accumulated_duration(scheme, j, ...).
double accumulated_backoff(MacScheme scheme, int j, const MacParams& mac);

/// Whether the attempt with 0-based index `attempt` is preceded by a backoff.
bool attempt_has_backoff(MacScheme scheme, int attempt, const MacParams& mac);

struct ServiceProfile {
    MacScheme scheme = MacScheme::cca;
    std::vector<double> w;        // w_1 .. w_{ma+1}
    std::vector<double> backoff;  // backoff share of each w_j
    double t_loss = 0;            // contention time of a discarded frame
    double e_cca = 0;             // one CCA
    double p_backoff = 0;         // W while counting down
    double e_loss = 0;            // contention energy of a discarded frame

    int ma() const { return static_cast<int>(w.size()) - 1; }
};

ServiceProfile make_service_profile(MacScheme scheme, const ProtocolConfig& config,
                                    const TimingTable& timing, const PowerTable& power);

double p_loss(double alpha, int ma);

/// E[D_HoL]: contention time of the head-of-line frame up to its last CCA.
double hol_delay(double alpha, const ServiceProfile& profile);

/// Probability that a frame leaves the head of line without meeting another queued frame.
double a0(double alpha, const ServiceProfile& profile, double lambda, double t_tr);

/// E[tau] = 1 / a0. Throws AnalyticError for a0 <= 0.
double expected_frames_served(double a0);

/// Right-hand side of the busy-probability fixed point, clamped to [0, 1 - 1e-12].
double alpha_map(double alpha, const ProtocolConfig& config, const TimingTable& timing,
                 const PowerTable& power);

/// alpha_map(alpha) - alpha.
double alpha_residual(double alpha, const ProtocolConfig& config, const TimingTable& timing,
                      const PowerTable& power);

struct SolverOptions {
    double tolerance = 1e-9;
    int max_iterations = 10000;
    double damping = 0.5;
    double upper = 1.0 - 1e-9;
    int scan_points = 1000;
};

enum class SolveMethod { trivial, fixed_point, bisection };

struct AlphaSolution {
    double alpha = 0;
    double residual = 0;
    int iterations = 0;
    bool converged = false;
    double bracket_low = 0;
    double bracket_high = 0;
    bool multiple_roots = false;  // residual changed sign more than once on the scan grid
    SolveMethod method = SolveMethod::trivial;
};

/// Smallest root of alpha_residual on [0, 1). Contention schemes only.
AlphaSolution solve_alpha(const ProtocolConfig& config, const TimingTable& timing,
                          const PowerTable& power, const SolverOptions& options = {});

/// JReq collision probability of the sensing-free baseline.
double scm_gamma(int n_nodes, double lambda, double t_tr);

/// Energy of one complete exchange (wake-up through final mode switch) carrying
/// `delta` data frames.
double exchange_energy(const TimingTable& timing, const PowerTable& power, double delta);

/// Average round delay. `alpha_or_gamma` is gamma for SCM, alpha otherwise.
double avg_delay(MacScheme scheme, double alpha_or_gamma, const ServiceProfile& profile,
                 const TimingTable& timing);

/// Average round energy. `e_delta` is the mean number of data frames.
double avg_energy(MacScheme scheme, double alpha_or_gamma, const ServiceProfile& profile,
                  const TimingTable& timing, const PowerTable& power, double e_delta);

struct SchemeMetrics {
    MacScheme scheme = MacScheme::cca;
    int n_nodes = 0;
    std::optional<double> alpha;  // contention schemes
    std::optional<double> gamma;  // SCM
    double p_loss = 0;            // gamma for SCM
    double e_d_hol = 0;
    double a0 = 1;
    double e_tau = 1;
    double d_a = 0;
    double e_r = 0;
    AlphaSolution solution;
};

/// Thrown by evaluate_scheme when the fixed point does not converge.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, AlphaSolution solution)
        : std::runtime_error(what), solution_(solution) {}
    const AlphaSolution& solution() const noexcept { return solution_; }

private:
    AlphaSolution solution_;
};

SchemeMetrics evaluate_scheme(const ProtocolConfig& config);

}  // namespace wurlab
