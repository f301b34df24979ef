#include "wurlab/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wurlab {

namespace {

double mean_backoff_stage(const MacParams& mac) {
    return (mac.cw - 1) / 2.0 * mac.slot_duration;
}

constexpr double kAlphaCeiling = 1.0 - 1e-12;

}  // namespace

bool attempt_has_backoff(MacScheme scheme, int attempt, const MacParams& mac) {
    switch (scheme) {
        case MacScheme::csma_ca: return true;
        // 1-based attempt j >= t_h carries a backoff stage.
        case MacScheme::adp: return attempt + 1 >= mac.adp_threshold;
        case MacScheme::scm:
        case MacScheme::cca: return false;
    }
    return false;
}

double accumulated_backoff(MacScheme scheme, int j, const MacParams& mac) {
    if (scheme == MacScheme::scm) throw AnalyticError("SCM has no contention stages");
    if (j < 1 || j > mac.ma + 1)
        throw AnalyticError("attempt index " + std::to_string(j) + " outside [1, ma+1]");
    int stages = 0;
    for (int attempt = 0; attempt < j; ++attempt)
        if (attempt_has_backoff(scheme, attempt, mac)) ++stages;
    return stages * mean_backoff_stage(mac);
}

double accumulated_duration(MacScheme scheme, int j, const MacParams& mac, const TimingTable& timing) {
    return accumulated_backoff(scheme, j, mac) + j * timing.t_cca;
}

ServiceProfile make_service_profile(MacScheme scheme, const ProtocolConfig& config,
                                    const TimingTable& timing, const PowerTable& power) {
    ServiceProfile profile;
    profile.scheme = scheme;
    profile.e_cca = timing.t_cca * power.p_cca;
    profile.p_backoff = power.p_backoff;
    if (scheme == MacScheme::scm) return profile;

    const int attempts = config.mac.ma + 1;
    profile.w.reserve(attempts);
    profile.backoff.reserve(attempts);
    for (int j = 1; j <= attempts; ++j) {
        profile.backoff.push_back(accumulated_backoff(scheme, j, config.mac));
        profile.w.push_back(accumulated_duration(scheme, j, config.mac, timing));
    }
    profile.t_loss = profile.w.back();
    profile.e_loss = profile.backoff.back() * profile.p_backoff + attempts * profile.e_cca;
    return profile;
}

double p_loss(double alpha, int ma) { return std::pow(alpha, ma + 1); }

double hol_delay(double alpha, const ServiceProfile& profile) {
    const int ma = profile.ma();
    double sum = 0.0;
    double alpha_pow = 1.0;
    for (int i = 0; i <= ma; ++i) {
        sum += alpha_pow * (1.0 - alpha) * profile.w[i];
        alpha_pow *= alpha;
    }
    return sum + alpha_pow * profile.w[ma];
}

double a0(double alpha, const ServiceProfile& profile, double lambda, double t_tr) {
    const int ma = profile.ma();
    double sum = 0.0;
    double alpha_pow = 1.0;
    for (int i = 0; i <= ma; ++i) {
        sum += alpha_pow * (1.0 - alpha) * std::exp(-(profile.w[i] + t_tr) * lambda);
        alpha_pow *= alpha;
    }
    return sum + alpha_pow;
}

double expected_frames_served(double a0_value) {
    if (!(a0_value > 0.0)) throw AnalyticError("a0 must be positive");
    return 1.0 / a0_value;
}

double alpha_map(double alpha, const ProtocolConfig& config, const TimingTable& timing,
                 const PowerTable& power) {
    const int others = config.traffic.n_nodes - 1;
    if (others <= 0) return 0.0;
    const auto profile = make_service_profile(config.mac.scheme, config, timing, power);
    const double lambda = config.traffic.lambda;
    const double t_tr = timing.t_tr_mean;

    const double loss = p_loss(alpha, config.mac.ma);
    const double e_tau = expected_frames_served(a0(alpha, profile, lambda, t_tr));
    const double busy = others * (1.0 - loss) * e_tau * (timing.t_cca + t_tr);
    const double cycle = 1.0 / lambda + e_tau * hol_delay(alpha, profile);
    return std::clamp(busy / cycle, 0.0, kAlphaCeiling);
}

double alpha_residual(double alpha, const ProtocolConfig& config, const TimingTable& timing,
                      const PowerTable& power) {
    return alpha_map(alpha, config, timing, power) - alpha;
}

AlphaSolution solve_alpha(const ProtocolConfig& config, const TimingTable& timing,
                          const PowerTable& power, const SolverOptions& options) {
    if (config.mac.scheme == MacScheme::scm)
        throw AnalyticError("SCM is characterised by gamma, not a busy-probability fixed point");

    auto residual = [&](double a) { return alpha_residual(a, config, timing, power); };
    AlphaSolution sol;

    if (config.traffic.n_nodes == 1) {
        sol.converged = true;
        sol.method = SolveMethod::trivial;
        return sol;
    }

    // Locate the first sign change and count all of them.
    const int points = std::max(options.scan_points, 2);
    int sign_changes = 0;
    bool have_bracket = false;
    double prev_x = 0.0;
    double prev_r = residual(0.0);
    if (prev_r == 0.0) {
        sol.converged = true;
        sol.method = SolveMethod::trivial;
        return sol;
    }
    for (int k = 1; k <= points; ++k) {
        const double x = options.upper * k / points;
        const double r = residual(x);
        if ((prev_r > 0) != (r > 0)) {
            ++sign_changes;
            if (!have_bracket) {
                have_bracket = true;
                sol.bracket_low = prev_x;
                sol.bracket_high = x;
            }
        }
        prev_x = x;
        prev_r = r;
    }
    sol.multiple_roots = sign_changes > 1;
    if (!have_bracket) {
        sol.bracket_low = prev_x;
        sol.bracket_high = 1.0;
        sol.alpha = options.upper;
        sol.residual = prev_r;
        return sol;
    }

    // Damped fixed-point iteration from the lower edge of the first bracket.
    const double eta = options.damping;
    double a = sol.bracket_low;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        const double r = residual(a);
        if (std::abs(r) < options.tolerance) break;
        a = std::clamp(a + eta * r, 0.0, options.upper);
    }
    sol.iterations = it;
    const double slack = 1e-12;
    if (it < options.max_iterations && a >= sol.bracket_low - slack &&
        a <= sol.bracket_high + slack) {
        sol.alpha = a;
        sol.residual = residual(a);
        sol.converged = true;
        sol.method = SolveMethod::fixed_point;
        return sol;
    }

    // Bisection on the bracket: residual(lo) > 0 > residual(hi).
    sol.method = SolveMethod::bisection;
    double lo = sol.bracket_low;
    double hi = sol.bracket_high;
    double r_lo = residual(lo);
    while (sol.iterations < 2 * options.max_iterations) {
        ++sol.iterations;
        const double mid = 0.5 * (lo + hi);
        const double r_mid = residual(mid);
        if (std::abs(r_mid) < options.tolerance) {
            sol.alpha = mid;
            sol.residual = r_mid;
            sol.converged = true;
            return sol;
        }
        if (mid <= lo || mid >= hi) {  // interval exhausted at double resolution
            sol.alpha = mid;
            sol.residual = r_mid;
            return sol;
        }
        if ((r_mid > 0) == (r_lo > 0)) {
            lo = mid;
            r_lo = r_mid;
        } else {
            hi = mid;
        }
    }
    sol.alpha = 0.5 * (lo + hi);
    sol.residual = residual(sol.alpha);
    return sol;
}

double scm_gamma(int n_nodes, double lambda, double t_tr) {
    const double exponent = (n_nodes - 1) * lambda * t_tr * (1.0 + std::exp(-t_tr * lambda));
    return 1.0 - std::exp(-exponent);
}

double exchange_energy(const TimingTable& t, const PowerTable& p, double delta) {
    const double e_wuc = t.t_wuc * p.p_wuc_listen;
    const double e_mst = t.t_mst * p.p_mode_switch;
    const double e_jreq = t.t_jreq * p.p_tx;
    const double e_tdma = t.t_tdma * p.p_rx;
    const double e_data = t.t_t * p.p_tx;
    const double e_ack = t.t_ack * p.p_rx;
    return e_wuc + e_mst + e_jreq + e_tdma + delta * e_data + e_ack + e_mst;
}

double avg_delay(MacScheme scheme, double x, const ServiceProfile& profile, const TimingTable& timing) {
    const double t_tr = timing.t_tr_mean;
    if (scheme == MacScheme::scm) return x * (t_tr - timing.t_ack) + (1.0 - x) * t_tr;

    const double loss = p_loss(x, profile.ma());
    if (loss >= 1.0) return profile.t_loss;
    const double t_tq = (hol_delay(x, profile) - loss * profile.t_loss) / (1.0 - loss) + t_tr;
    return (1.0 - loss) * t_tq + loss * profile.t_loss;
}

double avg_energy(MacScheme scheme, double x, const ServiceProfile& profile, const TimingTable& timing,
                  const PowerTable& power, double e_delta) {
    const double e_tr = exchange_energy(timing, power, e_delta);
    if (scheme == MacScheme::scm) {
        const double e_ack = timing.t_ack * power.p_rx;
        return x * (e_tr - e_ack) + (1.0 - x) * e_tr;
    }

    const int ma = profile.ma();
    const double loss = p_loss(x, ma);
    if (loss >= 1.0) return profile.e_loss;

    // Energy counterpart of E[D_HoL]: expected backoff + CCA energy up to the stopping attempt.
    double e_hol = 0.0;
    double alpha_pow = 1.0;
    for (int i = 0; i <= ma; ++i) {
        const double contention = profile.backoff[i] * profile.p_backoff + (i + 1) * profile.e_cca;
        e_hol += alpha_pow * (1.0 - x) * contention;
        alpha_pow *= x;
    }
    e_hol += alpha_pow * profile.e_loss;

    const double e_tq = (e_hol - loss * profile.e_loss) / (1.0 - loss) + e_tr;
    return (1.0 - loss) * e_tq + loss * profile.e_loss;
}

SchemeMetrics evaluate_scheme(const ProtocolConfig& config) {
    const TimingTable timing = derive_timing(config);
    const PowerTable power = derive_power(config);
    const MacScheme scheme = config.mac.scheme;
    const double e_delta = config.traffic.mean_delta();
    const auto profile = make_service_profile(scheme, config, timing, power);

    SchemeMetrics m;
    m.scheme = scheme;
    m.n_nodes = config.traffic.n_nodes;
    double x = 0.0;
    if (scheme == MacScheme::scm) {
        x = scm_gamma(config.traffic.n_nodes, config.traffic.lambda, timing.t_tr_mean);
        m.gamma = x;
        m.p_loss = x;
        m.solution.converged = true;
    } else {
        m.solution = solve_alpha(config, timing, power);
        if (!m.solution.converged) {
            throw SolverError("busy-probability fixed point did not converge (bracket [" +
                                  std::to_string(m.solution.bracket_low) + ", " +
                                  std::to_string(m.solution.bracket_high) + "])",
                              m.solution);
        }
        x = m.solution.alpha;
        m.alpha = x;
        m.p_loss = p_loss(x, config.mac.ma);
        m.e_d_hol = hol_delay(x, profile);
        m.a0 = a0(x, profile, config.traffic.lambda, timing.t_tr_mean);
        m.e_tau = expected_frames_served(m.a0);
    }
    m.d_a = avg_delay(scheme, x, profile, timing);
    m.e_r = avg_energy(scheme, x, profile, timing, power, e_delta);

    if (config.energy.include_tdma_idle) {
        // Idle wait for the slots of the clustered nodes scheduled ahead of the tagged node.
        const double served = 1.0 - m.p_loss;
        const double ahead = (config.traffic.n_nodes - 1) * served / 2.0;
        const double wait = ahead * (timing.t_data(e_delta) + timing.t_ack);
        m.e_r += served * wait * power.p_idle;
    }
    return m;
}

}  // namespace wurlab
