#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wurlab/analytic.hpp"
#include "wurlab/config.hpp"
#include "wurlab/simulate.hpp"

namespace wurlab {

/// Point estimate with a 95% batch-means half-width.
struct Estimate {
    double value = 0;
    double ci = 0;
    std::size_t observations = 0;
};

struct QueueStats {
    MacScheme scheme = MacScheme::cca;
    int n_nodes = 0;
    Estimate alpha;             // busy CCA verdicts / all CCA verdicts
    Estimate alpha_time;        // fraction of time a CCA started then would read busy
    Estimate p_loss;            // discarded frames / completed services
    Estimate hol_delay;         // s
    Estimate frames_per_cycle;  // busy-cycle length in frames
    Estimate d_a;               // s, HoL delay plus exchange time when delivered
    Estimate e_r;               // J, contention energy plus exchange energy when delivered
    std::size_t ccas = 0;
    std::size_t frames = 0;
    std::size_t cycles = 0;
    int batches = 0;
    bool low_data = false;
    double window_start = 0;
    double window_end = 0;
};

/// Run constants the queue estimators need besides the raw records.
struct QueueContext {
    MacScheme scheme = MacScheme::cca;
    int n_nodes = 0;
    double horizon = 0;
    double t_cca = 0;
    double t_tr = 0;
    double e_cca = 0;
    double p_backoff = 0;
    double e_tr = 0;
    double warmup_fraction = 0.1;
    int batches = 20;
};

QueueContext make_queue_context(const ProtocolConfig& config);

/// Streaming queue-mode estimator; observations before the warm-up cut are ignored.
class QueueStatsAccumulator : public QueueObserver {
public:
    explicit QueueStatsAccumulator(const QueueContext& context);

    void on_cca(int node, double start, double end, bool busy) override;
    void on_frame(const FrameRecord& frame) override;
    void on_cycle(const CycleRecord& cycle) override;
    void on_transmission(int node, double start, double end) override;
    void on_arrival(int node, double time, bool blocked) override;

    QueueStats finish();

private:
    struct Batch {
        double ccas = 0, busy = 0;
        double frames = 0, lost = 0, hol = 0, d_a = 0, e_r = 0;
        double cycles = 0, cycle_frames = 0;
        double busy_time = 0;
    };
    int batch_of(double time) const;
    void add_busy_time(double lo, double hi);

    QueueContext ctx_;
    double start_;
    double width_;
    std::vector<Batch> bins_;
    double open_lo_ = 0;
    double open_hi_ = -1;
    bool finished_ = false;
};

/// Thrown when a log cannot support an estimate at all (e.g. batches < 2).
class EstimationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

QueueStats estimate_queue_stats(const QueueLog& log, double warmup_fraction, int batches = 20);

/// Runs queue mode with the streaming estimator (no per-event storage).
QueueStats simulate_queue_stats(const ProtocolConfig& config, QueueRun* run = nullptr);

struct RoundStats {
    MacScheme scheme = MacScheme::cca;
    int n_nodes = 0;
    std::optional<Estimate> success_rate;    // clustered / (clustered + dropped); absent if no participant
    Estimate mean_delay;                     // s, over participants
    Estimate mean_energy;                    // J, over participants
    Estimate cluster_size;                   // nodes per round
    std::optional<Estimate> collision_rate;  // collided / sent JReqs
    std::optional<Estimate> alpha;           // busy / all CCAs in the setup phase
    std::size_t rounds = 0;
    std::size_t participants = 0;
};

RoundStats estimate_round_stats(const std::vector<RoundTrace>& rounds, MacScheme scheme, int n_nodes,
                                int batches = 20);

struct Tolerances {
    double alpha = 0.05;     // absolute
    double p_loss = 0.05;    // absolute
    double d_a = 0.15;       // relative
    double e_r = 0.15;       // relative
    double gamma = 0.07;     // absolute, SCM against the round-mode collision rate
};

struct MetricCheck {
    std::string metric;
    double analytic = 0;
    double simulated = 0;
    double delta = 0;      // simulated - analytic
    double abs_delta = 0;
    double rel_delta = 0;  // abs_delta / |analytic|
    double tolerance = 0;
    bool relative = false;
    double ci = 0;         // simulated side
    bool pass = false;
};

struct ComparisonReport {
    MacScheme scheme = MacScheme::cca;
    int n_nodes = 0;
    SchemeMetrics analytic;
    std::optional<QueueStats> queue;
    std::optional<RoundStats> round;
    std::vector<MetricCheck> checks;
    std::vector<std::string> warnings;
    bool pass = false;

    const MetricCheck* find(const std::string& metric) const;
};

class ComparisonError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Tracks alpha, P_Loss, D_A and E_R against queue mode for contention schemes and
/// gamma against the round-mode collision rate for SCM. Throws ComparisonError if the
/// inputs describe different (scheme, N) points or no tracked metric is available.
ComparisonReport compare(const SchemeMetrics& analytic, const std::optional<QueueStats>& queue,
                         const std::optional<RoundStats>& round, const Tolerances& tolerances = {});

/// JSON text of one report or of a list of reports (a JSON array).
std::string report_json(const ComparisonReport& report, int indent = 2);
std::string reports_json(const std::vector<ComparisonReport>& reports, int indent = 2);

}  // namespace wurlab
