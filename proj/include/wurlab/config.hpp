#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wurlab {

enum class MacScheme { scm, cca, csma_ca, adp };

/// Canonical upper-case name ("SCM", "CCA", "CSMA_CA", "ADP").
std::string_view scheme_name(MacScheme scheme);
/// Lower-case CLI spelling ("scm", "cca", "csma_ca", "adp").
std::string_view scheme_slug(MacScheme scheme);
/// Accepts either spelling, case-insensitive; also "csma-ca".
std::optional<MacScheme> parse_scheme(std::string_view text);

struct RadioParams {
    double voltage = 3.0;              // V
    double mr_tx_current = 17.4e-3;    // A
    double mr_rx_current = 18.8e-3;
    double mr_idle_current = 20e-6;
    double wurx_rx_current = 8e-6;
    double wurx_tx_current = 152e-3;
    double backoff_current = 5.16e-3;
    double mcu_current = 2.7e-3;
    double data_rate = 250000.0;       // bit/s

    bool operator==(const RadioParams&) const = default;
};

/// Frame sizes in bytes.
struct FrameSizes {
    std::int64_t data_payload = 35;
    std::int64_t jreq = 20;
    std::int64_t ack = 11;
    std::int64_t wuc = 4;
    std::int64_t tdma_assign = 11;
    std::int64_t mac_header = 0;
    std::int64_t security_overhead = 0;

    bool operator==(const FrameSizes&) const = default;
};

struct MacParams {
    MacScheme scheme = MacScheme::cca;
    int ma = 7;                     // attempts are indexed 0..ma
    int cw = 32;                    // slots per contention window
    double slot_duration = 320e-6;  // s
    int adp_threshold = 5;
    int mac_min_be = 3;             // stored, not used by any model

    bool operator==(const MacParams&) const = default;
};

struct TrafficParams {
    int n_nodes = 50;
    double lambda = 10.0;  // frames/s
    int delta_min = 1;
    int delta_max = 5;

    double mean_delta() const { return 0.5 * (delta_min + delta_max); }

    bool operator==(const TrafficParams&) const = default;
};

struct LinkParams {
    double uav_distance = 100.0;        // m
    double propagation_speed = 3e8;     // m/s
    double rx_processing_time = 0.0;    // s
    double wuc_duration = 12.2e-3;
    double cca_duration = 1.92e-3;
    double mode_switch_time = 1.79e-3;

    bool operator==(const LinkParams&) const = default;
};

struct SimParams {
    double horizon = 2000.0;        // queue mode, virtual seconds
    int rounds = 1000;              // round mode
    double warmup_fraction = 0.1;
    int batches = 20;
    double setup_timeout = 0.0;     // round mode; 0 selects the automatic worst-case bound

    bool operator==(const SimParams&) const = default;
};

struct EnergyParams {
    /// Count the wait for the node's own TDMA slot at idle power (otherwise at sleep power).
    bool include_tdma_idle = false;

    bool operator==(const EnergyParams&) const = default;
};

struct ProtocolConfig {
    RadioParams radio;
    FrameSizes frames;
    MacParams mac;
    TrafficParams traffic;
    LinkParams link;
    SimParams sim;
    EnergyParams energy;
    std::uint64_t seed = 1;

    bool operator==(const ProtocolConfig&) const = default;
};

/// Invariant violation; `field()` holds the dotted key of the offending value.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Malformed config text; `line()` is 1-based.
class ConfigParseError : public std::runtime_error {
public:
    ConfigParseError(int line, const std::string& what);
    int line() const noexcept { return line_; }

private:
    int line_;
};

ProtocolConfig default_paper_config();

/// Throws ConfigError naming the first offending field.
void validate(const ProtocolConfig& config);

/// Per-event durations in seconds.
struct TimingTable {
    double t_wuc = 0;
    double t_mst = 0;
    double t_cca = 0;
    double t_jreq = 0;
    double t_ack = 0;
    double t_tdma = 0;
    double t_t = 0;     // one data frame
    double t_g = 0;     // guard
    double t_oh = 0;    // header + security overhead
    double t_tr_mean = 0;

    double t_data(double delta) const { return delta * t_t + t_g + t_oh; }
    double t_tr(double delta) const {
        return t_wuc + t_mst + t_jreq + t_tdma + t_data(delta) + t_ack + t_mst;
    }
};

enum class PowerState { wuc_listen, mode_switch, tx, rx, cca, backoff, idle, sleep };
inline constexpr int kPowerStateCount = 8;
std::string_view power_state_name(PowerState state);

/// Per-state power draw in watts.
struct PowerTable {
    double p_wuc_listen = 0;
    double p_mode_switch = 0;
    double p_tx = 0;
    double p_rx = 0;
    double p_cca = 0;
    double p_backoff = 0;
    double p_idle = 0;
    double p_sleep = 0;

    double of(PowerState state) const;
};

TimingTable derive_timing(const ProtocolConfig& config);
PowerTable derive_power(const ProtocolConfig& config);

/// Parses `key = value` lines with dotted keys; missing keys keep their defaults.
ProtocolConfig load_config(std::string_view text);
ProtocolConfig load_config_file(const std::string& path);
/// Emits every key; load_config(save_config(c)) == c.
std::string save_config(const ProtocolConfig& config);

/// Applies `WURLAB_<KEY>` overrides, where KEY is the dotted key upper-cased with
/// '.' replaced by '_' (e.g. WURLAB_TRAFFIC_N_NODES). `getenv` defaults to std::getenv.
ProtocolConfig apply_env_overrides(
    ProtocolConfig config,
    const std::function<std::optional<std::string>(const std::string&)>& getenv = {});

/// Sets one dotted key from its textual value (quotes optional for strings).
void set_config_value(ProtocolConfig& config, std::string_view key, std::string_view value);

/// FNV-1a digest of save_config(config).
std::uint64_t config_digest(const ProtocolConfig& config);

}  // namespace wurlab
