#include "wurlab/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "wurlab/numfmt.hpp"

namespace wurlab {

std::string_view scheme_name(MacScheme scheme) {
    switch (scheme) {
        case MacScheme::scm: return "SCM";
        case MacScheme::cca: return "CCA";
        case MacScheme::csma_ca: return "CSMA_CA";
        case MacScheme::adp: return "ADP";
    }
    return "?";
}

std::string_view scheme_slug(MacScheme scheme) {
    switch (scheme) {
        case MacScheme::scm: return "scm";
        case MacScheme::cca: return "cca";
        case MacScheme::csma_ca: return "csma_ca";
        case MacScheme::adp: return "adp";
    }
    return "?";
}

std::optional<MacScheme> parse_scheme(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
        return c == '-' ? '_' : static_cast<char>(std::tolower(c));
    });
    if (s == "scm") return MacScheme::scm;
    if (s == "cca") return MacScheme::cca;
    if (s == "csma_ca" || s == "csmaca" || s == "csma") return MacScheme::csma_ca;
    if (s == "adp") return MacScheme::adp;
    return std::nullopt;
}

std::string_view power_state_name(PowerState state) {
    static constexpr std::array<std::string_view, kPowerStateCount> names{
        "wuc_listen", "mode_switch", "tx", "rx", "cca", "backoff", "idle", "sleep"};
    return names[static_cast<int>(state)];
}

double PowerTable::of(PowerState state) const {
    switch (state) {
        case PowerState::wuc_listen: return p_wuc_listen;
        case PowerState::mode_switch: return p_mode_switch;
        case PowerState::tx: return p_tx;
        case PowerState::rx: return p_rx;
        case PowerState::cca: return p_cca;
        case PowerState::backoff: return p_backoff;
        case PowerState::idle: return p_idle;
        case PowerState::sleep: return p_sleep;
    }
    return 0.0;
}

ConfigError::ConfigError(std::string field, const std::string& what)
    : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

ConfigParseError::ConfigParseError(int line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

ProtocolConfig default_paper_config() { return ProtocolConfig{}; }

namespace {

void require(bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(field, what);
}

}  // namespace

void validate(const ProtocolConfig& c) {
    const auto& r = c.radio;
    require(r.voltage > 0, "radio.voltage", "must be > 0");
    require(r.mr_tx_current > 0, "radio.mr_tx_current", "must be > 0");
    require(r.mr_rx_current > 0, "radio.mr_rx_current", "must be > 0");
    require(r.mr_idle_current > 0, "radio.mr_idle_current", "must be > 0");
    require(r.wurx_rx_current > 0, "radio.wurx_rx_current", "must be > 0");
    require(r.wurx_tx_current > 0, "radio.wurx_tx_current", "must be > 0");
    require(r.backoff_current > 0, "radio.backoff_current", "must be > 0");
    require(r.mcu_current > 0, "radio.mcu_current", "must be > 0");
    require(r.data_rate > 0, "radio.data_rate", "must be > 0");

    const auto& f = c.frames;
    require(f.data_payload > 0, "frames.data_payload", "must be > 0");
    require(f.jreq > 0, "frames.jreq", "must be > 0");
    require(f.ack > 0, "frames.ack", "must be > 0");
    require(f.wuc > 0, "frames.wuc", "must be > 0");
    require(f.tdma_assign >= 0, "frames.tdma_assign", "must be >= 0");
    require(f.mac_header >= 0, "frames.mac_header", "must be >= 0");
    require(f.security_overhead >= 0, "frames.security_overhead", "must be >= 0");

    const auto& m = c.mac;
    require(m.ma >= 0, "mac.ma", "must be >= 0");
    // cw = 1 is the zero-backoff window under which CSMA-CA degenerates to CCA.
    require(m.cw >= 1, "mac.cw", "must be >= 1");
    require(m.slot_duration > 0, "mac.slot_duration", "must be > 0");
    require(m.adp_threshold >= 1 && m.adp_threshold <= m.ma + 1, "mac.adp_threshold",
            "must lie in [1, ma+1]");
    require(m.mac_min_be >= 0, "mac.mac_min_be", "must be >= 0");

    const auto& t = c.traffic;
    require(t.n_nodes >= 1, "traffic.n_nodes", "must be >= 1");
    require(t.lambda > 0 && std::isfinite(t.lambda), "traffic.lambda", "must be > 0");
    require(t.delta_min >= 1, "traffic.delta_min", "must be >= 1");
    require(t.delta_max >= t.delta_min, "traffic.delta_max", "must be >= delta_min");

    const auto& l = c.link;
    require(l.uav_distance > 0, "link.uav_distance", "must be > 0");
    require(l.propagation_speed > 0, "link.propagation_speed", "must be > 0");
    require(l.rx_processing_time >= 0, "link.rx_processing_time", "must be >= 0");
    require(l.wuc_duration > 0, "link.wuc_duration", "must be > 0");
    require(l.cca_duration > 0, "link.cca_duration", "must be > 0");
    require(l.mode_switch_time > 0, "link.mode_switch_time", "must be > 0");

    const auto& s = c.sim;
    require(s.horizon > 0, "sim.horizon", "must be > 0");
    require(s.rounds >= 1, "sim.rounds", "must be >= 1");
    require(s.warmup_fraction >= 0 && s.warmup_fraction <= 0.5, "sim.warmup_fraction",
            "must lie in [0, 0.5]");
    require(s.batches >= 2, "sim.batches", "must be >= 2");
    require(s.setup_timeout >= 0, "sim.setup_timeout", "must be >= 0");
}

TimingTable derive_timing(const ProtocolConfig& c) {
    if (!(c.radio.data_rate > 0)) throw ConfigError("radio.data_rate", "must be > 0");
    const double bit_time = 8.0 / c.radio.data_rate;
    TimingTable t;
    t.t_wuc = c.link.wuc_duration;
    t.t_mst = c.link.mode_switch_time;
    t.t_cca = c.link.cca_duration;
    t.t_jreq = static_cast<double>(c.frames.jreq) * bit_time;
    t.t_ack = static_cast<double>(c.frames.ack) * bit_time;
    t.t_tdma = static_cast<double>(c.frames.tdma_assign) * bit_time;
    t.t_t = static_cast<double>(c.frames.data_payload) * bit_time;
    t.t_g = c.link.uav_distance / c.link.propagation_speed + c.link.rx_processing_time;
    t.t_oh = static_cast<double>(c.frames.mac_header + c.frames.security_overhead) * bit_time;
    t.t_tr_mean = t.t_tr(c.traffic.mean_delta());
    return t;
}

PowerTable derive_power(const ProtocolConfig& c) {
    const auto& r = c.radio;
    const double v = r.voltage;
    PowerTable p;
    p.p_wuc_listen = r.wurx_rx_current * v;
    p.p_mode_switch = r.mcu_current * v;
    p.p_tx = r.mr_tx_current * v;
    p.p_rx = r.mr_rx_current * v;
    p.p_cca = r.mr_rx_current * v;  // carrier sensing is a receive operation
    p.p_backoff = r.backoff_current * v;
    p.p_idle = r.mr_idle_current * v;
    p.p_sleep = r.wurx_rx_current * v;
    return p;
}

// ---------------------------------------------------------------------------
// Key registry

namespace {

enum class ValueKind { real, integer, boolean, scheme, u64 };

struct KeySpec {
    std::string_view key;
    ValueKind kind;
    std::function<std::string(const ProtocolConfig&)> get;
    std::function<void(ProtocolConfig&, std::string_view)> set;
};

std::string unquote(std::string_view v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                          (v.front() == '\'' && v.back() == '\''))) {
        return std::string(v.substr(1, v.size() - 2));
    }
    return std::string(v);
}

double to_real(std::string_view v) {
    double out = 0;
    if (!parse_double(unquote(v), out)) throw std::invalid_argument("expected a number");
    return out;
}

long long to_integer(std::string_view v) {
    long long out = 0;
    if (!parse_int64(unquote(v), out)) throw std::invalid_argument("expected an integer");
    return out;
}

template <class T>
T to_narrow(std::string_view v) {
    const long long x = to_integer(v);
    if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max())
        throw std::invalid_argument("integer out of range");
    return static_cast<T>(x);
}

bool to_bool(std::string_view v) {
    const std::string s = unquote(v);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("expected true or false");
}

#define WURLAB_REAL(KEY, MEMBER)                                                     \
    KeySpec{KEY, ValueKind::real,                                           \
            [](const ProtocolConfig& c) { return format_double(c.MEMBER); },         \
            [](ProtocolConfig& c, std::string_view v) { c.MEMBER = to_real(v); }}
#define WURLAB_INT(KEY, MEMBER)                                                      \
    KeySpec{KEY, ValueKind::integer,                                        \
            [](const ProtocolConfig& c) { return std::to_string(c.MEMBER); },        \
            [](ProtocolConfig& c, std::string_view v) {                              \
                c.MEMBER = to_narrow<decltype(c.MEMBER)>(v);                         \
            }}

const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> keys = {
        WURLAB_REAL("radio.voltage", radio.voltage),
        WURLAB_REAL("radio.mr_tx_current", radio.mr_tx_current),
        WURLAB_REAL("radio.mr_rx_current", radio.mr_rx_current),
        WURLAB_REAL("radio.mr_idle_current", radio.mr_idle_current),
        WURLAB_REAL("radio.wurx_rx_current", radio.wurx_rx_current),
        WURLAB_REAL("radio.wurx_tx_current", radio.wurx_tx_current),
        WURLAB_REAL("radio.backoff_current", radio.backoff_current),
        WURLAB_REAL("radio.mcu_current", radio.mcu_current),
        WURLAB_REAL("radio.data_rate", radio.data_rate),
        WURLAB_INT("frames.data_payload", frames.data_payload),
        WURLAB_INT("frames.jreq", frames.jreq),
        WURLAB_INT("frames.ack", frames.ack),
        WURLAB_INT("frames.wuc", frames.wuc),
        WURLAB_INT("frames.tdma_assign", frames.tdma_assign),
        WURLAB_INT("frames.mac_header", frames.mac_header),
        WURLAB_INT("frames.security_overhead", frames.security_overhead),
        KeySpec{"mac.scheme", ValueKind::scheme,
                [](const ProtocolConfig& c) {
                    return "\"" + std::string(scheme_name(c.mac.scheme)) + "\"";
                },
                [](ProtocolConfig& c, std::string_view v) {
                    auto s = parse_scheme(unquote(v));
                    if (!s) throw std::invalid_argument("expected SCM, CCA, CSMA_CA or ADP");
                    c.mac.scheme = *s;
                }},
        WURLAB_INT("mac.ma", mac.ma),
        WURLAB_INT("mac.cw", mac.cw),
        WURLAB_REAL("mac.slot_duration", mac.slot_duration),
        WURLAB_INT("mac.adp_threshold", mac.adp_threshold),
        WURLAB_INT("mac.mac_min_be", mac.mac_min_be),
        WURLAB_INT("traffic.n_nodes", traffic.n_nodes),
        WURLAB_REAL("traffic.lambda", traffic.lambda),
        WURLAB_INT("traffic.delta_min", traffic.delta_min),
        WURLAB_INT("traffic.delta_max", traffic.delta_max),
        WURLAB_REAL("link.uav_distance", link.uav_distance),
        WURLAB_REAL("link.propagation_speed", link.propagation_speed),
        WURLAB_REAL("link.rx_processing_time", link.rx_processing_time),
        WURLAB_REAL("link.wuc_duration", link.wuc_duration),
        WURLAB_REAL("link.cca_duration", link.cca_duration),
        WURLAB_REAL("link.mode_switch_time", link.mode_switch_time),
        WURLAB_REAL("sim.horizon", sim.horizon),
        WURLAB_INT("sim.rounds", sim.rounds),
        WURLAB_REAL("sim.warmup_fraction", sim.warmup_fraction),
        WURLAB_INT("sim.batches", sim.batches),
        WURLAB_REAL("sim.setup_timeout", sim.setup_timeout),
        KeySpec{"energy.include_tdma_idle", ValueKind::boolean,
                [](const ProtocolConfig& c) {
                    return std::string(c.energy.include_tdma_idle ? "true" : "false");
                },
                [](ProtocolConfig& c, std::string_view v) {
                    c.energy.include_tdma_idle = to_bool(v);
                }},
        KeySpec{"seed", ValueKind::u64,
                [](const ProtocolConfig& c) { return std::to_string(c.seed); },
                [](ProtocolConfig& c, std::string_view v) {
                    const std::string s = unquote(v);
                    std::uint64_t out = 0;
                    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
                    if (ec != std::errc{} || p != s.data() + s.size())
                        throw std::invalid_argument("expected an unsigned 64-bit integer");
                    c.seed = out;
                }},
    };
    return keys;
}

#undef WURLAB_REAL
#undef WURLAB_INT

const KeySpec* find_key(std::string_view key) {
    for (const auto& k : registry())
        if (k.key == key) return &k;
    return nullptr;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string_view strip_comment(std::string_view line) {
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

std::string env_name(std::string_view key) {
    std::string out = "WURLAB_";
    for (char ch : key)
        out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

}  // namespace

void set_config_value(ProtocolConfig& config, std::string_view key, std::string_view value) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError(std::string(key), "unknown key");
    try {
        spec->set(config, trim(value));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(key), e.what());
    }
}

ProtocolConfig load_config(std::string_view text) {
    ProtocolConfig config = default_paper_config();
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        line = trim(strip_comment(line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigParseError(line_no, "expected 'key = value', got '" + std::string(line) + "'");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigParseError(line_no, "missing key");
        if (value.empty()) throw ConfigParseError(line_no, "missing value for '" + std::string(key) + "'");
        const KeySpec* spec = find_key(key);
        if (!spec) throw ConfigParseError(line_no, "unknown key '" + std::string(key) + "'");
        try {
            spec->set(config, value);
        } catch (const std::invalid_argument& e) {
            throw ConfigParseError(line_no, std::string(key) + ": " + e.what());
        }
    }
    validate(config);
    return config;
}

ProtocolConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_config(ss.str());
}

std::string save_config(const ProtocolConfig& config) {
    std::string out;
    for (const auto& k : registry()) {
        out += k.key;
        out += " = ";
        out += k.get(config);
        out += '\n';
    }
    return out;
}

ProtocolConfig apply_env_overrides(
    ProtocolConfig config,
    const std::function<std::optional<std::string>(const std::string&)>& getenv) {
    for (const auto& k : registry()) {
        const std::string name = env_name(k.key);
        std::optional<std::string> value;
        if (getenv) {
            value = getenv(name);
        } else if (const char* raw = std::getenv(name.c_str())) {
            value = std::string(raw);
        }
        if (value) set_config_value(config, k.key, *value);
    }
    validate(config);
    return config;
}

std::uint64_t config_digest(const ProtocolConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : save_config(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace wurlab
