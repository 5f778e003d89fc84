#include "mslink/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mslink/error.hpp"

namespace mslink {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + s + "'");
    }
    if (trim(s.substr(used)) != "") {
        throw ConfigError("expected a number, got '" + s + "'");
    }
    return v;
}

std::uint64_t to_uint(const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    if (s.empty() || s[0] == '-') {
        throw ConfigError("expected a non-negative integer, got '" + s + "'");
    }
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("expected a non-negative integer, got '" + s + "'");
    }
    if (trim(s.substr(used)) != "") {
        throw ConfigError("expected a non-negative integer, got '" + s + "'");
    }
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
        return false;
    }
    throw ConfigError("expected a boolean, got '" + s + "'");
}

// "(re,im)", "(re)" or "re", as read by operator>> for std::complex.
CVec to_complex_list(const std::string& s) {
    std::istringstream in(s);
    CVec out;
    cplx c;
    while (in >> std::ws && !in.eof()) {
        if (!(in >> c)) {
            throw ConfigError("expected complex values like (1,0) (0.2,-0.1), got '" + s + "'");
        }
        out.push_back(c);
    }
    if (out.empty()) {
        throw ConfigError("expected at least one complex value");
    }
    return out;
}

std::array<double, 4> to_four(const std::string& s) {
    const auto v = parse_double_list(s);
    if (v.size() != 4) {
        throw ConfigError("expected four comma-separated values, got '" + s + "'");
    }
    return {v[0], v[1], v[2], v[3]};
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"mode", [](auto& c, const auto& v) { c.mode = parse_mode(v); }},
        {"constellation",
         [](auto& c, const auto& v) {
             if (v == "auto") {
                 c.constellation_from_mode = true;
                 return;
             }
             if (v != "ideal" && v != "lut") {
                 throw ConfigError("constellation must be auto, ideal or lut");
             }
             c.constellation_from_mode = false;
             c.constellation = v == "ideal" ? ConstellationSource::Ideal : ConstellationSource::Lut;
         }},
        {"frequency_hz", [](auto& c, const auto& v) { c.frequency_hz = to_double(v); }},
        {"r_series", [](auto& c, const auto& v) { c.circuit.r_series = to_double(v); }},
        {"l_top", [](auto& c, const auto& v) { c.circuit.l_top = to_double(v); }},
        {"l_bottom", [](auto& c, const auto& v) { c.circuit.l_bottom = to_double(v); }},
        {"z_air", [](auto& c, const auto& v) { c.circuit.z_air = to_double(v); }},
        {"c_zero", [](auto& c, const auto& v) { c.varactor.c_zero = to_double(v); }},
        {"v_junction", [](auto& c, const auto& v) { c.varactor.v_junction = to_double(v); }},
        {"exponent", [](auto& c, const auto& v) { c.varactor.exponent = to_double(v); }},
        {"c_min", [](auto& c, const auto& v) { c.varactor.c_min = to_double(v); }},
        {"v_min", [](auto& c, const auto& v) { c.v_min = to_double(v); }},
        {"v_max", [](auto& c, const auto& v) { c.v_max = to_double(v); }},
        {"v_step", [](auto& c, const auto& v) { c.v_step = to_double(v); }},
        {"phase_targets", [](auto& c, const auto& v) { c.phase_targets = to_four(v); }},
        {"control_voltages",
         [](auto& c, const auto& v) {
             c.control_voltages = to_four(v);
             c.have_control_voltages = true;
         }},
        {"amplitude_equalization", [](auto& c, const auto& v) { c.amplitude_equalization = to_double(v); }},
        {"rows", [](auto& c, const auto& v) { c.rows = static_cast<int>(to_uint(v)); }},
        {"cols", [](auto& c, const auto& v) { c.cols = static_cast<int>(to_uint(v)); }},
        {"mask", [](auto& c, const auto& v) { c.mask = v; }},
        {"hold_voltage", [](auto& c, const auto& v) { c.hold_voltage = to_double(v); }},
        {"gamma_static",
         [](auto& c, const auto& v) {
             const auto g = to_complex_list(v);
             if (g.size() != 1) {
                 throw ConfigError("gamma_static takes one complex value");
             }
             c.gamma_static = g[0];
             c.have_gamma_static = true;
         }},
        {"snr_db", [](auto& c, const auto& v) { c.snr_db = parse_double_list(v); }},
        {"snr_axis",
         [](auto& c, const auto& v) {
             if (v == "ebn0") {
                 c.snr_axis = SnrAxis::EbN0;
             } else if (v == "esn0") {
                 c.snr_axis = SnrAxis::EsN0;
             } else {
                 throw ConfigError("snr_axis must be ebn0 or esn0");
             }
         }},
        {"frames_per_point", [](auto& c, const auto& v) { c.frames_per_point = to_uint(v); }},
        {"base_seed", [](auto& c, const auto& v) { c.base_seed = to_uint(v); }},
        {"sps", [](auto& c, const auto& v) { c.sps = static_cast<int>(to_uint(v)); }},
        {"pilot_seed", [](auto& c, const auto& v) { c.pilot_seed = to_uint(v); }},
        {"target_ber", [](auto& c, const auto& v) { c.target_ber = to_double(v); }},
        {"threads", [](auto& c, const auto& v) { c.threads = static_cast<unsigned>(to_uint(v)); }},
        {"cfo_normalized", [](auto& c, const auto& v) { c.cfo_normalized = to_double(v); }},
        {"timing_offset", [](auto& c, const auto& v) { c.timing_offset = to_uint(v); }},
        {"complex_gain",
         [](auto& c, const auto& v) {
             const auto g = to_complex_list(v);
             if (g.size() != 1) {
                 throw ConfigError("complex_gain takes one complex value");
             }
             c.complex_gain = g[0];
         }},
        {"fir_taps", [](auto& c, const auto& v) { c.fir_taps = to_complex_list(v); }},
        {"sync_threshold", [](auto& c, const auto& v) { c.receiver.sync_threshold = to_double(v); }},
        {"denoise_channel", [](auto& c, const auto& v) { c.receiver.denoise_channel = to_bool(v); }},
        {"tap_threshold", [](auto& c, const auto& v) { c.receiver.tap_threshold = to_double(v); }},
        {"refine_cfo", [](auto& c, const auto& v) { c.receiver.refine_cfo = to_bool(v); }},
        {"track_phase", [](auto& c, const auto& v) { c.receiver.track_phase = to_bool(v); }},
    };
    return table;
}

} // namespace

Mode parse_mode(const std::string& s) {
    if (s == "conventional") {
        return Mode::Conventional;
    }
    if (s == "metasurface") {
        return Mode::Metasurface;
    }
    throw ConfigError("mode must be conventional or metasurface, got '" + s + "'");
}

std::string to_string(Mode m) { return m == Mode::Conventional ? "conventional" : "metasurface"; }

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            throw ConfigError("empty entry in list '" + s + "'");
        }
        out.push_back(to_double(item));
    }
    return out;
}

int ExperimentConfig::effective_sps() const {
    if (sps > 0) {
        return sps;
    }
    return mode == Mode::Conventional ? 1 : 8;
}

ConstellationSource ExperimentConfig::effective_constellation() const {
    if (!constellation_from_mode) {
        return constellation;
    }
    return mode == Mode::Conventional ? ConstellationSource::Ideal : ConstellationSource::Lut;
}

void ExperimentConfig::validate() const {
    if (snr_db.empty()) {
        throw ConfigError("snr_db list must not be empty");
    }
    for (double s : snr_db) {
        if (std::isnan(s) || s == -std::numeric_limits<double>::infinity()) {
            throw ConfigError("snr_db entries must be finite or +inf");
        }
    }
    if (frames_per_point < 1) {
        throw ConfigError("frames_per_point must be >= 1");
    }
    if (!(amplitude_equalization >= 0.0 && amplitude_equalization <= 1.0)) {
        throw ConfigError("amplitude_equalization must lie in [0, 1]");
    }
    if (!(target_ber > 0.0 && target_ber < 0.5)) {
        throw ConfigError("target_ber must lie in (0, 0.5)");
    }
    if (rows <= 0 || cols <= 0) {
        throw ConfigError("rows and cols must be positive");
    }
    if (!(std::abs(cfo_normalized) < 0.5)) {
        throw ConfigError("cfo_normalized must satisfy |eps| < 0.5");
    }
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    it->second(cfg, value);
}

ExperimentConfig parse_config(std::istream& is, ExperimentConfig base) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            set_config_value(base, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    base.validate();
    return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file '" + path + "'");
    }
    try {
        return parse_config(in, std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

} // namespace mslink
