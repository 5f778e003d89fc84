#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mslink/array.hpp"
#include "mslink/channel.hpp"
#include "mslink/circuit.hpp"
#include "mslink/rx.hpp"
#include "mslink/tx.hpp"

namespace mslink {

enum class Mode { Conventional, Metasurface };
enum class ConstellationSource { Ideal, Lut };
enum class SnrAxis { EbN0, EsN0 };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

/// Everything one BER experiment needs. Field names double as config-file keys.
struct ExperimentConfig {
    Mode mode = Mode::Conventional;
    /// Unset means "follow the mode": ideal for conventional, LUT for metasurface.
    bool constellation_from_mode = true;
    ConstellationSource constellation = ConstellationSource::Ideal;

    // Reflection curve
    double frequency_hz = 4.0e9;
    circuit::CircuitParams circuit{};
    circuit::VaractorModel varactor{};
    double v_min = 0.0;
    double v_max = 20.0;
    double v_step = 0.01;
    std::array<double, 4> phase_targets{0.0, 85.0, 170.0, 255.0};
    bool have_control_voltages = false;
    std::array<double, 4> control_voltages{};
    /// 0 keeps the LUT amplitudes; 1 forces all four to the same magnitude.
    double amplitude_equalization = 0.0;

    // Surface
    int rows = 8;
    int cols = 16;
    std::string mask = "full";
    double hold_voltage = 0.0;
    bool have_gamma_static = false;
    cplx gamma_static{};

    // Sweep
    std::vector<double> snr_db{2.0, 4.0, 6.0, 8.0, 10.0};
    SnrAxis snr_axis = SnrAxis::EbN0;
    std::size_t frames_per_point = 100;
    std::uint64_t base_seed = 1;
    int sps = 0; // 0 = mode default (1 conventional, 8 metasurface)
    std::uint64_t pilot_seed = tx::kDefaultPilotSeed;
    double target_ber = 1e-4;
    unsigned threads = 0; // 0 = hardware concurrency

    // Channel (snr comes from the sweep)
    double cfo_normalized = 0.0;
    std::size_t timing_offset = 0;
    cplx complex_gain{1.0, 0.0};
    CVec fir_taps{cplx{1.0, 0.0}};

    rx::RxOptions receiver{};

    void validate() const;
    int effective_sps() const;
    ConstellationSource effective_constellation() const;
};

/// Reads `key = value` lines; `#` starts a comment. Unknown keys and bad values
/// raise ConfigError naming the line.
ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

/// Applies one key to cfg; shared by the file parser and CLI overrides.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

std::vector<double> parse_double_list(const std::string& s);

} // namespace mslink
