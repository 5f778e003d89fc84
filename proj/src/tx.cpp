#include "mslink/tx.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "mslink/error.hpp"

namespace mslink::tx {

Constellation Constellation::ideal_qpsk() {
    // exact sign symmetry, so decision ties are real ties
    const double a = std::numbers::sqrt2 / 2.0;
    Constellation c;
    c.points = {cplx{a, a}, cplx{-a, a}, cplx{-a, -a}, cplx{a, -a}};
    return c;
}

double Constellation::mean_power() const {
    double p = 0.0;
    for (const auto& pt : points) {
        p += std::norm(pt);
    }
    return p / 4.0;
}

void FrameLayout::validate() const {
    if (fft_len == 0 || cp_len > fft_len || pilot_subframes != 1 || sync_len == 0) {
        throw FramingError("frame layout needs one pilot subframe, a sync sequence and cp_len <= fft_len");
    }
}

SymbolIndices Frame::serialize() const {
    SymbolIndices out;
    out.reserve(layout.total_symbols());
    for (auto chip : sync) {
        out.push_back(chip > 0 ? sync_states[0] : sync_states[1]);
    }
    auto append_with_cp = [&](const SymbolIndices& body) {
        out.insert(out.end(), body.end() - static_cast<std::ptrdiff_t>(layout.cp_len), body.end());
        out.insert(out.end(), body.begin(), body.end());
    };
    append_with_cp(pilot);
    for (const auto& d : data) {
        append_with_cp(d);
    }
    return out;
}

SymbolIndices map_bits_to_symbols(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2 != 0) {
        throw FramingError("QPSK mapping needs an even number of bits, got " + std::to_string(bits.size()));
    }
    SymbolIndices out(bits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto b0 = bits[2 * i];
        const auto b1 = bits[2 * i + 1];
        if (b0 > 1 || b1 > 1) {
            throw FramingError("bit values must be 0 or 1");
        }
        // 00 -> P1, 01 -> P2, 11 -> P3, 10 -> P4
        out[i] = static_cast<SymbolIndex>(b0 ? (b1 ? 2 : 3) : (b1 ? 1 : 0));
    }
    return out;
}

Bits symbols_to_bits(std::span<const SymbolIndex> symbols) {
    Bits out;
    out.reserve(symbols.size() * 2);
    for (auto s : symbols) {
        if (s > 3) {
            throw FramingError("symbol index out of range");
        }
        out.push_back(kSymbolBits[s][0]);
        out.push_back(kSymbolBits[s][1]);
    }
    return out;
}

std::vector<std::int8_t> build_sync_sequence() {
    const std::vector<std::vector<std::int8_t>> codes = {
        {1, 1, -1},
        {1, 1, -1, 1},
        {1, 1, 1, -1, 1},
        {1, 1, 1, -1, -1, 1, -1},
    };
    std::vector<std::int8_t> seq{1};
    for (const auto& code : codes) {
        std::vector<std::int8_t> next;
        next.reserve(seq.size() * code.size());
        for (auto outer : seq) {
            for (auto inner : code) {
                next.push_back(static_cast<std::int8_t>(outer * inner));
            }
        }
        seq = std::move(next);
    }
    return seq;
}

SymbolIndices build_pilot_sequence(std::uint64_t seed, std::size_t length) {
    std::mt19937_64 rng(seed);
    SymbolIndices out(length);
    for (auto& s : out) {
        s = static_cast<SymbolIndex>(rng() >> 62);
    }
    return out;
}

Frame build_frame(std::span<const std::uint8_t> payload, const FrameLayout& layout,
                  std::uint64_t pilot_seed) {
    layout.validate();
    if (payload.size() != layout.payload_bits()) {
        throw FramingError("frame payload must be exactly " + std::to_string(layout.payload_bits()) +
                           " bits, got " + std::to_string(payload.size()));
    }
    Frame f;
    f.layout = layout;
    f.sync = build_sync_sequence();
    if (f.sync.size() != layout.sync_len) {
        throw FramingError("sync sequence length does not match the layout");
    }
    f.pilot = build_pilot_sequence(pilot_seed, layout.fft_len);
    f.payload_bits.assign(payload.begin(), payload.end());
    const SymbolIndices symbols = map_bits_to_symbols(payload);
    f.data.resize(layout.data_subframes);
    for (std::size_t i = 0; i < layout.data_subframes; ++i) {
        auto first = symbols.begin() + static_cast<std::ptrdiff_t>(i * layout.fft_len);
        f.data[i].assign(first, first + static_cast<std::ptrdiff_t>(layout.fft_len));
    }
    return f;
}

CVec modulate(std::span<const SymbolIndex> symbols, const Constellation& constellation, int sps) {
    if (sps < 1) {
        throw DomainError("samples per symbol must be >= 1");
    }
    CVec out;
    out.reserve(symbols.size() * static_cast<std::size_t>(sps));
    for (auto s : symbols) {
        out.insert(out.end(), static_cast<std::size_t>(sps), constellation.points.at(s));
    }
    return out;
}

BasebandSignal synthesize_baseband(const Frame& frame, const Constellation& constellation, int sps,
                                   double symbol_rate) {
    BasebandSignal sig;
    sig.samples = modulate(frame.serialize(), constellation, sps);
    sig.samples_per_symbol = sps;
    sig.sample_rate = symbol_rate * sps;
    return sig;
}

std::vector<double> synthesize_passband(const BasebandSignal& gamma, const CarrierParams& carrier) {
    if (!(gamma.sample_rate > 4.0 * carrier.carrier_hz) || !(carrier.carrier_hz >= 0.0)) {
        throw AliasingError("passband carrier must stay below a quarter of the sample rate");
    }
    const double step = 2.0 * std::numbers::pi * carrier.carrier_hz / gamma.sample_rate;
    std::vector<double> out(gamma.samples.size());
    for (std::size_t n = 0; n < out.size(); ++n) {
        // Reduce the argument first; n*step grows large for long frames.
        const double arg = std::fmod(step * static_cast<double>(n), 2.0 * std::numbers::pi) + carrier.phase0_rad;
        out[n] = carrier.amplitude * (gamma.samples[n] * std::polar(1.0, arg)).real();
    }
    return out;
}

std::vector<double> synthesize_passband(const Frame& frame, const Constellation& constellation,
                                        double carrier_hz, double sample_rate_hz, double amplitude,
                                        double phase0_rad, int sps) {
    BasebandSignal sig = synthesize_baseband(frame, constellation, sps, sample_rate_hz / sps);
    return synthesize_passband(sig, CarrierParams{carrier_hz, amplitude, phase0_rad});
}

Constellation metasurface_constellation(const circuit::GammaLUT& lut,
                                        const std::array<double, 4>& voltages) {
    Constellation c;
    for (std::size_t k = 0; k < 4; ++k) {
        c.points[k] = lut.gamma_at(voltages[k]);
    }
    const double power = c.mean_power();
    if (!(power > 0.0)) {
        throw DomainError("metasurface constellation has zero power");
    }
    const double scale = 1.0 / std::sqrt(power);
    for (auto& p : c.points) {
        p *= scale;
    }
    return c;
}

} // namespace mslink::tx
