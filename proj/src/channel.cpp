#include "mslink/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "mslink/error.hpp"

namespace mslink::channel {

void ChannelConfig::validate() const {
    if (!(std::abs(cfo_normalized) < 0.5)) {
        throw DomainError("normalised CFO must satisfy |eps| < 0.5");
    }
    if (fir_taps.empty()) {
        throw DomainError("channel needs at least one FIR tap");
    }
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
        throw DomainError("SNR must be finite or +inf");
    }
    if (!(reference_power > 0.0)) {
        throw DomainError("reference power must be positive");
    }
}

double noise_variance(double snr_db, double signal_power) {
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
        throw DomainError("SNR must be finite or +inf");
    }
    if (std::isinf(snr_db)) {
        return 0.0;
    }
    return signal_power / std::pow(10.0, snr_db / 10.0);
}

tx::BasebandSignal apply_channel(const tx::BasebandSignal& sig, const ChannelConfig& cfg) {
    cfg.validate();
    const auto& x = sig.samples;
    const std::size_t taps = cfg.fir_taps.size();
    const std::size_t filtered_len = x.empty() ? 0 : x.size() + taps - 1;
    const std::size_t out_len = cfg.timing_offset + filtered_len;

    tx::BasebandSignal out;
    out.sample_rate = sig.sample_rate;
    out.samples_per_symbol = sig.samples_per_symbol;
    out.samples.assign(out_len, cplx{});

    const double dphi = 2.0 * std::numbers::pi * cfg.cfo_normalized / kCfoBlock;
    for (std::size_t m = 0; m < filtered_len; ++m) {
        cplx acc{};
        const std::size_t k_lo = m >= x.size() ? m - x.size() + 1 : 0;
        const std::size_t k_hi = std::min(taps - 1, m);
        for (std::size_t k = k_lo; k <= k_hi; ++k) {
            acc += cfg.fir_taps[k] * x[m - k];
        }
        acc *= cfg.complex_gain;
        if (cfg.cfo_normalized != 0.0) {
            acc *= std::polar(1.0, std::fmod(dphi * static_cast<double>(m), 2.0 * std::numbers::pi));
        }
        out.samples[cfg.timing_offset + m] = acc;
    }

    const double var = noise_variance(cfg.snr_db, cfg.reference_power) * sig.samples_per_symbol;
    if (var > 0.0) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> normal(0.0, std::sqrt(var / 2.0));
        for (auto& y : out.samples) {
            const double re = normal(rng);
            const double im = normal(rng);
            y += cplx{re, im};
        }
    }
    return out;
}

} // namespace mslink::channel
