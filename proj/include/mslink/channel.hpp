#pragma once

#include <cstdint>
#include <limits>

#include "mslink/tx.hpp"
#include "mslink/types.hpp"

namespace mslink::channel {

/// Link impairments, applied in the order FIR -> gain -> delay -> CFO -> AWGN.
///
/// `snr_db` is Es/N0: symbol energy of a `reference_power` stream over the
/// noise density. At sps > 1 each sample gets sps times the 1-sps noise
/// variance, so a receiver that integrates over the symbol sees the nominal
/// Es/N0 again. The reference is fixed (not measured from the input), which
/// keeps the noise floor independent of how much power the transmitter
/// actually radiates.
struct ChannelConfig {
    double snr_db = std::numeric_limits<double>::infinity();
    double cfo_normalized = 0.0;  // cycles per 2048-sample block, |eps| < 0.5
    std::size_t timing_offset = 0; // samples of leading silence
    cplx complex_gain{1.0, 0.0};
    CVec fir_taps{cplx{1.0, 0.0}};
    std::uint64_t seed = 1;
    double reference_power = 1.0;

    void validate() const;
};

inline constexpr double kCfoBlock = 2048.0;

/// signal_power / 10^(snr_db/10); +inf dB gives 0.
double noise_variance(double snr_db, double signal_power);

/// Output length is timing_offset + input length + taps - 1.
tx::BasebandSignal apply_channel(const tx::BasebandSignal& sig, const ChannelConfig& cfg);

} // namespace mslink::channel
