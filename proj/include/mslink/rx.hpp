#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "mslink/tx.hpp"
#include "mslink/types.hpp"

namespace mslink::rx {

struct SyncResult {
    std::size_t frame_start = 0;
    double peak_metric = 0.0; // mean-removed normalised correlation at the peak, in [0, 1]
    bool threshold_passed = false;
};

struct ChannelEstimate {
    CVec h;      // one complex gain per DFT bin
    cplx dc{};   // constant added to every received sample, removed before equalising
};

struct RxDiagnostics {
    SyncResult sync;
    double cfo_estimate = 0.0;    // final estimate, cycles per 2048 samples
    double cfo_cp_estimate = 0.0; // cyclic-prefix stage alone, same units
    double evm_percent = 0.0;
    double snr_estimate_db = 0.0;
    CVec equalized_symbols; // data subframes, in transmit order
};

struct RxResult {
    Bits bits;
    RxDiagnostics diagnostics;
};

/// Receiver knobs. The defaults are what the experiments use.
struct RxOptions {
    std::size_t search_begin = 0;
    std::size_t search_end = std::numeric_limits<std::size_t>::max(); // exclusive, clipped to the input
    double sync_threshold = 0.5;
    /// Keep only channel taps that stand `tap_threshold` times above the noise
    /// floor seen outside the cyclic-prefix window.
    bool denoise_channel = true;
    double tap_threshold = 10.0;
    /// Second CFO pass from the decision-directed phase drift across data
    /// subframes, then a per-subframe common phase correction.
    bool refine_cfo = true;
    bool track_phase = true;
};

/// Sync chips mapped onto the ideal P1 (+1) / P3 (-1) points, held sps samples.
CVec sync_replica(std::span<const std::int8_t> chips, int sps);

/// Cross-correlates rx[begin, end) against the replica and reports the lag with
/// the largest magnitude (earliest on ties). Never throws on a weak peak.
SyncResult scan_sync(std::span<const cplx> rx, std::span<const cplx> replica, std::size_t begin,
                     std::size_t end, double threshold = 0.5);

/// scan_sync, but a peak below threshold raises SyncNotFoundError.
SyncResult frame_sync(std::span<const cplx> rx, std::span<const cplx> replica, std::size_t begin,
                      std::size_t end, double threshold = 0.5);

/// Averages each run of sps samples starting at `start`.
CVec integrate_and_dump(std::span<const cplx> samples, std::size_t start, int sps, std::size_t n_symbols);

/// angle(sum over every CP of conj(r[n]) r[n + fft_len)) / 2pi, in cycles per
/// fft_len symbols. Input starts at the first sync symbol.
double estimate_cfo_cp(std::span<const cplx> frame_symbols, const tx::FrameLayout& layout);

/// Multiplies sample n by exp(-j 2 pi eps n / block).
CVec correct_cfo(std::span<const cplx> samples, double eps, double block = 2048.0);

ChannelEstimate ls_channel_estimate(std::span<const cplx> y_pilot_freq, std::span<const cplx> x_pilot_freq);

/// Tap-domain cleanup of an LS estimate. Bin 0 is left out of the tap fit,
/// since a static reflection from idle cells lands there. With the pilot's
/// bin-0 value given, what the fitted gain does not explain in that bin is
/// returned as the dc term.
ChannelEstimate denoise_channel_estimate(const ChannelEstimate& ls, std::size_t cp_len,
                                         double tap_threshold, cplx pilot_dc = {});

/// ifft((fft(y) - dc) / h). CP must already be stripped.
CVec zf_equalize(std::span<const cplx> y_block, const ChannelEstimate& est);

/// Nearest ideal QPSK point, lower index on ties.
SymbolIndices decide(std::span<const cplx> symbols);
Bits demodulate(std::span<const cplx> symbols);

/// Decision-directed common phase, radians in (-pi/4, pi/4].
double common_phase(std::span<const cplx> symbols);

RxResult receive_frame(const tx::BasebandSignal& rx, const tx::FrameLayout& layout,
                       std::uint64_t pilot_seed, std::span<const std::int8_t> sync_ref,
                       const RxOptions& options = {});

/// 10 log10(mean |ref|^2 / mean |eq - ref|^2); +inf when they match exactly.
double measure_snr(std::span<const cplx> equalized, std::span<const SymbolIndex> reference,
                   const tx::Constellation& constellation);

} // namespace mslink::rx
