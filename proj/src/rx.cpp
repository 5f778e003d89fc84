#include "mslink/rx.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mslink/error.hpp"
#include "mslink/fft.hpp"

namespace mslink::rx {

using std::numbers::pi;

namespace {

const std::array<cplx, 4>& ideal_points() {
    static const auto points = tx::Constellation::ideal_qpsk().points;
    return points;
}

SymbolIndex nearest(cplx s) {
    const auto& pts = ideal_points();
    SymbolIndex best = 0;
    double best_d = std::norm(s - pts[0]);
    for (SymbolIndex k = 1; k < 4; ++k) {
        const double d = std::norm(s - pts[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

} // namespace

CVec sync_replica(std::span<const std::int8_t> chips, int sps) {
    if (sps < 1) {
        throw DomainError("samples per symbol must be >= 1");
    }
    const cplx p1 = ideal_points()[0];
    CVec out;
    out.reserve(chips.size() * static_cast<std::size_t>(sps));
    for (auto c : chips) {
        out.insert(out.end(), static_cast<std::size_t>(sps), c > 0 ? p1 : -p1);
    }
    return out;
}

SyncResult scan_sync(std::span<const cplx> rx, std::span<const cplx> replica, std::size_t begin,
                     std::size_t end, double threshold) {
    end = std::min(end, rx.size());
    if (begin >= end || end - begin < replica.size() || replica.empty()) {
        throw DomainError("sync search window is shorter than the sync replica");
    }
    const auto seg = rx.subspan(begin, end - begin);
    const std::size_t lags = seg.size() - replica.size() + 1;
    const std::size_t nfft = dsp::next_pow2(seg.size());

    CVec a(nfft), b(nfft);
    std::copy(seg.begin(), seg.end(), a.begin());
    std::copy(replica.begin(), replica.end(), b.begin());
    CVec A = dsp::fft(a);
    const CVec B = dsp::fft(b);
    for (std::size_t k = 0; k < nfft; ++k) {
        A[k] *= std::conj(B[k]);
    }
    const CVec corr = dsp::ifft(A);

    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t m = 0; m < lags; ++m) {
        const double mag = std::abs(corr[m]);
        if (mag > best_mag) {
            best_mag = mag;
            best = m;
        }
    }

    // Normalised about the means of both the window and the replica: a static
    // reflection from idle cells adds a DC term that must not count as signal
    // or as noise. Cauchy-Schwarz keeps the result in [0, 1].
    const auto len = static_cast<double>(replica.size());
    cplx rep_sum{};
    double rep_energy = 0.0;
    for (const auto& r : replica) {
        rep_sum += r;
        rep_energy += std::norm(r);
    }
    rep_energy = std::max(0.0, rep_energy - std::norm(rep_sum) / len);
    double seg_energy = 0.0;
    cplx seg_sum{};
    for (std::size_t k = 0; k < replica.size(); ++k) {
        seg_energy += std::norm(seg[best + k]);
        seg_sum += seg[best + k];
    }
    seg_energy = std::max(0.0, seg_energy - std::norm(seg_sum) / len);
    const double centred = std::abs(corr[best] - seg_sum * std::conj(rep_sum) / len);
    const double denom = std::sqrt(rep_energy * seg_energy);
    SyncResult res;
    res.frame_start = begin + best;
    res.peak_metric = denom > 0.0 ? std::min(1.0, centred / denom) : 0.0;
    res.threshold_passed = res.peak_metric >= threshold;
    return res;
}

SyncResult frame_sync(std::span<const cplx> rx, std::span<const cplx> replica, std::size_t begin,
                      std::size_t end, double threshold) {
    SyncResult res = scan_sync(rx, replica, begin, end, threshold);
    if (!res.threshold_passed) {
        throw SyncNotFoundError("no sync peak above threshold (best metric " +
                                std::to_string(res.peak_metric) + " at sample " +
                                std::to_string(res.frame_start) + ")");
    }
    return res;
}

CVec integrate_and_dump(std::span<const cplx> samples, std::size_t start, int sps, std::size_t n_symbols) {
    if (sps < 1) {
        throw DomainError("samples per symbol must be >= 1");
    }
    const auto step = static_cast<std::size_t>(sps);
    if (start + n_symbols * step > samples.size()) {
        throw FramingError("signal ends before the frame does");
    }
    CVec out(n_symbols);
    if (sps == 1) {
        std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(start), n_symbols, out.begin());
        return out;
    }
    const double inv = 1.0 / sps;
    for (std::size_t i = 0; i < n_symbols; ++i) {
        cplx acc{};
        const std::size_t base = start + i * step;
        for (std::size_t k = 0; k < step; ++k) {
            acc += samples[base + k];
        }
        out[i] = acc * inv;
    }
    return out;
}

double estimate_cfo_cp(std::span<const cplx> frame_symbols, const tx::FrameLayout& layout) {
    cplx acc{};
    std::size_t used = 0;
    for (std::size_t i = 0; i < layout.subframes(); ++i) {
        const std::size_t cp = layout.subframe_start(i);
        if (cp + layout.cp_len + layout.fft_len > frame_symbols.size()) {
            break;
        }
        for (std::size_t n = cp; n < cp + layout.cp_len; ++n) {
            acc += std::conj(frame_symbols[n]) * frame_symbols[n + layout.fft_len];
        }
        ++used;
    }
    if (used == 0) {
        throw FramingError("CFO estimation needs at least one complete subframe");
    }
    return std::arg(acc) / (2.0 * pi);
}

CVec correct_cfo(std::span<const cplx> samples, double eps, double block) {
    CVec out(samples.size());
    const double dphi = -2.0 * pi * eps / block;
    for (std::size_t n = 0; n < samples.size(); ++n) {
        out[n] = samples[n] * std::polar(1.0, std::fmod(dphi * static_cast<double>(n), 2.0 * pi));
    }
    return out;
}

ChannelEstimate ls_channel_estimate(std::span<const cplx> y_pilot_freq, std::span<const cplx> x_pilot_freq) {
    if (y_pilot_freq.size() != x_pilot_freq.size() || y_pilot_freq.empty()) {
        throw DomainError("LS estimate needs equally sized, non-empty pilot spectra");
    }
    ChannelEstimate est;
    est.h.resize(y_pilot_freq.size());
    for (std::size_t k = 0; k < est.h.size(); ++k) {
        if (std::abs(x_pilot_freq[k]) == 0.0) {
            throw DegeneratePilotError("pilot spectrum vanishes at bin " + std::to_string(k));
        }
        est.h[k] = y_pilot_freq[k] / x_pilot_freq[k];
    }
    return est;
}

ChannelEstimate denoise_channel_estimate(const ChannelEstimate& ls, std::size_t cp_len, double tap_threshold,
                                         cplx pilot_dc) {
    const std::size_t n = ls.h.size();
    if (n < 4 || 2 * cp_len >= n) {
        return ls;
    }
    CVec smoothed = ls.h;
    smoothed[0] = 0.5 * (ls.h[1] + ls.h[n - 1]);
    CVec taps = dsp::ifft(smoothed);

    double floor = 0.0;
    for (std::size_t t = cp_len; t < n - cp_len; ++t) {
        floor += std::norm(taps[t]);
    }
    floor /= static_cast<double>(n - 2 * cp_len);
    const double keep_above = tap_threshold * floor;
    for (std::size_t t = 0; t < n; ++t) {
        const bool in_window = t < cp_len || t >= n - cp_len;
        if (!in_window || std::norm(taps[t]) <= keep_above) {
            taps[t] = cplx{};
        }
    }
    ChannelEstimate out{dsp::fft(taps), ls.dc};
    // a single raw bin is far too noisy to divide by
    out.dc += (ls.h[0] - out.h[0]) * pilot_dc / static_cast<double>(n);
    return out;
}

CVec zf_equalize(std::span<const cplx> y_block, const ChannelEstimate& est) {
    if (y_block.size() != est.h.size()) {
        throw DomainError("equaliser block and channel estimate differ in length");
    }
    CVec Y = dsp::fft(y_block);
    Y[0] -= est.dc * static_cast<double>(Y.size());
    for (std::size_t k = 0; k < Y.size(); ++k) {
        if (std::abs(est.h[k]) < 1e-12) {
            throw SingularChannelError("channel estimate vanishes at bin " + std::to_string(k));
        }
        Y[k] /= est.h[k];
    }
    return dsp::ifft(Y);
}

SymbolIndices decide(std::span<const cplx> symbols) {
    SymbolIndices out(symbols.size());
    std::transform(symbols.begin(), symbols.end(), out.begin(), nearest);
    return out;
}

Bits demodulate(std::span<const cplx> symbols) { return tx::symbols_to_bits(decide(symbols)); }

double common_phase(std::span<const cplx> symbols) {
    const auto& pts = ideal_points();
    cplx acc{};
    for (const auto& s : symbols) {
        acc += std::conj(pts[nearest(s)]) * s;
    }
    return acc == cplx{} ? 0.0 : std::arg(acc);
}

namespace {

struct EqualizedFrame {
    std::vector<CVec> blocks;
};

EqualizedFrame equalize_frame(std::span<const cplx> symbols, double eps, const tx::FrameLayout& layout,
                              std::span<const cplx> pilot_freq, const RxOptions& opt) {
    const CVec corrected = correct_cfo(symbols, eps, static_cast<double>(layout.fft_len));
    const auto body = [&](std::size_t i) {
        return std::span<const cplx>(corrected).subspan(layout.body_start(i), layout.fft_len);
    };
    const CVec y_pilot = dsp::fft(body(0));
    ChannelEstimate est = ls_channel_estimate(y_pilot, pilot_freq);
    if (opt.denoise_channel) {
        est = denoise_channel_estimate(est, layout.cp_len, opt.tap_threshold, pilot_freq[0]);
    }
    EqualizedFrame out;
    out.blocks.reserve(layout.data_subframes);
    for (std::size_t i = 1; i <= layout.data_subframes; ++i) {
        out.blocks.push_back(zf_equalize(body(i), est));
    }
    return out;
}

// Phase of each data block relative to the pilot, unwrapped across blocks in
// steps of pi/2 (the decision-directed ambiguity for QPSK).
std::vector<double> block_phases(const EqualizedFrame& eq) {
    std::vector<double> phases;
    double prev = 0.0;
    for (const auto& block : eq.blocks) {
        double p = common_phase(block);
        p += (pi / 2.0) * std::round((prev - p) / (pi / 2.0));
        phases.push_back(p);
        prev = p;
    }
    return phases;
}

} // namespace

RxResult receive_frame(const tx::BasebandSignal& rx, const tx::FrameLayout& layout, std::uint64_t pilot_seed,
                       std::span<const std::int8_t> sync_ref, const RxOptions& options) {
    layout.validate();
    const int sps = rx.samples_per_symbol;
    const CVec replica = sync_replica(sync_ref, sps);

    RxResult result;
    auto& diag = result.diagnostics;
    diag.sync = frame_sync(rx.samples, replica, options.search_begin, options.search_end, options.sync_threshold);

    const CVec symbols = integrate_and_dump(rx.samples, diag.sync.frame_start, sps, layout.total_symbols());

    const CVec pilot_time = tx::modulate(tx::build_pilot_sequence(pilot_seed, layout.fft_len),
                                         tx::Constellation::ideal_qpsk(), 1);
    const CVec pilot_freq = dsp::fft(pilot_time);

    double eps = estimate_cfo_cp(symbols, layout);
    diag.cfo_cp_estimate = eps / sps;

    EqualizedFrame eq = equalize_frame(symbols, eps, layout, pilot_freq, options);
    std::vector<double> phases = block_phases(eq);

    if (options.refine_cfo) {
        // Least-squares slope through the pilot (phase 0 at t = 0).
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < phases.size(); ++i) {
            const double t = static_cast<double>((i + 1) * layout.subframe_len());
            num += t * phases[i];
            den += t * t;
        }
        const double slope = den > 0.0 ? num / den : 0.0; // radians per symbol
        eps += slope * static_cast<double>(layout.fft_len) / (2.0 * pi);
        eq = equalize_frame(symbols, eps, layout, pilot_freq, options);
        phases = block_phases(eq);
    }
    diag.cfo_estimate = eps / sps;

    diag.equalized_symbols.reserve(layout.data_subframes * layout.fft_len);
    for (std::size_t i = 0; i < eq.blocks.size(); ++i) {
        const cplx rot = options.track_phase ? std::polar(1.0, -phases[i]) : cplx{1.0, 0.0};
        for (const auto& s : eq.blocks[i]) {
            diag.equalized_symbols.push_back(s * rot);
        }
    }

    const auto& pts = ideal_points();
    double err = 0.0;
    for (const auto& s : diag.equalized_symbols) {
        err += std::norm(s - pts[nearest(s)]);
    }
    err /= static_cast<double>(diag.equalized_symbols.size());
    diag.evm_percent = 100.0 * std::sqrt(err);
    diag.snr_estimate_db = err > 0.0 ? -10.0 * std::log10(err) : std::numeric_limits<double>::infinity();

    result.bits = demodulate(diag.equalized_symbols);
    return result;
}

double measure_snr(std::span<const cplx> equalized, std::span<const SymbolIndex> reference,
                   const tx::Constellation& constellation) {
    if (equalized.empty()) {
        throw DomainError("SNR measurement needs at least one symbol");
    }
    if (equalized.size() != reference.size()) {
        throw DomainError("equalised and reference sequences differ in length");
    }
    double sig = 0.0;
    double noise = 0.0;
    for (std::size_t i = 0; i < equalized.size(); ++i) {
        const cplx ref = constellation.points.at(reference[i]);
        sig += std::norm(ref);
        noise += std::norm(equalized[i] - ref);
    }
    if (noise == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(sig / noise);
}

} // namespace mslink::rx
