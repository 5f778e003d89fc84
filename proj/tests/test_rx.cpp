#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "doctest.h"
#include "mslink/channel.hpp"
#include "mslink/error.hpp"
#include "mslink/fft.hpp"
#include "mslink/rx.hpp"
#include "oracles.hpp"

using namespace mslink;
using namespace mslink::rx;

namespace {

const auto& L = tx::kDefaultLayout;

tx::Frame random_frame(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bits b(L.payload_bits());
    for (auto& x : b) {
        x = static_cast<std::uint8_t>(rng() & 1U);
    }
    return tx::build_frame(b);
}

tx::BasebandSignal through(const tx::Frame& f, const channel::ChannelConfig& cfg, int sps = 1) {
    return channel::apply_channel(tx::synthesize_baseband(f, tx::Constellation::ideal_qpsk(), sps), cfg);
}

CVec random_noise(std::size_t n, double var, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, std::sqrt(var / 2.0));
    CVec w(n);
    for (auto& v : w) {
        v = {g(rng), g(rng)};
    }
    return w;
}

} // namespace

TEST_CASE("frame sync") {
    const auto f = random_frame(1);
    const auto replica = sync_replica(f.sync, 1);

    SUBCASE("noiseless at offset 0 and 137") {
        for (std::size_t off : {0, 137}) {
            channel::ChannelConfig cfg;
            cfg.timing_offset = off;
            const auto rx = through(f, cfg);
            const auto r = frame_sync(rx.samples, replica, 0, 2000);
            CHECK(r.frame_start == off);
            CHECK(r.threshold_passed);
            CHECK(r.peak_metric == doctest::Approx(1.0).epsilon(1e-9));
        }
    }

    SUBCASE("FFT correlation agrees with a brute-force lag scan") {
        channel::ChannelConfig cfg;
        cfg.timing_offset = 301;
        cfg.snr_db = -3.0;
        cfg.cfo_normalized = 0.2;
        const auto rx = through(f, cfg);
        const std::vector<oracle::cplx> x(rx.samples.begin(), rx.samples.begin() + 1500);
        const std::vector<oracle::cplx> r(replica.begin(), replica.end());
        std::size_t best = 0;
        double best_mag = -1.0;
        for (std::size_t lag = 0; lag + r.size() <= x.size(); ++lag) {
            const double m = std::abs(oracle::xcorr_at(x, r, lag));
            if (m > best_mag) {
                best_mag = m;
                best = lag;
            }
        }
        const auto res = scan_sync(rx.samples, replica, 0, 1500);
        CHECK(res.frame_start == best);
        CHECK(best == 301);
    }

    SUBCASE("oversampled replica") {
        channel::ChannelConfig cfg;
        cfg.timing_offset = 45;
        const auto rx = through(f, cfg, 8);
        CHECK(frame_sync(rx.samples, sync_replica(f.sync, 8), 0, 10000).frame_start == 45);
    }

    SUBCASE("window starting inside the signal") {
        channel::ChannelConfig cfg;
        cfg.timing_offset = 900;
        const auto rx = through(f, cfg);
        CHECK(frame_sync(rx.samples, replica, 600, 2000).frame_start == 900);
    }

    SUBCASE("noise alone does not pass") {
        const auto w = random_noise(5000, 1.0, 4);
        const auto r = scan_sync(w, replica, 0, w.size());
        CHECK(!r.threshold_passed);
        CHECK(r.peak_metric < 0.5);
        CHECK_THROWS_AS(frame_sync(w, replica, 0, w.size()), SyncNotFoundError);
    }

    SUBCASE("window shorter than the replica") {
        CHECK_THROWS_AS(scan_sync(replica, replica, 1, replica.size()), DomainError);
    }

    SUBCASE("detection at 0 dB over random offsets") {
        std::mt19937_64 rng(77);
        const auto head = tx::synthesize_baseband(f, tx::Constellation::ideal_qpsk(), 1);
        tx::BasebandSignal part;
        part.samples.assign(head.samples.begin(), head.samples.begin() + 3000);
        int hits = 0;
        const int trials = 1000;
        for (int t = 0; t < trials; ++t) {
            channel::ChannelConfig cfg;
            cfg.snr_db = 0.0;
            cfg.timing_offset = rng() % 1000;
            cfg.seed = rng();
            const auto rx = channel::apply_channel(part, cfg);
            const auto r = scan_sync(rx.samples, replica, 0, 1000 + 2 * replica.size());
            hits += r.threshold_passed && r.frame_start == cfg.timing_offset;
        }
        CHECK(hits >= 990);
    }
}

TEST_CASE("integrate and dump") {
    const CVec x{{1, 0}, {3, 0}, {0, 2}, {0, 4}, {5, 5}};
    CHECK(integrate_and_dump(x, 0, 2, 2) == CVec{{2, 0}, {0, 3}});
    CHECK(integrate_and_dump(x, 1, 1, 3) == CVec{{3, 0}, {0, 2}, {0, 4}});
    CHECK_THROWS_AS(integrate_and_dump(x, 2, 2, 2), FramingError);
}

TEST_CASE("CP CFO estimator") {
    const auto f = random_frame(2);
    auto est = [&](double eps, double snr, std::uint64_t seed) {
        channel::ChannelConfig cfg;
        cfg.cfo_normalized = eps;
        cfg.snr_db = snr;
        cfg.seed = seed;
        return estimate_cfo_cp(through(f, cfg).samples, L);
    };
    CHECK(std::abs(est(0.0, std::numeric_limits<double>::infinity(), 1)) < 1e-12);
    CHECK(std::abs(est(0.05, std::numeric_limits<double>::infinity(), 1) - 0.05) < 1e-9);
    CHECK(std::abs(est(-0.45, std::numeric_limits<double>::infinity(), 1) + 0.45) < 1e-9);

    SUBCASE("bias at high SNR") {
        for (double snr : {20.0, 30.0}) {
            for (double eps : {-0.3, -0.1, 0.1, 0.3}) {
                double sum = 0.0;
                for (int t = 0; t < 100; ++t) {
                    sum += est(eps, snr, 1000 + t) - eps;
                }
                CHECK(std::abs(sum / 100.0) < 1e-4);
            }
        }
    }

    SUBCASE("spread at 10 dB matches the estimator's variance") {
        // var = (1/snr + 1/(2 snr^2)) / (4 pi^2 * 1600) for 1600 CP products
        const double snr = 10.0;
        const double theory = std::sqrt((1.0 / snr + 1.0 / (2.0 * snr * snr)) /
                                        (4.0 * std::numbers::pi * std::numbers::pi * 1600.0));
        double sq = 0.0;
        const int trials = 400;
        for (int t = 0; t < trials; ++t) {
            const double e = est(0.1, 10.0, 5000 + t) - 0.1;
            sq += e * e;
        }
        const double rms = std::sqrt(sq / trials);
        // chi-square spread of 400 samples is about 3.5 %
        CHECK(rms == doctest::Approx(theory).epsilon(0.12));
    }

    CHECK_THROWS_AS(estimate_cfo_cp(CVec(1000), L), FramingError);
}

TEST_CASE("CFO correction") {
    const auto x = random_noise(5000, 1.0, 8);
    CHECK(correct_cfo(x, 0.0) == x);

    channel::ChannelConfig cfg;
    cfg.cfo_normalized = 0.17;
    const auto y = channel::apply_channel(tx::BasebandSignal{x, 1.0, 1}, cfg);
    const auto back = correct_cfo(y.samples, 0.17);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        worst = std::max(worst, std::abs(back[i] - x[i]));
    }
    CHECK(worst < 1e-12);

    const auto twice = correct_cfo(correct_cfo(x, 0.11), 0.11);
    const auto once = correct_cfo(x, 0.22);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(twice[i] - once[i]) < 1e-12);
    }
}

TEST_CASE("LS channel estimate") {
    const auto pilot = tx::modulate(tx::build_pilot_sequence(tx::kDefaultPilotSeed), tx::Constellation::ideal_qpsk(), 1);
    const auto X = dsp::fft(pilot);

    SUBCASE("flat gain and rotation") {
        for (cplx g : {cplx{0.5, 0.0}, std::polar(1.0, 0.7)}) {
            CVec Y(X.size());
            for (std::size_t k = 0; k < X.size(); ++k) {
                Y[k] = g * X[k];
            }
            for (const auto& h : ls_channel_estimate(Y, X).h) {
                CHECK(std::abs(h - g) < 1e-12);
            }
        }
    }

    SUBCASE("three-tap channel through a CP'd frame") {
        const auto f = random_frame(3);
        channel::ChannelConfig cfg;
        cfg.fir_taps = {{0.9, 0.1}, {0.3, -0.2}, {-0.1, 0.05}};
        const auto rx = through(f, cfg);
        const CVec body(rx.samples.begin() + L.body_start(0), rx.samples.begin() + L.body_start(0) + L.fft_len);
        const auto est = ls_channel_estimate(dsp::fft(body), X);
        std::vector<oracle::cplx> taps(L.fft_len);
        std::copy(cfg.fir_taps.begin(), cfg.fir_taps.end(), taps.begin());
        const auto ref = oracle::dft(taps);
        for (std::size_t k = 0; k < L.fft_len; ++k) {
            CHECK(std::abs(est.h[k] - ref[k]) < 1e-9);
        }
    }

    SUBCASE("zero pilot bin") {
        CVec Xz = X;
        Xz[17] = 0.0;
        CHECK_THROWS_AS(ls_channel_estimate(X, Xz), DegeneratePilotError);
    }
}

TEST_CASE("channel estimate denoising") {
    const std::size_t n = 2048;
    CVec taps(n);
    taps[0] = {0.8, 0.1};
    taps[2] = {0.2, -0.3};
    const auto h = dsp::fft(taps);

    SUBCASE("noiseless flat response is untouched") {
        const ChannelEstimate flat{CVec(n, cplx{0.3, 0.4})};
        const auto d = denoise_channel_estimate(flat, 160, 10.0);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(std::abs(d.h[k] - flat.h[k]) < 1e-12);
        }
    }

    SUBCASE("noise outside the CP window is removed") {
        const auto w = random_noise(n, 0.1, 12);
        ChannelEstimate noisy{h};
        for (std::size_t k = 0; k < n; ++k) {
            noisy.h[k] += w[k];
        }
        const auto d = denoise_channel_estimate(noisy, 160, 10.0);
        double before = 0.0;
        double after = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            before += std::norm(noisy.h[k] - h[k]);
            after += std::norm(d.h[k] - h[k]);
        }
        CHECK(after < before / 100.0);
        CHECK(d.dc == cplx{});
    }

    SUBCASE("constant offset is split off and removed") {
        const cplx c{0.7, -0.4};
        // circular convolution plus offset, computed directly
        const auto through = [&](const CVec& x) {
            CVec y(n, c);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t t = 0; t < 3; ++t) {
                    y[i] += taps[t] * x[(i + n - t) % n];
                }
            }
            return y;
        };
        const auto pilot = tx::modulate(tx::build_pilot_sequence(tx::kDefaultPilotSeed, n), tx::Constellation::ideal_qpsk(), 1);
        const auto X = dsp::fft(pilot);
        const auto ls = ls_channel_estimate(dsp::fft(through(pilot)), X);
        const auto d = denoise_channel_estimate(ls, 160, 10.0, X[0]);
        // bin 0 is interpolated from its neighbours, hence not exact
        CHECK(std::abs(d.dc - c) < 1e-6);
        const auto data = random_noise(n, 1.0, 5);
        const auto eq = zf_equalize(through(data), d);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(eq[i] - data[i]) < 1e-6);
        }
    }
}

TEST_CASE("zero-forcing equalizer") {
    const auto x = random_noise(2048, 1.0, 21);

    CHECK(zf_equalize(x, ChannelEstimate{CVec(2048, cplx{1.0, 0.0})}) == dsp::ifft(dsp::fft(x)));

    SUBCASE("true circulant channel is inverted exactly") {
        CVec taps(2048);
        taps[0] = {1.0, 0.2};
        taps[1] = {-0.4, 0.1};
        taps[5] = {0.1, 0.0};
        const auto H = dsp::fft(taps);
        CVec y(2048);
        for (std::size_t n = 0; n < 2048; ++n) {
            for (std::size_t k : {0, 1, 5}) {
                y[n] += taps[k] * x[(n + 2048 - k) % 2048];
            }
        }
        const auto eq = zf_equalize(y, ChannelEstimate{H});
        double worst = 0.0;
        for (std::size_t n = 0; n < 2048; ++n) {
            worst = std::max(worst, std::abs(eq[n] - x[n]));
        }
        CHECK(worst < 1e-9);
    }

    SUBCASE("unit-modulus flat channel keeps the noise variance") {
        const auto w = random_noise(2048 * 64, 0.3, 22);
        const ChannelEstimate flat{CVec(2048, std::polar(1.0, 1.1))};
        CVec out;
        for (std::size_t b = 0; b < 64; ++b) {
            const CVec blk(w.begin() + b * 2048, w.begin() + (b + 1) * 2048);
            const auto e = zf_equalize(blk, flat);
            out.insert(out.end(), e.begin(), e.end());
        }
        CHECK(oracle::sample_variance(out) == doctest::Approx(oracle::sample_variance(w)).epsilon(0.01));
    }

    SUBCASE("singular") {
        CVec h(2048, cplx{1.0, 0.0});
        h[100] = 1e-13;
        CHECK_THROWS_AS(zf_equalize(x, ChannelEstimate{h}), SingularChannelError);
    }
}

TEST_CASE("demodulation") {
    const auto c = tx::Constellation::ideal_qpsk();
    CHECK(demodulate(CVec(c.points.begin(), c.points.end())) == Bits{0, 0, 0, 1, 1, 1, 1, 0});
    CHECK(decide(CVec{1.1 * c.points[1]}) == SymbolIndices{1});
    // equidistant from P1 and P2, and from all four
    CHECK(decide(CVec{{0.0, 1.0}, {0.0, 0.0}, {-1.0, 0.0}}) == SymbolIndices{0, 0, 1});

    SUBCASE("matches an exhaustive nearest-point search") {
        const auto w = random_noise(20000, 2.0, 31);
        const auto d = decide(w);
        for (std::size_t i = 0; i < w.size(); ++i) {
            CHECK(d[i] == oracle::nearest_qpsk(w[i]));
        }
    }

    SUBCASE("common phase") {
        const auto f = random_frame(4);
        CVec s = tx::modulate(f.data[0], c, 1);
        for (auto& v : s) {
            v *= std::polar(1.0, 0.1);
        }
        CHECK(common_phase(s) == doctest::Approx(0.1).epsilon(1e-12));
    }
}

TEST_CASE("receive_frame") {
    const auto f = random_frame(5);

    SUBCASE("clean loopback") {
        const auto rx = through(f, {});
        const auto r = receive_frame(rx, L, tx::kDefaultPilotSeed, f.sync);
        CHECK(r.bits == f.payload_bits);
        CHECK(r.diagnostics.evm_percent < 0.01);
        CHECK(r.diagnostics.sync.frame_start == 0);
        CHECK(r.diagnostics.equalized_symbols.size() == 9 * 2048);
    }

    SUBCASE("gain and rotation are absorbed") {
        channel::ChannelConfig cfg;
        cfg.complex_gain = std::polar(0.5, std::numbers::pi / 4.0);
        const auto r = receive_frame(through(f, cfg), L, tx::kDefaultPilotSeed, f.sync);
        CHECK(r.bits == f.payload_bits);
    }

    SUBCASE("end-to-end identity over random impairments") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> eps(-0.4, 0.4);
        std::normal_distribution<double> g(0.0, 0.3);
        for (int t = 0; t < 12; ++t) {
            channel::ChannelConfig cfg;
            const int sps = t % 3 == 0 ? 8 : 1;
            // the estimator works per 2048 symbols, so its range shrinks by sps
            cfg.cfo_normalized = eps(rng) / sps;
            cfg.timing_offset = rng() % 700;
            cfg.complex_gain = std::polar(0.2 + (rng() % 100) / 50.0, g(rng) * 10.0);
            cfg.fir_taps = {{1.0, 0.0}, {g(rng), g(rng)}, {g(rng) / 2, g(rng) / 2}};
            const auto frame = random_frame(100 + t);
            const auto rx = through(frame, cfg, sps);
            RxOptions opt;
            opt.search_end = cfg.timing_offset + 5000 * static_cast<std::size_t>(sps);
            const auto r = receive_frame(rx, L, tx::kDefaultPilotSeed, frame.sync, opt);
            CHECK(r.bits == frame.payload_bits);
            CHECK(r.diagnostics.sync.frame_start == cfg.timing_offset);
            CHECK(r.diagnostics.cfo_estimate == doctest::Approx(cfg.cfo_normalized).epsilon(1e-6));
        }
    }

    SUBCASE("no frame in the input") {
        const auto w = random_noise(30000, 1.0, 9);
        CHECK_THROWS_AS(receive_frame(tx::BasebandSignal{w, 1.0, 1}, L, tx::kDefaultPilotSeed, f.sync),
                        SyncNotFoundError);
    }
}

TEST_CASE("SNR measurement") {
    const auto c = tx::Constellation::ideal_qpsk();
    std::mt19937_64 rng(10);
    SymbolIndices ref(100000);
    for (auto& s : ref) {
        s = static_cast<SymbolIndex>(rng() >> 62);
    }
    const auto clean = tx::modulate(ref, c, 1);
    CHECK(measure_snr(clean, ref, c) == std::numeric_limits<double>::infinity());

    auto noisy = clean;
    const auto w = random_noise(noisy.size(), 0.1, 11);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        noisy[i] += w[i];
    }
    CHECK(std::abs(measure_snr(noisy, ref, c) - 10.0) < 0.2);

    CHECK_THROWS_AS(measure_snr(CVec{}, SymbolIndices{}, c), DomainError);
    CHECK_THROWS_AS(measure_snr(clean, SymbolIndices{0}, c), DomainError);
}
