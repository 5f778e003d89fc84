#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mslink/error.hpp"
#include "mslink/harness.hpp"
#include "oracles.hpp"

using namespace mslink;
using namespace mslink::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_sweep(Mode mode = Mode::Conventional) {
    ExperimentConfig c;
    c.mode = mode;
    c.snr_db = {2.0, 6.0};
    c.frames_per_point = 2;
    c.base_seed = 7;
    return c;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("mslink_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> random_bytes(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<char> v(n);
    for (auto& b : v) {
        b = static_cast<char>(rng() & 0xFF);
    }
    return v;
}

void write_file(const std::string& path, const std::vector<char>& data) {
    std::ofstream(path, std::ios::binary).write(data.data(), static_cast<std::streamsize>(data.size()));
}

std::vector<char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("theoretical QPSK BER against Q(sqrt(2 Eb/N0))") {
    CHECK(theoretical_qpsk_ber(0.0) == doctest::Approx(0.0786496035251426).epsilon(1e-12));
    // high-precision values of Q
    const std::array<double, 5> ref{0.0375061283589260, 0.0125008180407376, 0.00238829078093281,
                                    0.000190907774075993, 3.87210821552204e-6};
    for (std::size_t i = 0; i < 5; ++i) {
        const double x = 2.0 + 2.0 * static_cast<double>(i);
        CHECK(theoretical_qpsk_ber(x) == doctest::Approx(ref[i]).epsilon(1e-10));
        CHECK(theoretical_qpsk_ber(x) ==
              doctest::Approx(oracle::q_function(std::sqrt(2.0 * std::pow(10.0, x / 10.0)))).epsilon(1e-8));
    }
    CHECK(theoretical_qpsk_ber(std::numeric_limits<double>::infinity()) == 0.0);
}

TEST_CASE("seeds and SNR axis") {
    CHECK(frame_seed(1, 0, 0) == 1);
    CHECK(frame_seed(1, 2, 5) == 1 + 2 * 1048576 + 5);
    ExperimentConfig c;
    CHECK(channel_snr_db(c, 4.0) == doctest::Approx(4.0 + 3.0103).epsilon(1e-5));
    c.snr_axis = SnrAxis::EsN0;
    CHECK(channel_snr_db(c, 4.0) == 4.0);
}

TEST_CASE("link model") {
    SUBCASE("conventional uses the ideal points at one sample per symbol") {
        const auto m = build_link_model(ExperimentConfig{});
        CHECK(m.sps == 1);
        CHECK(m.constellation.points == tx::Constellation::ideal_qpsk().points);
        CHECK(m.surface.mask == array::parse_mask("full", 8, 16));
    }
    SUBCASE("metasurface points have unit mean power") {
        const auto m = build_link_model(small_sweep(Mode::Metasurface));
        CHECK(m.sps == 8);
        double p = 0.0;
        for (const auto& pt : m.constellation.points) {
            p += std::norm(pt);
        }
        CHECK(p / 4.0 == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("full amplitude equalisation gives equal magnitudes") {
        auto c = small_sweep(Mode::Metasurface);
        c.amplitude_equalization = 1.0;
        const auto m = build_link_model(c);
        for (const auto& pt : m.constellation.points) {
            CHECK(std::abs(pt) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("BER sweep") {
    SUBCASE("determinism and thread independence") {
        auto c = small_sweep();
        c.threads = 1;
        const auto a = run_ber_sweep(c);
        c.threads = 4;
        CHECK(run_ber_sweep(c) == a);
        c.base_seed = 8;
        CHECK(run_ber_sweep(c) != a);
    }

    SUBCASE("bit conservation") {
        const auto r = run_ber_sweep(small_sweep());
        for (const auto& rec : r) {
            CHECK(rec.bits == 2 * 36864);
            CHECK(rec.errors <= rec.bits);
            CHECK(rec.ber == static_cast<double>(rec.errors) / static_cast<double>(rec.bits));
        }
    }

    SUBCASE("noiseless point has no errors") {
        auto c = small_sweep();
        c.snr_db = {std::numeric_limits<double>::infinity()};
        c.frames_per_point = 1;
        const auto r = run_ber_sweep(c);
        CHECK(r[0].errors == 0);
        CHECK(r[0].ber == 0.0);
        CHECK(r[0].sync_failures == 0);
    }

    SUBCASE("noiseless metasurface link is error free") {
        auto c = small_sweep(Mode::Metasurface);
        c.snr_db = {std::numeric_limits<double>::infinity()};
        c.frames_per_point = 1;
        CHECK(run_ber_sweep(c)[0].errors == 0);
    }

    SUBCASE("invalid config") {
        auto c = small_sweep();
        c.frames_per_point = 0;
        CHECK_THROWS_AS(run_ber_sweep(c), ConfigError);
    }
}

TEST_CASE("simulate_frame counts a lost frame as fully errored") {
    auto c = small_sweep();
    c.receiver.sync_threshold = 1.01;
    const auto o = simulate_frame(c, build_link_model(c), 10.0, 3);
    CHECK(o.sync_failed);
    CHECK(o.errors == 36864);
}

TEST_CASE("BER interpolation") {
    std::vector<BerRecord> curve{{0.0, 1000000, 100000, 0.1, 0},
                                 {2.0, 1000000, 10000, 0.01, 0},
                                 {4.0, 1000000, 100, 1e-4, 0},
                                 {6.0, 1000000, 0, 0.0, 0}};
    CHECK(snr_at_ber(curve, 0.01) == doctest::Approx(2.0));
    CHECK(snr_at_ber(curve, std::sqrt(0.1 * 0.01)) == doctest::Approx(1.0));
    CHECK(snr_at_ber(curve, 1e-3) == doctest::Approx(3.0));
    // zero errors floor at 0.5 / 1e6
    CHECK(snr_at_ber(curve, 1e-5) == doctest::Approx(4.0 + 2.0 * 1.0 / (std::log10(1e-4) - std::log10(5e-7))));
    CHECK_THROWS_AS(snr_at_ber(curve, 0.5), InterpolationError);
    CHECK_THROWS_AS(snr_at_ber(curve, 1e-8), InterpolationError);
    CHECK_THROWS_AS(snr_at_ber({}, 1e-4), InterpolationError);
}

TEST_CASE("architecture comparison") {
    auto c = small_sweep();
    c.snr_db = {0.0, 4.0, 8.0};
    c.frames_per_point = 1;
    c.target_ber = 1e-3;
    const auto cmp = compare_architectures(c, c);
    CHECK(cmp.a == cmp.b);
    CHECK(cmp.gap_db == 0.0);

    auto other = c;
    other.snr_db = {0.0, 4.0};
    CHECK_THROWS_AS(compare_architectures(c, other), ConfigError);
}

TEST_CASE("BER CSV") {
    std::ostringstream os;
    write_ber_csv(os, {{2.0, 36864, 3, 3.0 / 36864.0, 0}});
    std::istringstream is(os.str());
    std::string header;
    std::string row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "snr_db,bits,errors,ber");
    CHECK(row.rfind("2,36864,3,", 0) == 0);
    CHECK(std::stod(row.substr(row.rfind(',') + 1)) == 3.0 / 36864.0);
}

TEST_CASE("stream header and IQ files") {
    TempDir dir;
    const StreamHeader h{1.0e7, 8, 3, 1234, 42, 3 * 36864 - 1234};
    write_stream_header(dir.file("a.hdr"), h);
    CHECK(read_stream_header(dir.file("a.hdr")) == h);
    CHECK(header_path_for("x/y.iq") == "x/y.iq.hdr");

    const CVec iq{{1.5f, -2.25f}, {0.0, 1e-3f}, {-7.0, 3.0}};
    write_iq(dir.file("a.iq"), iq);
    CHECK(fs::file_size(dir.file("a.iq")) == 24);
    CHECK(read_iq(dir.file("a.iq")) == iq);
    const auto raw = read_file(dir.file("a.iq"));
    // 1.5f little endian
    CHECK(static_cast<unsigned char>(raw[2]) == 0xC0);
    CHECK(static_cast<unsigned char>(raw[3]) == 0x3F);

    std::ofstream(dir.file("bad.hdr")) << "sample_rate_hz = 1.25e6\nframes = x\n";
    CHECK_THROWS_AS(read_stream_header(dir.file("bad.hdr")), ConsistencyError);
    std::ofstream(dir.file("short.hdr")) << "sample_rate_hz = 1.25e6\n";
    CHECK_THROWS_AS(read_stream_header(dir.file("short.hdr")), ConsistencyError);
    CHECK_THROWS_AS(read_stream_header(dir.file("missing.hdr")), IoError);
    CHECK_THROWS_AS(read_iq(dir.file("missing.iq")), IoError);
    write_file(dir.file("odd.iq"), std::vector<char>(10));
    CHECK_THROWS_AS(read_iq(dir.file("odd.iq")), ConsistencyError);
}

TEST_CASE("file transfer") {
    TempDir dir;
    ExperimentConfig cfg;
    channel::ChannelConfig ch;
    ch.snr_db = 30.0;
    ch.timing_offset = 123;

    SUBCASE("4608 bytes is exactly one frame") {
        const auto data = random_bytes(4608, 1);
        write_file(dir.file("in.bin"), data);
        const auto h = transmit_file(dir.file("in.bin"), dir.file("s.iq"), cfg, ch);
        CHECK(h.frames == 1);
        CHECK(h.pad_bits == 0);
        receive_file(dir.file("s.iq"), dir.file("s.iq.hdr"), dir.file("out.bin"));
        CHECK(read_file(dir.file("out.bin")) == data);
    }

    SUBCASE("padding and several frames") {
        const auto data = random_bytes(10000, 2);
        write_file(dir.file("in.bin"), data);
        ch.cfo_normalized = -0.07;
        ch.fir_taps = {{1.0, 0.0}, {0.2, 0.1}};
        const auto h = transmit_file(dir.file("in.bin"), dir.file("s.iq"), cfg, ch);
        CHECK(h.frames == 3);
        CHECK(h.pad_bits == 3 * 36864 - 80000);
        receive_file(dir.file("s.iq"), dir.file("s.iq.hdr"), dir.file("out.bin"));
        CHECK(read_file(dir.file("out.bin")) == data);
    }

    SUBCASE("empty file") {
        write_file(dir.file("in.bin"), {});
        const auto h = transmit_file(dir.file("in.bin"), dir.file("s.iq"), cfg, ch);
        CHECK(h.frames == 0);
        CHECK(fs::file_size(dir.file("s.iq")) == 0);
        receive_file(dir.file("s.iq"), dir.file("s.iq.hdr"), dir.file("out.bin"));
        CHECK(read_file(dir.file("out.bin")).empty());
    }

    SUBCASE("header that disagrees with the data") {
        write_file(dir.file("in.bin"), random_bytes(100, 3));
        auto h = transmit_file(dir.file("in.bin"), dir.file("s.iq"), cfg, ch);
        h.frames = 2;
        write_stream_header(dir.file("s.iq.hdr"), h);
        CHECK_THROWS_AS(receive_file(dir.file("s.iq"), dir.file("s.iq.hdr"), dir.file("out.bin")),
                        ConsistencyError);
        h.frames = 1;
        h.sample_rate_hz = 2.0e6;
        write_stream_header(dir.file("s.iq.hdr"), h);
        CHECK_THROWS_AS(receive_file(dir.file("s.iq"), dir.file("s.iq.hdr"), dir.file("out.bin")),
                        ConsistencyError);
    }

    SUBCASE("corrupted second frame keeps the first") {
        const auto data = random_bytes(9216, 4);
        write_file(dir.file("in.bin"), data);
        ch.snr_db = std::numeric_limits<double>::infinity();
        transmit_file(dir.file("in.bin"), dir.file("s.iq"), cfg, ch);
        auto iq = read_iq(dir.file("s.iq"));
        const std::size_t second = 123 + 22500;
        std::mt19937_64 rng(5);
        std::normal_distribution<double> g(0.0, 1.0);
        for (std::size_t i = second; i < iq.size(); ++i) {
            iq[i] = {g(rng), g(rng)};
        }
        write_iq(dir.file("s.iq"), iq);
        try {
            receive_file(dir.file("s.iq"), dir.file("s.iq.hdr"), dir.file("out.bin"));
            FAIL("expected PartialOutputError");
        } catch (const PartialOutputError& e) {
            CHECK(e.frame_index() == 1);
        }
        const auto out = read_file(dir.file("out.bin"));
        CHECK(out == std::vector<char>(data.begin(), data.begin() + 4608));
    }
}

TEST_CASE("integrate-and-dump recovers the oversampling processing gain") {
    // paired frames: same payload seeds, Es/N0 10 dB, measured from equalised symbols
    auto mean_snr = [](int sps) {
        ExperimentConfig c;
        c.sps = sps;
        c.snr_axis = SnrAxis::EsN0;
        const auto model = build_link_model(c);
        double acc = 0.0;
        for (std::uint64_t s = 0; s < 8; ++s) {
            const auto o = simulate_frame(c, model, 10.0, 100 + s);
            REQUIRE(!o.sync_failed);
            SymbolIndices ref;
            for (const auto& d : o.frame.data) {
                ref.insert(ref.end(), d.begin(), d.end());
            }
            acc += rx::measure_snr(o.rx.diagnostics.equalized_symbols, ref, model.constellation);
        }
        return acc / 8.0;
    };
    const double s1 = mean_snr(1);
    const double s8 = mean_snr(8);
    CHECK(std::abs(s1 - s8) < 0.1);
    CHECK(std::abs(s1 - 10.0) < 0.3);
}
