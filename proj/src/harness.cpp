#include "mslink/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "mslink/error.hpp"

namespace mslink::harness {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    std::mt19937_64 rng(ss);
    return rng();
}

Bits random_bits(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(derive_seed(seed, 1));
    Bits out(n);
    for (std::size_t i = 0; i < n; i += 64) {
        const std::uint64_t word = rng();
        for (std::size_t b = 0; b < 64 && i + b < n; ++b) {
            out[i + b] = static_cast<std::uint8_t>((word >> (63 - b)) & 1U);
        }
    }
    return out;
}

// Search window that leaves room for a whole frame after the sync start.
std::size_t sync_window_end(std::size_t rx_len, const tx::FrameLayout& layout, int sps) {
    const std::size_t frame = layout.total_symbols() * static_cast<std::size_t>(sps);
    const std::size_t sync = layout.sync_len * static_cast<std::size_t>(sps);
    if (rx_len < frame) {
        return rx_len;
    }
    return rx_len - frame + sync;
}

} // namespace

LinkModel build_link_model(const ExperimentConfig& cfg) {
    cfg.validate();
    LinkModel m;
    m.sps = cfg.effective_sps();
    cplx gamma_static = cfg.have_gamma_static ? cfg.gamma_static : cplx{};

    if (cfg.effective_constellation() == ConstellationSource::Ideal) {
        m.constellation = tx::Constellation::ideal_qpsk();
    } else {
        const auto grid = circuit::voltage_grid(cfg.v_min, cfg.v_max, cfg.v_step);
        const auto lut = circuit::build_gamma_lut(cfg.varactor, cfg.circuit, cfg.frequency_hz, grid);
        const auto voltages = cfg.have_control_voltages
                                  ? cfg.control_voltages
                                  : circuit::select_control_voltages(lut, cfg.phase_targets).voltages;
        tx::Constellation raw;
        for (std::size_t k = 0; k < 4; ++k) {
            raw.points[k] = lut.gamma_at(voltages[k]);
        }
        if (cfg.amplitude_equalization > 0.0) {
            const double rms = std::sqrt(raw.mean_power());
            for (auto& p : raw.points) {
                const double mag = std::abs(p);
                if (mag > 0.0) {
                    const double target = (1.0 - cfg.amplitude_equalization) * mag + cfg.amplitude_equalization * rms;
                    p *= target / mag;
                }
            }
        }
        const double power = raw.mean_power();
        if (!(power > 0.0)) {
            throw DomainError("metasurface constellation has zero power");
        }
        const double scale = 1.0 / std::sqrt(power);
        for (std::size_t k = 0; k < 4; ++k) {
            m.constellation.points[k] = raw.points[k] * scale;
        }
        if (!cfg.have_gamma_static) {
            gamma_static = lut.gamma_at(cfg.hold_voltage) * scale;
        }
    }
    m.surface = array::make_array(cfg.mask, cfg.rows, cfg.cols, gamma_static);
    return m;
}

std::uint64_t frame_seed(std::uint64_t base_seed, std::size_t point_index, std::size_t frame_index) {
    return base_seed + (static_cast<std::uint64_t>(point_index) << 20) + frame_index;
}

double channel_snr_db(const ExperimentConfig& cfg, double sweep_value) {
    if (cfg.snr_axis == SnrAxis::EsN0) {
        return sweep_value;
    }
    // two bits per QPSK symbol
    return sweep_value + 10.0 * std::log10(2.0);
}

FrameOutcome simulate_frame(const ExperimentConfig& cfg, const LinkModel& model, double sweep_value,
                            std::uint64_t seed) {
    const auto& layout = tx::kDefaultLayout;
    FrameOutcome out;
    out.payload = random_bits(seed, layout.payload_bits());
    out.frame = tx::build_frame(out.payload, layout, cfg.pilot_seed);

    tx::BasebandSignal sig = tx::synthesize_baseband(out.frame, model.constellation, model.sps);
    sig.samples = array::aggregate_signal(sig.samples, model.surface);

    channel::ChannelConfig ch;
    ch.snr_db = channel_snr_db(cfg, sweep_value);
    ch.cfo_normalized = cfg.cfo_normalized;
    ch.timing_offset = cfg.timing_offset;
    ch.complex_gain = cfg.complex_gain;
    ch.fir_taps = cfg.fir_taps;
    ch.seed = derive_seed(seed, 2);
    const tx::BasebandSignal rx_sig = channel::apply_channel(sig, ch);

    rx::RxOptions opt = cfg.receiver;
    opt.search_end = std::min(opt.search_end, sync_window_end(rx_sig.samples.size(), layout, model.sps));
    try {
        out.rx = rx::receive_frame(rx_sig, layout, cfg.pilot_seed, out.frame.sync, opt);
    } catch (const SyncNotFoundError&) {
        out.sync_failed = true;
    } catch (const SingularChannelError&) {
        out.sync_failed = true;
    }
    if (out.sync_failed) {
        out.errors = out.payload.size();
        return out;
    }
    for (std::size_t i = 0; i < out.payload.size(); ++i) {
        out.errors += out.payload[i] != out.rx.bits[i];
    }
    return out;
}

std::vector<BerRecord> run_ber_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const LinkModel model = build_link_model(cfg);
    const std::size_t points = cfg.snr_db.size();
    const std::size_t frames = cfg.frames_per_point;
    const std::size_t jobs = points * frames;

    std::vector<std::uint64_t> errors(jobs, 0);
    std::vector<std::uint8_t> failed(jobs, 0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (std::size_t j = next++; j < jobs; j = next++) {
            const std::size_t p = j / frames;
            const std::size_t f = j % frames;
            try {
                const auto o = simulate_frame(cfg, model, cfg.snr_db[p], frame_seed(cfg.base_seed, p, f));
                errors[j] = o.errors;
                failed[j] = o.sync_failed;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                next = jobs;
            }
        }
    };

    unsigned n_threads = cfg.threads != 0 ? cfg.threads : std::max(1U, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, jobs));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }

    const std::uint64_t bits_per_frame = tx::kDefaultLayout.payload_bits();
    std::vector<BerRecord> records(points);
    for (std::size_t p = 0; p < points; ++p) {
        auto& r = records[p];
        r.snr_db = cfg.snr_db[p];
        r.bits = bits_per_frame * frames;
        for (std::size_t f = 0; f < frames; ++f) {
            r.errors += errors[p * frames + f];
            r.sync_failures += failed[p * frames + f];
        }
        r.ber = static_cast<double>(r.errors) / static_cast<double>(r.bits);
    }
    return records;
}

double snr_at_ber(const std::vector<BerRecord>& curve, double target_ber) {
    if (!(target_ber > 0.0)) {
        throw InterpolationError("target BER must be positive");
    }
    auto log_ber = [](const BerRecord& r) {
        const double floor = 0.5 / static_cast<double>(std::max<std::uint64_t>(r.bits, 1));
        return std::log10(std::max(r.ber, floor));
    };
    const double t = std::log10(target_ber);
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const double y0 = log_ber(curve[i]);
        const double y1 = log_ber(curve[i + 1]);
        if (y0 >= t && t >= y1) {
            if (y0 == y1) {
                return curve[i].snr_db;
            }
            return curve[i].snr_db + (t - y0) / (y1 - y0) * (curve[i + 1].snr_db - curve[i].snr_db);
        }
    }
    std::ostringstream msg;
    msg << "target BER " << target_ber << " is not bracketed by the curve";
    throw InterpolationError(msg.str());
}

Comparison compare_architectures(const ExperimentConfig& a, const ExperimentConfig& b) {
    if (a.snr_db != b.snr_db) {
        throw ConfigError("compared configs must share the SNR grid");
    }
    Comparison c;
    c.a = run_ber_sweep(a);
    c.b = run_ber_sweep(b);
    c.gap_db = snr_at_ber(c.b, a.target_ber) - snr_at_ber(c.a, a.target_ber);
    return c;
}

double theoretical_qpsk_ber(double ebn0_db) {
    if (std::isnan(ebn0_db)) {
        throw DomainError("Eb/N0 must not be NaN");
    }
    // Q(sqrt(2x)) = erfc(sqrt(x)) / 2
    return 0.5 * std::erfc(std::sqrt(std::pow(10.0, ebn0_db / 10.0)));
}

void write_ber_csv(std::ostream& os, const std::vector<BerRecord>& records) {
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "snr_db,bits,errors,ber\n";
    for (const auto& r : records) {
        os << r.snr_db << ',' << r.bits << ',' << r.errors << ',' << r.ber << '\n';
    }
    os.precision(old_precision);
}

// ---------------------------------------------------------------- file I/O

std::string header_path_for(const std::string& iq_path) { return iq_path + ".hdr"; }

void write_stream_header(const std::string& path, const StreamHeader& h) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write stream header '" + path + "'");
    }
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "sample_rate_hz = " << h.sample_rate_hz << '\n'
        << "samples_per_symbol = " << h.samples_per_symbol << '\n'
        << "frames = " << h.frames << '\n'
        << "pad_bits = " << h.pad_bits << '\n'
        << "pilot_seed = " << h.pilot_seed << '\n'
        << "payload_bits = " << h.payload_bits << '\n';
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

StreamHeader read_stream_header(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open stream header '" + path + "'");
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        if (eq == std::string::npos) {
            throw ConsistencyError(path + ": malformed header line '" + line + "'");
        }
        std::istringstream k(line.substr(0, eq));
        std::istringstream v(line.substr(eq + 1));
        std::string key, value;
        k >> key;
        v >> value;
        kv[key] = value;
    }
    auto get = [&](const char* key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end() || it->second.empty()) {
            throw ConsistencyError(path + ": header is missing '" + key + "'");
        }
        return it->second;
    };
    auto num = [&](const char* key) {
        const std::string& s = get(key);
        std::size_t used = 0;
        try {
            const double v = std::stod(s, &used);
            if (used == s.size()) {
                return v;
            }
        } catch (const std::exception&) {
        }
        throw ConsistencyError(path + ": header value for '" + key + "' is not a number");
    };
    auto count = [&](const char* key) {
        const std::string& s = get(key);
        std::size_t used = 0;
        try {
            if (s[0] != '-') {
                const auto v = std::stoull(s, &used);
                if (used == s.size()) {
                    return static_cast<std::uint64_t>(v);
                }
            }
        } catch (const std::exception&) {
        }
        throw ConsistencyError(path + ": header value for '" + key + "' is not a count");
    };
    StreamHeader h;
    h.sample_rate_hz = num("sample_rate_hz");
    h.samples_per_symbol = static_cast<int>(count("samples_per_symbol"));
    h.frames = count("frames");
    h.pad_bits = count("pad_bits");
    h.pilot_seed = count("pilot_seed");
    h.payload_bits = count("payload_bits");
    return h;
}

namespace {

void check_header(const StreamHeader& h, std::size_t n_samples, const std::string& path) {
    const auto& layout = tx::kDefaultLayout;
    auto fail = [&](const std::string& why) { throw ConsistencyError(path + ": " + why); };
    if (h.samples_per_symbol < 1) {
        fail("samples_per_symbol must be >= 1");
    }
    const double expected_rate = tx::kSymbolRateHz * h.samples_per_symbol;
    if (!(std::abs(h.sample_rate_hz - expected_rate) <= 1e-9 * expected_rate)) {
        fail("sample_rate_hz does not match samples_per_symbol");
    }
    if (h.payload_bits % 8 != 0) {
        fail("payload_bits is not a whole number of bytes");
    }
    if (h.payload_bits + h.pad_bits != h.frames * layout.payload_bits()) {
        fail("payload_bits + pad_bits does not fill the declared frames");
    }
    if (h.frames > 0 && h.pad_bits >= layout.payload_bits()) {
        fail("pad_bits covers a whole frame");
    }
    const std::size_t need = h.frames * layout.total_symbols() * static_cast<std::size_t>(h.samples_per_symbol);
    if (n_samples < need) {
        fail("IQ stream holds " + std::to_string(n_samples) + " samples, header needs " + std::to_string(need));
    }
}

void write_bytes(const std::string& path, const Bits& bits, std::size_t n_bits) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write output file '" + path + "'");
    }
    std::vector<char> bytes(n_bits / 8);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        unsigned v = 0;
        for (std::size_t b = 0; b < 8; ++b) {
            v = (v << 1) | bits[8 * i + b];
        }
        bytes[i] = static_cast<char>(v);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xffU) << 24) | ((v & 0xff00U) << 8) | ((v >> 8) & 0xff00U) | (v >> 24);
    }
    return v;
}

} // namespace

void write_iq(const std::string& path, const CVec& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write IQ file '" + path + "'");
    }
    std::vector<std::uint32_t> words(2 * samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const float re = static_cast<float>(samples[i].real());
        const float im = static_cast<float>(samples[i].imag());
        words[2 * i] = to_little_endian(std::bit_cast<std::uint32_t>(re));
        words[2 * i + 1] = to_little_endian(std::bit_cast<std::uint32_t>(im));
    }
    out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

CVec read_iq(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw IoError("cannot open IQ file '" + path + "'");
    }
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size % 8 != 0) {
        throw ConsistencyError(path + ": size is not a whole number of float32 I/Q pairs");
    }
    in.seekg(0);
    std::vector<std::uint32_t> words(size / 4);
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(size));
    if (!in) {
        throw IoError("read failed for '" + path + "'");
    }
    CVec out(size / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float re = std::bit_cast<float>(to_little_endian(words[2 * i]));
        const float im = std::bit_cast<float>(to_little_endian(words[2 * i + 1]));
        out[i] = cplx{re, im};
    }
    return out;
}

StreamHeader transmit_file(const std::string& in_path, const std::string& out_path,
                           const ExperimentConfig& cfg, const channel::ChannelConfig& channel) {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open input file '" + in_path + "'");
    }
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failed for '" + in_path + "'");
    }

    const auto& layout = tx::kDefaultLayout;
    const LinkModel model = build_link_model(cfg);
    const std::size_t per_frame = layout.payload_bits();

    StreamHeader h;
    h.samples_per_symbol = model.sps;
    h.sample_rate_hz = tx::kSymbolRateHz * model.sps;
    h.pilot_seed = cfg.pilot_seed;
    h.payload_bits = bytes.size() * 8;
    h.frames = (h.payload_bits + per_frame - 1) / per_frame;
    h.pad_bits = h.frames * per_frame - h.payload_bits;

    Bits bits(h.frames * per_frame, 0);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const auto v = static_cast<unsigned char>(bytes[i]);
        for (std::size_t b = 0; b < 8; ++b) {
            bits[8 * i + b] = static_cast<std::uint8_t>((v >> (7 - b)) & 1U);
        }
    }

    tx::BasebandSignal stream;
    stream.samples_per_symbol = model.sps;
    stream.sample_rate = h.sample_rate_hz;
    stream.samples.reserve(h.frames * layout.total_symbols() * static_cast<std::size_t>(model.sps));
    for (std::size_t f = 0; f < h.frames; ++f) {
        const auto chunk = std::span<const std::uint8_t>(bits).subspan(f * per_frame, per_frame);
        const tx::Frame frame = tx::build_frame(chunk, layout, cfg.pilot_seed);
        const auto sig = tx::synthesize_baseband(frame, model.constellation, model.sps);
        const CVec g = array::aggregate_signal(sig.samples, model.surface);
        stream.samples.insert(stream.samples.end(), g.begin(), g.end());
    }
    const CVec out = h.frames > 0 ? channel::apply_channel(stream, channel).samples : CVec{};
    write_iq(out_path, out);
    write_stream_header(header_path_for(out_path), h);
    return h;
}

void receive_file(const std::string& iq_path, const std::string& header_path, const std::string& out_path,
                  const rx::RxOptions& options) {
    const StreamHeader h = read_stream_header(header_path);
    const tx::BasebandSignal sig{read_iq(iq_path), h.sample_rate_hz, h.samples_per_symbol};
    check_header(h, sig.samples.size(), header_path);

    const auto& layout = tx::kDefaultLayout;
    const auto sps = static_cast<std::size_t>(h.samples_per_symbol);
    const std::size_t frame_samples = layout.total_symbols() * sps;
    const std::size_t sync_samples = layout.sync_len * sps;
    const std::size_t slack = layout.cp_len * sps;
    const auto sync = tx::build_sync_sequence();

    Bits bits;
    bits.reserve(h.frames * layout.payload_bits());
    std::size_t prev_start = 0;
    for (std::size_t f = 0; f < h.frames; ++f) {
        rx::RxOptions opt = options;
        if (f == 0) {
            opt.search_begin = 0;
            opt.search_end = sig.samples.size() - h.frames * frame_samples + sync_samples;
        } else {
            const std::size_t expected = prev_start + frame_samples;
            opt.search_begin = expected - std::min(expected, slack);
            opt.search_end = std::min(sig.samples.size(), expected + slack + sync_samples);
        }
        try {
            const rx::RxResult r = rx::receive_frame(sig, layout, h.pilot_seed, sync, opt);
            prev_start = r.diagnostics.sync.frame_start;
            bits.insert(bits.end(), r.bits.begin(), r.bits.end());
        } catch (const Error& e) {
            write_bytes(out_path, bits, std::min<std::size_t>(bits.size(), h.payload_bits) / 8 * 8);
            throw PartialOutputError(f, "frame " + std::to_string(f) + ": " + e.what());
        }
    }
    write_bytes(out_path, bits, h.payload_bits);
}

} // namespace mslink::harness
