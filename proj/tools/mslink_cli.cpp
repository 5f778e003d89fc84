#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "mslink/channel.hpp"
#include "mslink/config.hpp"
#include "mslink/error.hpp"
#include "mslink/harness.hpp"
#include "mslink/rx.hpp"

using namespace mslink;

namespace {

struct CommonArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string snr;
    std::optional<std::size_t> frames;
    std::string mode;
    std::string mask;
    std::vector<std::string> set;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_frames = true) {
    cmd->add_option("--config", a.config, "key = value experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "output path");
    cmd->add_option("--seed", a.seed, "base seed");
    cmd->add_option("--snr", a.snr, "comma-separated SNR list, dB");
    if (with_frames) {
        cmd->add_option("--frames", a.frames, "frames per SNR point");
    }
    cmd->add_option("--mode", a.mode, "conventional or metasurface")
        ->check(CLI::IsMember({"conventional", "metasurface"}));
    cmd->add_option("--mask", a.mask, "full, left-half, right-half or a bit-string");
    cmd->add_option("--set", a.set, "extra key=value overrides")->take_all();
}

ExperimentConfig resolve(const CommonArgs& a) {
    ExperimentConfig cfg = a.config.empty() ? ExperimentConfig{} : load_config(a.config);
    if (!a.mode.empty()) {
        cfg.mode = parse_mode(a.mode);
    }
    if (!a.mask.empty()) {
        cfg.mask = a.mask;
    }
    if (a.seed) {
        cfg.base_seed = *a.seed;
    }
    if (!a.snr.empty()) {
        cfg.snr_db = parse_double_list(a.snr);
    }
    if (a.frames) {
        cfg.frames_per_point = *a.frames;
    }
    for (const auto& kv : a.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot write '" + path + "'");
    }
    return os;
}

void report_failures(const std::vector<harness::BerRecord>& records, const std::string& label) {
    for (const auto& r : records) {
        if (r.sync_failures > 0) {
            std::cerr << label << "snr " << r.snr_db << " dB: " << r.sync_failures
                      << " frame(s) failed sync, counted as fully errored\n";
        }
    }
}

channel::ChannelConfig stream_channel(const ExperimentConfig& cfg, const CommonArgs& a) {
    channel::ChannelConfig ch;
    ch.snr_db = a.snr.empty() ? std::numeric_limits<double>::infinity()
                              : harness::channel_snr_db(cfg, cfg.snr_db.front());
    ch.cfo_normalized = cfg.cfo_normalized;
    ch.timing_offset = cfg.timing_offset;
    ch.complex_gain = cfg.complex_gain;
    ch.fir_taps = cfg.fir_taps;
    ch.seed = cfg.base_seed;
    return ch;
}

int run_ber_sweep(const CommonArgs& a) {
    const auto cfg = resolve(a);
    const auto records = harness::run_ber_sweep(cfg);
    report_failures(records, "");
    if (a.out.empty()) {
        harness::write_ber_csv(std::cout, records);
    } else {
        auto os = open_out(a.out);
        harness::write_ber_csv(os, records);
    }
    return 0;
}

int run_compare(const CommonArgs& a, const std::string& against_mask) {
    ExperimentConfig first = resolve(a);
    ExperimentConfig second = first;
    std::string name_a;
    std::string name_b;
    if (against_mask.empty()) {
        first.mode = Mode::Conventional;
        second.mode = Mode::Metasurface;
        name_a = "conventional";
        name_b = "metasurface";
    } else {
        second.mask = against_mask;
        name_a = first.mask;
        name_b = against_mask;
    }
    const auto cmp = harness::compare_architectures(first, second);
    report_failures(cmp.a, name_a + ": ");
    report_failures(cmp.b, name_b + ": ");
    const std::string prefix = a.out.empty() ? "compare" : a.out;
    {
        auto os = open_out(prefix + "_" + name_a + ".csv");
        harness::write_ber_csv(os, cmp.a);
    }
    {
        auto os = open_out(prefix + "_" + name_b + ".csv");
        harness::write_ber_csv(os, cmp.b);
    }
    std::cout << "gap at BER " << first.target_ber << ": " << cmp.gap_db << " dB (" << name_b << " minus "
              << name_a << ")\n";
    return 0;
}

int run_transmit(const CommonArgs& a, const std::string& in) {
    if (a.out.empty()) {
        throw ConfigError("transmit needs --out");
    }
    const auto cfg = resolve(a);
    const auto h = harness::transmit_file(in, a.out, cfg, stream_channel(cfg, a));
    std::cerr << "wrote " << h.frames << " frame(s), " << h.payload_bits << " payload bits, " << h.pad_bits
              << " pad bits\n";
    return 0;
}

int run_receive(const CommonArgs& a, const std::string& in, std::string header) {
    if (a.out.empty()) {
        throw ConfigError("receive needs --out");
    }
    const auto cfg = resolve(a);
    if (header.empty()) {
        header = harness::header_path_for(in);
    }
    harness::receive_file(in, header, a.out, cfg.receiver);
    return 0;
}

int run_gamma_curve(const CommonArgs& a) {
    const auto cfg = resolve(a);
    const auto lut = circuit::build_gamma_lut(cfg.varactor, cfg.circuit, cfg.frequency_hz,
                                              circuit::voltage_grid(cfg.v_min, cfg.v_max, cfg.v_step));
    const auto sel = circuit::select_control_voltages(lut, cfg.phase_targets);
    std::cerr << "span " << lut.span_deg() << " deg; control voltages";
    for (double v : sel.voltages) {
        std::cerr << ' ' << v;
    }
    std::cerr << '\n';
    if (a.out.empty()) {
        circuit::write_gamma_csv(std::cout, lut);
    } else {
        auto os = open_out(a.out);
        circuit::write_gamma_csv(os, lut);
    }
    return 0;
}

int run_constellation(const CommonArgs& a) {
    const auto cfg = resolve(a);
    const auto model = harness::build_link_model(cfg);
    const auto o = harness::simulate_frame(cfg, model, cfg.snr_db.front(), harness::frame_seed(cfg.base_seed, 0, 0));
    if (o.sync_failed) {
        throw SyncNotFoundError("frame failed sync; no symbols to dump");
    }
    std::cerr << "EVM " << o.rx.diagnostics.evm_percent << " %, SNR estimate "
              << o.rx.diagnostics.snr_estimate_db << " dB, " << o.errors << " bit errors\n";
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!a.out.empty()) {
        file = open_out(a.out);
        os = &file;
    }
    os->precision(std::numeric_limits<double>::max_digits10);
    *os << "re,im\n";
    for (const auto& s : o.rx.diagnostics.equalized_symbols) {
        *os << s.real() << ',' << s.imag() << '\n';
    }
    return 0;
}

// Detection means the threshold passed at the true frame start.
int run_sync_check(const CommonArgs& a) {
    const auto cfg = resolve(a);
    const auto model = harness::build_link_model(cfg);
    const auto& layout = tx::kDefaultLayout;
    const auto sync = tx::build_sync_sequence();
    const auto replica = rx::sync_replica(sync, model.sps);

    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!a.out.empty()) {
        file = open_out(a.out);
        os = &file;
    }
    *os << "snr_db,trials,detected,rate\n";
    for (std::size_t p = 0; p < cfg.snr_db.size(); ++p) {
        std::size_t detected = 0;
        for (std::size_t f = 0; f < cfg.frames_per_point; ++f) {
            const auto seed = harness::frame_seed(cfg.base_seed, p, f);
            Bits payload(layout.payload_bits());
            std::mt19937_64 rng(seed);
            for (auto& b : payload) {
                b = static_cast<std::uint8_t>(rng() >> 63);
            }
            const auto frame = tx::build_frame(payload, layout, cfg.pilot_seed);
            auto sig = tx::synthesize_baseband(frame, model.constellation, model.sps);
            sig.samples = array::aggregate_signal(sig.samples, model.surface);
            channel::ChannelConfig ch;
            ch.snr_db = harness::channel_snr_db(cfg, cfg.snr_db[p]);
            ch.cfo_normalized = cfg.cfo_normalized;
            ch.timing_offset = cfg.timing_offset;
            ch.complex_gain = cfg.complex_gain;
            ch.fir_taps = cfg.fir_taps;
            ch.seed = seed ^ 0x9e3779b97f4a7c15ULL;
            const auto rx_sig = channel::apply_channel(sig, ch);
            const std::size_t end = cfg.timing_offset + 2 * replica.size();
            const auto res = rx::scan_sync(rx_sig.samples, replica, 0, end, cfg.receiver.sync_threshold);
            detected += res.threshold_passed && res.frame_start == cfg.timing_offset;
        }
        *os << cfg.snr_db[p] << ',' << cfg.frames_per_point << ',' << detected << ','
            << static_cast<double>(detected) / static_cast<double>(cfg.frames_per_point) << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Metasurface QPSK link simulator"};
    app.require_subcommand(1);

    CommonArgs sweep_args, cmp_args, tx_args, rx_args, gamma_args, const_args, sync_args;
    std::string against_mask, tx_in, rx_in, rx_header;

    auto* sweep = app.add_subcommand("ber-sweep", "Monte-Carlo BER over an SNR list");
    add_common(sweep, sweep_args);

    auto* cmp = app.add_subcommand("compare", "conventional vs metasurface (or two masks); prints the BER gap");
    add_common(cmp, cmp_args);
    cmp->add_option("--against-mask", against_mask, "compare --mask against this mask instead of the two modes");

    auto* txc = app.add_subcommand("transmit", "frame a file into an IQ stream");
    add_common(txc, tx_args, false);
    txc->add_option("--in", tx_in, "input file")->required();

    auto* rxc = app.add_subcommand("receive", "decode an IQ stream back into a file");
    add_common(rxc, rx_args, false);
    rxc->add_option("--in", rx_in, "IQ file")->required();
    rxc->add_option("--header", rx_header, "stream header (default <in>.hdr)");

    auto* gamma = app.add_subcommand("gamma-curve", "write the reflection coefficient table");
    add_common(gamma, gamma_args, false);

    auto* cons = app.add_subcommand("constellation", "dump equalized symbols of one frame as re,im");
    add_common(cons, const_args, false);

    auto* syncc = app.add_subcommand("sync-check", "frame sync detection rate per SNR");
    add_common(syncc, sync_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sweep) {
            return run_ber_sweep(sweep_args);
        }
        if (*cmp) {
            return run_compare(cmp_args, against_mask);
        }
        if (*txc) {
            return run_transmit(tx_args, tx_in);
        }
        if (*rxc) {
            return run_receive(rx_args, rx_in, rx_header);
        }
        if (*gamma) {
            return run_gamma_curve(gamma_args);
        }
        if (*cons) {
            return run_constellation(const_args);
        }
        if (*syncc) {
            return run_sync_check(sync_args);
        }
    } catch (const PartialOutputError& e) {
        std::cerr << "error: " << e.what() << " (output holds frames before " << e.frame_index() << ")\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
