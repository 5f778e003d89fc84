#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mslink/error.hpp"
#include "mslink/harness.hpp"

namespace py = pybind11;
using namespace mslink;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

CArray to_numpy(const CVec& v) {
    CArray out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

CVec from_numpy(const CArray& a) {
    if (a.ndim() != 1) {
        throw DomainError("expected a 1-D complex array");
    }
    return {a.data(), a.data() + a.size()};
}

py::array_t<std::uint8_t> bits_to_numpy(const Bits& b) {
    py::array_t<std::uint8_t> out(static_cast<py::ssize_t>(b.size()));
    std::copy(b.begin(), b.end(), out.mutable_data());
    return out;
}

Bits bits_from(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    return {a.data(), a.data() + a.size()};
}

py::dict diagnostics_dict(const rx::RxDiagnostics& d) {
    py::dict out;
    out["frame_start"] = d.sync.frame_start;
    out["peak_metric"] = d.sync.peak_metric;
    out["cfo_estimate"] = d.cfo_estimate;
    out["cfo_cp_estimate"] = d.cfo_cp_estimate;
    out["evm_percent"] = d.evm_percent;
    out["snr_estimate_db"] = d.snr_estimate_db;
    out["equalized_symbols"] = to_numpy(d.equalized_symbols);
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Metasurface QPSK link simulator";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto domain = py::register_exception<DomainError>(m, "DomainError", error.ptr());
    py::register_exception<AliasingError>(m, "AliasingError", domain.ptr());
    py::register_exception<SingularityError>(m, "SingularityError", error.ptr());
    py::register_exception<InfeasibleError>(m, "InfeasibleError", error.ptr());
    py::register_exception<FramingError>(m, "FramingError", error.ptr());
    py::register_exception<SyncNotFoundError>(m, "SyncNotFoundError", error.ptr());
    py::register_exception<DegeneratePilotError>(m, "DegeneratePilotError", error.ptr());
    py::register_exception<SingularChannelError>(m, "SingularChannelError", error.ptr());
    py::register_exception<InterpolationError>(m, "InterpolationError", error.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<IoError>(m, "IoError", error.ptr());
    py::register_exception<ConsistencyError>(m, "ConsistencyError", error.ptr());
    py::register_exception<PartialOutputError>(m, "PartialOutputError", error.ptr());

    m.attr("SYNC_LEN") = tx::kDefaultLayout.sync_len;
    m.attr("FFT_LEN") = tx::kDefaultLayout.fft_len;
    m.attr("CP_LEN") = tx::kDefaultLayout.cp_len;
    m.attr("FRAME_SYMBOLS") = tx::kDefaultLayout.total_symbols();
    m.attr("PAYLOAD_BITS") = tx::kDefaultLayout.payload_bits();
    m.attr("SYMBOL_RATE_HZ") = tx::kSymbolRateHz;
    m.attr("DEFAULT_PILOT_SEED") = tx::kDefaultPilotSeed;

    // circuit
    py::class_<circuit::CircuitParams>(m, "CircuitParams")
        .def(py::init<>())
        .def_readwrite("r_series", &circuit::CircuitParams::r_series)
        .def_readwrite("l_top", &circuit::CircuitParams::l_top)
        .def_readwrite("l_bottom", &circuit::CircuitParams::l_bottom)
        .def_readwrite("z_air", &circuit::CircuitParams::z_air);
    py::class_<circuit::VaractorModel>(m, "VaractorModel")
        .def(py::init<>())
        .def_readwrite("c_zero", &circuit::VaractorModel::c_zero)
        .def_readwrite("v_junction", &circuit::VaractorModel::v_junction)
        .def_readwrite("exponent", &circuit::VaractorModel::exponent)
        .def_readwrite("c_min", &circuit::VaractorModel::c_min);

    m.def("varactor_capacitance", &circuit::varactor_capacitance, py::arg("v"),
          py::arg("model") = circuit::VaractorModel{});
    m.def("load_impedance", &circuit::load_impedance, py::arg("c"), py::arg("params") = circuit::CircuitParams{},
          py::arg("f") = 4.0e9);
    m.def("reflection_coefficient", &circuit::reflection_coefficient, py::arg("z_load"),
          py::arg("z_air") = circuit::CircuitParams{}.z_air);
    m.def("reflection_phase", &circuit::reflection_phase, py::arg("gamma"));

    py::class_<circuit::GammaLUT>(m, "GammaLUT")
        .def_property_readonly("frequency", &circuit::GammaLUT::frequency)
        .def_property_readonly("voltages",
                               [](const circuit::GammaLUT& l) {
                                   std::vector<double> v;
                                   for (const auto& p : l.points()) {
                                       v.push_back(p.voltage);
                                   }
                                   return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
                               })
        .def_property_readonly("gammas",
                               [](const circuit::GammaLUT& l) {
                                   CVec g;
                                   for (const auto& p : l.points()) {
                                       g.push_back(p.gamma);
                                   }
                                   return to_numpy(g);
                               })
        .def_property_readonly("relative_phase_deg",
                               [](const circuit::GammaLUT& l) {
                                   const auto& r = l.relative_phase_deg();
                                   return py::array_t<double>(static_cast<py::ssize_t>(r.size()), r.data());
                               })
        .def_property_readonly("span_deg", &circuit::GammaLUT::span_deg)
        .def("gamma_at", &circuit::GammaLUT::gamma_at)
        .def("__len__", &circuit::GammaLUT::size);

    m.def(
        "build_gamma_lut",
        [](double v_min, double v_max, double v_step, const circuit::CircuitParams& p,
           const circuit::VaractorModel& vm, double f) {
            return circuit::build_gamma_lut(vm, p, f, circuit::voltage_grid(v_min, v_max, v_step));
        },
        py::arg("v_min") = 0.0, py::arg("v_max") = 20.0, py::arg("v_step") = 0.01,
        py::arg("params") = circuit::CircuitParams{}, py::arg("model") = circuit::VaractorModel{},
        py::arg("f") = 4.0e9);
    m.def(
        "select_control_voltages",
        [](const circuit::GammaLUT& lut, const std::array<double, 4>& targets) {
            const auto s = circuit::select_control_voltages(lut, targets);
            return py::make_tuple(s.voltages, s.gammas, s.phase_error_deg);
        },
        py::arg("lut"), py::arg("targets") = std::array<double, 4>{0.0, 85.0, 170.0, 255.0},
        "Returns (voltages, gammas, phase errors) for the four states.");

    // array
    m.def(
        "aggregate_signal",
        [](const CArray& x, const std::string& mask, cplx gamma_static) {
            return to_numpy(array::aggregate_signal(from_numpy(x), array::make_array(mask, 8, 16, gamma_static)));
        },
        py::arg("gamma"), py::arg("mask") = "full", py::arg("gamma_static") = cplx{});
    m.def(
        "modulated_power_ratio_db",
        [](const std::string& a, const std::string& b) {
            return array::modulated_power_ratio_db(array::make_array(a), array::make_array(b));
        },
        py::arg("mask_a"), py::arg("mask_b"));

    // transmitter
    py::class_<tx::Frame>(m, "Frame")
        .def_property_readonly("sync", [](const tx::Frame& f) { return f.sync; })
        .def_property_readonly("pilot", [](const tx::Frame& f) { return f.pilot; })
        .def_property_readonly("data", [](const tx::Frame& f) { return f.data; })
        .def_property_readonly("payload_bits", [](const tx::Frame& f) { return bits_to_numpy(f.payload_bits); })
        .def("serialize", &tx::Frame::serialize);

    m.def("map_bits_to_symbols", [](const py::array_t<std::uint8_t>& b) { return tx::map_bits_to_symbols(bits_from(b)); });
    m.def("symbols_to_bits", [](const SymbolIndices& s) { return bits_to_numpy(tx::symbols_to_bits(s)); });
    m.def("build_sync_sequence", &tx::build_sync_sequence);
    m.def("build_pilot_sequence", &tx::build_pilot_sequence, py::arg("seed") = tx::kDefaultPilotSeed,
          py::arg("length") = 2048);
    m.def(
        "build_frame",
        [](const py::array_t<std::uint8_t>& payload, std::uint64_t pilot_seed) {
            return tx::build_frame(bits_from(payload), tx::kDefaultLayout, pilot_seed);
        },
        py::arg("payload"), py::arg("pilot_seed") = tx::kDefaultPilotSeed);
    m.def(
        "synthesize_baseband",
        [](const tx::Frame& f, int sps, std::optional<std::array<cplx, 4>> points) {
            tx::Constellation c = tx::Constellation::ideal_qpsk();
            if (points) {
                c.points = *points;
            }
            return to_numpy(tx::synthesize_baseband(f, c, sps).samples);
        },
        py::arg("frame"), py::arg("sps") = 1, py::arg("points") = py::none());
    m.def(
        "synthesize_passband",
        [](const CArray& gamma, double sample_rate, double carrier_hz, double amplitude, double phase0) {
            tx::BasebandSignal g{from_numpy(gamma), sample_rate, 1};
            const auto p = tx::synthesize_passband(g, {carrier_hz, amplitude, phase0});
            return py::array_t<double>(static_cast<py::ssize_t>(p.size()), p.data());
        },
        py::arg("gamma"), py::arg("sample_rate"), py::arg("carrier_hz"), py::arg("amplitude") = 1.0,
        py::arg("phase0") = 0.0);

    // channel
    m.def(
        "apply_channel",
        [](const CArray& x, int sps, double snr_db, double cfo, std::size_t offset, cplx gain,
           std::vector<cplx> taps, std::uint64_t seed) {
            channel::ChannelConfig cfg;
            cfg.snr_db = snr_db;
            cfg.cfo_normalized = cfo;
            cfg.timing_offset = offset;
            cfg.complex_gain = gain;
            cfg.fir_taps = std::move(taps);
            cfg.seed = seed;
            tx::BasebandSignal s{from_numpy(x), tx::kSymbolRateHz * sps, sps};
            return to_numpy(channel::apply_channel(s, cfg).samples);
        },
        py::arg("samples"), py::arg("sps") = 1, py::arg("snr_db") = std::numeric_limits<double>::infinity(),
        py::arg("cfo") = 0.0, py::arg("timing_offset") = 0, py::arg("gain") = cplx{1.0, 0.0},
        py::arg("taps") = std::vector<cplx>{cplx{1.0, 0.0}}, py::arg("seed") = 1);

    // receiver
    m.def(
        "receive_frame",
        [](const CArray& x, int sps, std::uint64_t pilot_seed) {
            const tx::BasebandSignal s{from_numpy(x), tx::kSymbolRateHz * sps, sps};
            const auto r = rx::receive_frame(s, tx::kDefaultLayout, pilot_seed, tx::build_sync_sequence());
            return py::make_tuple(bits_to_numpy(r.bits), diagnostics_dict(r.diagnostics));
        },
        py::arg("samples"), py::arg("sps") = 1, py::arg("pilot_seed") = tx::kDefaultPilotSeed,
        "Returns (bits, diagnostics).");
    m.def(
        "estimate_cfo_cp",
        [](const CArray& symbols) { return rx::estimate_cfo_cp(from_numpy(symbols), tx::kDefaultLayout); },
        py::arg("frame_symbols"));
    m.def(
        "demodulate", [](const CArray& s) { return bits_to_numpy(rx::demodulate(from_numpy(s))); },
        py::arg("symbols"));
    m.def(
        "measure_snr",
        [](const CArray& eq, const SymbolIndices& ref) {
            return rx::measure_snr(from_numpy(eq), ref, tx::Constellation::ideal_qpsk());
        },
        py::arg("equalized"), py::arg("reference"));

    // experiments
    py::enum_<Mode>(m, "Mode").value("CONVENTIONAL", Mode::Conventional).value("METASURFACE", Mode::Metasurface);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_static(
            "load", [](const std::string& path) { return load_config(path); }, py::arg("path"))
        .def("set", &set_config_value, py::arg("key"), py::arg("value"))
        .def("validate", &ExperimentConfig::validate)
        .def_readwrite("mode", &ExperimentConfig::mode)
        .def_readwrite("mask", &ExperimentConfig::mask)
        .def_readwrite("snr_db", &ExperimentConfig::snr_db)
        .def_readwrite("frames_per_point", &ExperimentConfig::frames_per_point)
        .def_readwrite("base_seed", &ExperimentConfig::base_seed)
        .def_readwrite("sps", &ExperimentConfig::sps)
        .def_readwrite("phase_targets", &ExperimentConfig::phase_targets)
        .def_readwrite("amplitude_equalization", &ExperimentConfig::amplitude_equalization)
        .def_readwrite("target_ber", &ExperimentConfig::target_ber)
        .def_readwrite("threads", &ExperimentConfig::threads)
        .def_readwrite("cfo_normalized", &ExperimentConfig::cfo_normalized)
        .def_readwrite("timing_offset", &ExperimentConfig::timing_offset);

    py::class_<harness::BerRecord>(m, "BerRecord")
        .def_readonly("snr_db", &harness::BerRecord::snr_db)
        .def_readonly("bits", &harness::BerRecord::bits)
        .def_readonly("errors", &harness::BerRecord::errors)
        .def_readonly("ber", &harness::BerRecord::ber)
        .def_readonly("sync_failures", &harness::BerRecord::sync_failures)
        .def("__eq__", [](const harness::BerRecord& a, const harness::BerRecord& b) { return a == b; })
        .def("__repr__", [](const harness::BerRecord& r) {
            return "BerRecord(snr_db=" + std::to_string(r.snr_db) + ", errors=" + std::to_string(r.errors) +
                   ", bits=" + std::to_string(r.bits) + ")";
        });

    m.def("run_ber_sweep", &harness::run_ber_sweep, py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "compare_architectures",
        [](const ExperimentConfig& a, const ExperimentConfig& b) {
            harness::Comparison c;
            {
                py::gil_scoped_release release;
                c = harness::compare_architectures(a, b);
            }
            return py::make_tuple(c.a, c.b, c.gap_db);
        },
        py::arg("a"), py::arg("b"), "Returns (curve_a, curve_b, gap_db).");
    m.def("snr_at_ber", &harness::snr_at_ber, py::arg("curve"), py::arg("target_ber"));
    m.def("theoretical_qpsk_ber", &harness::theoretical_qpsk_ber, py::arg("ebn0_db"));
    m.def(
        "transmit_file",
        [](const std::string& in, const std::string& out, const ExperimentConfig& cfg, double snr_db, double cfo,
           std::size_t offset, std::vector<cplx> taps, std::uint64_t seed) {
            channel::ChannelConfig ch;
            ch.snr_db = snr_db;
            ch.cfo_normalized = cfo;
            ch.timing_offset = offset;
            ch.fir_taps = std::move(taps);
            ch.seed = seed;
            const auto h = harness::transmit_file(in, out, cfg, ch);
            return py::make_tuple(h.frames, h.pad_bits);
        },
        py::arg("in_path"), py::arg("out_path"), py::arg("config") = ExperimentConfig{},
        py::arg("snr_db") = std::numeric_limits<double>::infinity(), py::arg("cfo") = 0.0,
        py::arg("timing_offset") = 0, py::arg("taps") = std::vector<cplx>{cplx{1.0, 0.0}}, py::arg("seed") = 1,
        "Writes <out_path> and <out_path>.hdr; returns (frames, pad_bits).");
    m.def(
        "receive_file",
        [](const std::string& iq, const std::string& out, std::optional<std::string> header) {
            harness::receive_file(iq, header ? *header : harness::header_path_for(iq), out);
        },
        py::arg("iq_path"), py::arg("out_path"), py::arg("header_path") = py::none());
}
