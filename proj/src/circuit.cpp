#include "mslink/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "mslink/error.hpp"

namespace mslink::circuit {

using std::numbers::pi;

void CircuitParams::validate() const {
    if (!(r_series >= 0.0) || !(l_top > 0.0) || !(l_bottom > 0.0) || !(z_air > 0.0)) {
        throw DomainError("circuit parameters need r_series >= 0 and positive l_top, l_bottom, z_air");
    }
}

void VaractorModel::validate() const {
    if (!(c_min > 0.0) || !(c_zero > c_min) || !(v_junction > 0.0) || !(exponent > 0.0)) {
        throw DomainError("varactor model needs c_zero > c_min > 0, v_junction > 0, exponent > 0");
    }
}

double varactor_capacitance(double v, const VaractorModel& model) {
    if (!(v >= 0.0)) {
        throw DomainError("varactor bias must be non-negative, got " + std::to_string(v));
    }
    const double c = model.c_zero / std::pow(1.0 + v / model.v_junction, model.exponent);
    return std::max(model.c_min, c);
}

cplx load_impedance(double c, const CircuitParams& params, double f) {
    if (!(c > 0.0) || !(f > 0.0)) {
        throw DomainError("load impedance needs positive capacitance and frequency");
    }
    const double w = 2.0 * pi * f;
    const cplx j{0.0, 1.0};
    const cplx shunt = j * w * params.l_bottom;
    const cplx branch = j * w * params.l_top + 1.0 / (j * w * c) + params.r_series;
    const cplx den = shunt + branch;
    const double scale = std::abs(shunt) + std::abs(branch);
    if (std::abs(den) < 1e-9 * scale) {
        throw SingularityError("unit cell at parallel resonance: load impedance diverges");
    }
    return shunt * branch / den;
}

cplx reflection_coefficient(cplx z_load, double z_air) {
    const cplx den = z_load + z_air;
    if (std::abs(den) <= 1e-12 * z_air) {
        throw SingularityError("z_load = -z_air makes the reflection coefficient undefined");
    }
    return (z_load - z_air) / den;
}

double reflection_phase(cplx gamma) {
    if (gamma == cplx{0.0, 0.0}) {
        throw DomainError("phase of a zero reflection coefficient is undefined");
    }
    double deg = std::atan2(gamma.imag(), gamma.real()) * 180.0 / pi;
    if (deg < 0.0) {
        deg += 360.0;
    }
    // -tiny + 360 rounds to 360
    if (deg >= 360.0) {
        deg = 0.0;
    }
    return deg;
}

GammaLUT::GammaLUT(double frequency_hz, std::vector<GammaPoint> points)
    : frequency_(frequency_hz), points_(std::move(points)) {
    if (points_.empty()) {
        throw DomainError("gamma table needs at least one point");
    }
    for (std::size_t i = 1; i < points_.size(); ++i) {
        if (!(points_[i].voltage > points_[i - 1].voltage)) {
            throw DomainError("gamma table voltages must be strictly increasing");
        }
    }
    relative_phase_.resize(points_.size());
    relative_phase_[0] = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        double step = points_[i].phase_deg - points_[i - 1].phase_deg;
        step -= 360.0 * std::round(step / 360.0);
        relative_phase_[i] = relative_phase_[i - 1] + step;
    }
    if (relative_phase_.back() < 0.0) {
        for (auto& p : relative_phase_) {
            p = -p;
        }
    }
}

double GammaLUT::span_deg() const {
    auto [lo, hi] = std::minmax_element(relative_phase_.begin(), relative_phase_.end());
    return *hi - *lo;
}

double GammaLUT::resolution_deg() const {
    double worst = 0.0;
    for (std::size_t i = 1; i < relative_phase_.size(); ++i) {
        worst = std::max(worst, std::abs(relative_phase_[i] - relative_phase_[i - 1]));
    }
    return worst;
}

cplx GammaLUT::gamma_at(double v) const {
    if (v < points_.front().voltage || v > points_.back().voltage) {
        throw DomainError("voltage " + std::to_string(v) + " V is outside the gamma table");
    }
    auto it = std::lower_bound(points_.begin(), points_.end(), v,
                               [](const GammaPoint& p, double x) { return p.voltage < x; });
    if (it->voltage == v) {
        return it->gamma;
    }
    const GammaPoint& hi = *it;
    const GammaPoint& lo = *(it - 1);
    const double t = (v - lo.voltage) / (hi.voltage - lo.voltage);
    return lo.gamma + t * (hi.gamma - lo.gamma);
}

GammaLUT build_gamma_lut(const VaractorModel& model, const CircuitParams& params, double f,
                         std::span<const double> voltages) {
    model.validate();
    params.validate();
    std::vector<GammaPoint> points;
    points.reserve(voltages.size());
    for (double v : voltages) {
        const double c = varactor_capacitance(v, model);
        const cplx g = reflection_coefficient(load_impedance(c, params, f), params.z_air);
        points.push_back({v, g, reflection_phase(g), std::abs(g)});
    }
    return GammaLUT(f, std::move(points));
}

std::vector<double> voltage_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) {
        throw DomainError("voltage grid needs step > 0 and hi >= lo");
    }
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5)) + 1;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = lo + static_cast<double>(i) * step;
    }
    return grid;
}

ControlSelection select_control_voltages(const GammaLUT& lut,
                                         const std::array<double, 4>& target_phases_deg) {
    auto [tlo, thi] = std::minmax_element(target_phases_deg.begin(), target_phases_deg.end());
    const double spread = *thi - *tlo;
    if (spread > lut.span_deg()) {
        std::ostringstream msg;
        msg << "phase targets spread " << spread << " deg but the reflection curve spans only "
            << lut.span_deg() << " deg";
        throw InfeasibleError(msg.str());
    }
    const auto& rel = lut.relative_phase_deg();
    ControlSelection out;
    for (std::size_t k = 0; k < 4; ++k) {
        std::size_t best = 0;
        double best_err = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < rel.size(); ++i) {
            const double err = std::abs(rel[i] - target_phases_deg[k]);
            if (err < best_err) {
                best_err = err;
                best = i;
            }
        }
        out.voltages[k] = lut[best].voltage;
        out.gammas[k] = lut[best].gamma;
        out.phase_error_deg[k] = rel[best] - target_phases_deg[k];
    }
    return out;
}

void write_gamma_csv(std::ostream& os, const GammaLUT& lut) {
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "voltage_v,re_gamma,im_gamma,mag,phase_deg\n";
    for (const auto& p : lut.points()) {
        os << p.voltage << ',' << p.gamma.real() << ',' << p.gamma.imag() << ',' << p.magnitude
           << ',' << p.phase_deg << '\n';
    }
    os.precision(old_precision);
}

GammaLUT read_gamma_csv(std::istream& is, double frequency_hz) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("voltage_v,re_gamma,im_gamma,mag,phase_deg", 0) != 0) {
        throw ConfigError("gamma CSV: missing header voltage_v,re_gamma,im_gamma,mag,phase_deg");
    }
    std::vector<GammaPoint> points;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        std::istringstream row(line);
        std::array<double, 5> v{};
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::string cell;
            if (!std::getline(row, cell, ',')) {
                throw ConfigError("gamma CSV line " + std::to_string(line_no) + ": expected 5 columns");
            }
            try {
                v[i] = std::stod(cell);
            } catch (const std::exception&) {
                throw ConfigError("gamma CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
        }
        points.push_back({v[0], cplx{v[1], v[2]}, v[4], v[3]});
    }
    return GammaLUT(frequency_hz, std::move(points));
}

} // namespace mslink::circuit
