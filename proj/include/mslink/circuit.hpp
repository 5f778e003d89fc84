#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "mslink/types.hpp"

namespace mslink::circuit {

/// Lumped elements of the unit-cell equivalent circuit: a series R-L1-C branch
/// in parallel with L2, seen from free space through Z0.
struct CircuitParams {
    double r_series = 8.0;        // ohms
    double l_top = 1.0e-9;        // henries, L1
    double l_bottom = 3.0e-9;     // henries, L2
    double z_air = 376.730313668; // ohms, Z0

    void validate() const;
};

/// Junction capacitance law C(v) = max(c_min, c_zero / (1 + v/v_junction)^exponent).
struct VaractorModel {
    double c_zero = 1.0e-12;  // farads at zero bias
    double v_junction = 1.0;  // volts
    double exponent = 0.5;    // grading coefficient
    double c_min = 0.3e-12;   // farads, saturation floor

    void validate() const;
};

struct GammaPoint {
    double voltage = 0.0;
    cplx gamma{};
    double phase_deg = 0.0; // quadrant-aware angle of gamma in [0, 360)
    double magnitude = 0.0;

    friend bool operator==(const GammaPoint&, const GammaPoint&) = default;
};

/// Voltage -> reflection coefficient table at one frequency, voltages strictly
/// increasing.
///
/// Besides the absolute phase of each point, the table exposes the *phase
/// excursion*: the unwrapped phase measured from the lowest-voltage point and
/// oriented so that it grows along the sweep. Control targets are expressed in
/// this relative frame, so a curve that crosses the 0/360 degree seam is still
/// usable.
class GammaLUT {
public:
    GammaLUT(double frequency_hz, std::vector<GammaPoint> points);

    double frequency() const noexcept { return frequency_; }
    const std::vector<GammaPoint>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    const GammaPoint& operator[](std::size_t i) const { return points_[i]; }

    /// Phase excursion per point, degrees; first entry is 0.
    const std::vector<double>& relative_phase_deg() const noexcept { return relative_phase_; }

    /// max - min of the phase excursion.
    double span_deg() const;

    /// Largest phase step between neighbouring grid points.
    double resolution_deg() const;

    /// Gamma at `v`; exact on grid points, linear interpolation of the complex
    /// value between them. Throws DomainError outside the grid.
    cplx gamma_at(double v) const;

    friend bool operator==(const GammaLUT&, const GammaLUT&) = default;

private:
    double frequency_;
    std::vector<GammaPoint> points_;
    std::vector<double> relative_phase_;
};

double varactor_capacitance(double v, const VaractorModel& model);

/// Z_l = jwL2 (jwL1 + 1/(jwC) + R) / (jwL2 + jwL1 + 1/(jwC) + R).
/// Throws SingularityError at the parallel resonance, where the denominator
/// collapses below 1e-9 of the summed branch magnitudes.
cplx load_impedance(double c, const CircuitParams& params, double f);

/// Gamma = (Z_l - Z0) / (Z_l + Z0).
cplx reflection_coefficient(cplx z_load, double z_air);

/// Angle of gamma in degrees on [0, 360). Throws DomainError for gamma == 0.
double reflection_phase(cplx gamma);

GammaLUT build_gamma_lut(const VaractorModel& model, const CircuitParams& params, double f,
                         std::span<const double> voltages);

/// lo, lo+step, ..., up to and including hi (within half a step).
std::vector<double> voltage_grid(double lo, double hi, double step);

struct ControlSelection {
    std::array<double, 4> voltages{};
    std::array<cplx, 4> gammas{};
    std::array<double, 4> phase_error_deg{}; // achieved minus target excursion
};

/// Nearest-excursion voltage for each target (ties go to the lower voltage).
/// Throws InfeasibleError if the targets spread wider than the curve spans.
ControlSelection select_control_voltages(const GammaLUT& lut,
                                         const std::array<double, 4>& target_phases_deg);

// CSV with header voltage_v,re_gamma,im_gamma,mag,phase_deg
void write_gamma_csv(std::ostream& os, const GammaLUT& lut);
GammaLUT read_gamma_csv(std::istream& is, double frequency_hz);

} // namespace mslink::circuit
