#pragma once

#include <span>
#include <string>
#include <vector>

#include "mslink/types.hpp"

namespace mslink::array {

/// Which cells of the surface modulate. Inactive cells hold a fixed bias and
/// reflect with `gamma_static`. All cells share one steering phase (receiver on
/// boresight), so only the active count matters for the aggregate.
struct ArrayConfig {
    int rows = 8;
    int cols = 16;
    std::vector<bool> mask = std::vector<bool>(128, true); // row-major
    cplx gamma_static{0.0, 0.0};
    bool full_array_unity = true; // normalise so a fully active array has unit gain

    void validate() const;
    int total_cells() const { return rows * cols; }
    int active_cells() const;
};

/// Parses `full`, `left-half`, `right-half`, or a row-major bit-string of
/// length rows*cols.
std::vector<bool> parse_mask(const std::string& literal, int rows, int cols);

ArrayConfig make_array(const std::string& mask_literal, int rows = 8, int cols = 16,
                       cplx gamma_static = {0.0, 0.0});

cplx aggregate_reflection(cplx gamma_mod, const ArrayConfig& cfg);

/// Applies aggregate_reflection sample by sample.
CVec aggregate_signal(std::span<const cplx> gamma_mod, const ArrayConfig& cfg);

/// 20 log10(N_active(a) / N_active(b)).
double modulated_power_ratio_db(const ArrayConfig& a, const ArrayConfig& b);

} // namespace mslink::array
