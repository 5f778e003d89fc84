#include "mslink/array.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mslink/error.hpp"

namespace mslink::array {

void ArrayConfig::validate() const {
    if (rows <= 0 || cols <= 0) {
        throw DomainError("array needs positive rows and cols");
    }
    if (mask.size() != static_cast<std::size_t>(rows * cols)) {
        throw DomainError("activation mask has " + std::to_string(mask.size()) + " entries, array has " +
                          std::to_string(rows * cols) + " cells");
    }
}

int ArrayConfig::active_cells() const {
    return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

std::vector<bool> parse_mask(const std::string& literal, int rows, int cols) {
    if (rows <= 0 || cols <= 0) {
        throw DomainError("array needs positive rows and cols");
    }
    const auto n = static_cast<std::size_t>(rows * cols);
    std::vector<bool> mask(n, false);
    if (literal == "full") {
        mask.assign(n, true);
    } else if (literal == "left-half" || literal == "right-half") {
        const bool left = literal == "left-half";
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                const bool in_left = c < cols / 2;
                mask[static_cast<std::size_t>(r * cols + c)] = left ? in_left : !in_left;
            }
        }
    } else {
        if (literal.size() != n) {
            throw ConfigError("mask '" + literal + "': expected full, left-half, right-half or a " +
                              std::to_string(n) + "-character bit-string");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (literal[i] != '0' && literal[i] != '1') {
                throw ConfigError("mask bit-string may only contain 0 and 1");
            }
            mask[i] = literal[i] == '1';
        }
    }
    return mask;
}

ArrayConfig make_array(const std::string& mask_literal, int rows, int cols, cplx gamma_static) {
    ArrayConfig cfg;
    cfg.rows = rows;
    cfg.cols = cols;
    cfg.mask = parse_mask(mask_literal, rows, cols);
    cfg.gamma_static = gamma_static;
    return cfg;
}

cplx aggregate_reflection(cplx gamma_mod, const ArrayConfig& cfg) {
    const double active = cfg.active_cells();
    const double inactive = cfg.total_cells() - active;
    const cplx sum = active * gamma_mod + inactive * cfg.gamma_static;
    return cfg.full_array_unity ? sum / static_cast<double>(cfg.total_cells()) : sum;
}

CVec aggregate_signal(std::span<const cplx> gamma_mod, const ArrayConfig& cfg) {
    cfg.validate();
    CVec out(gamma_mod.size());
    std::transform(gamma_mod.begin(), gamma_mod.end(), out.begin(),
                   [&](cplx g) { return aggregate_reflection(g, cfg); });
    return out;
}

double modulated_power_ratio_db(const ArrayConfig& a, const ArrayConfig& b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw DomainError("power ratio needs arrays of identical dimensions");
    }
    if (b.active_cells() == 0) {
        throw DomainError("reference array has no active cells");
    }
    if (a.active_cells() == 0) {
        return -std::numeric_limits<double>::infinity();
    }
    return 20.0 * std::log10(static_cast<double>(a.active_cells()) / b.active_cells());
}

} // namespace mslink::array
