#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace mslink {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

/// One bit per element, values 0 or 1.
using Bits = std::vector<std::uint8_t>;

/// Zero-based constellation index: 0..3 stand for P1..P4.
using SymbolIndex = std::uint8_t;
using SymbolIndices = std::vector<SymbolIndex>;

} // namespace mslink
