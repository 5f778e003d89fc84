#pragma once

#include <span>

#include "mslink/types.hpp"

namespace mslink::dsp {

/// Unnormalised forward DFT: X[k] = sum_n x[n] exp(-j 2 pi k n / N).
CVec fft(std::span<const cplx> x);

/// Inverse DFT including the 1/N factor, so ifft(fft(x)) == x.
CVec ifft(std::span<const cplx> X);

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

} // namespace mslink::dsp
