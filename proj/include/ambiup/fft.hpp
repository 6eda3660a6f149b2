#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace ambiup {

/// In-place iterative radix-2 FFT. Length must be a power of two.
/// inverse=true applies the conjugate transform WITHOUT the 1/N scale.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

std::size_t next_pow2(std::size_t n);

/// Full linear convolution (length a + b - 1) via FFT overlap-add. The block
/// size is the smallest power of two >= 4 * len(b), so long impulse responses
/// run in O(N log N) while agreeing with direct convolution to ~1e-12.
std::vector<double> fft_convolve(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace ambiup
