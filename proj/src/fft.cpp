#include "ambiup/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace ambiup {

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0) return;
    if ((n & (n - 1)) != 0) throw std::invalid_argument("fft_inplace: length must be a power of two");

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const double pi = 3.1415926535897932384626433832795;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * pi / static_cast<double>(len);
        const std::complex<double> wroot(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wroot;
            }
        }
    }
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

std::vector<double> fft_convolve(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("fft_convolve: empty input");
    const std::size_t out_len = a.size() + b.size() - 1;

    const std::size_t block = std::max<std::size_t>(next_pow2(4 * b.size()), 8);
    const std::size_t chunk = block - b.size() + 1;

    std::vector<std::complex<double>> bf(block, {0.0, 0.0});
    for (std::size_t i = 0; i < b.size(); ++i) bf[i] = b[i];
    fft_inplace(bf, false);

    std::vector<double> out(out_len, 0.0);
    std::vector<std::complex<double>> seg(block);
    const double inv_block = 1.0 / static_cast<double>(block);
    for (std::size_t start = 0; start < a.size(); start += chunk) {
        const std::size_t n = std::min(chunk, a.size() - start);
        std::fill(seg.begin(), seg.end(), std::complex<double>(0.0, 0.0));
        for (std::size_t i = 0; i < n; ++i) seg[i] = a[start + i];
        fft_inplace(seg, false);
        for (std::size_t i = 0; i < block; ++i) seg[i] *= bf[i];
        fft_inplace(seg, true);
        const std::size_t tail = std::min(n + b.size() - 1, out_len - start);
        for (std::size_t i = 0; i < tail; ++i) out[start + i] += seg[i].real() * inv_block;
    }
    return out;
}

}  // namespace ambiup
