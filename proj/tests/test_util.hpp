#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "ambiup/rng.hpp"

namespace ambiup::testutil {

inline double rel_error(const std::vector<double>& got, const std::vector<double>& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double d = got[i] - want[i];
        num += d * d;
        den += want[i] * want[i];
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

inline std::vector<double> random_vector(std::size_t n, Pcg64& rng, double amp = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-amp, amp);
    return v;
}

/// Direct O(N*M) convolution, the oracle for the FFT overlap-add path.
inline std::vector<double> naive_convolve(const std::vector<double>& a,
                                          const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

/// DFT by definition, the oracle for the loss module's FFT-based STFT.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = -two_pi * static_cast<double>(k) * static_cast<double>(i) /
                               static_cast<double>(n);
            acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

}  // namespace ambiup::testutil
