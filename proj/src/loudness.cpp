#include "ambiup/loudness.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ambiup {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;
constexpr double kLoudnessOffset = -0.691;
constexpr double kAbsoluteGate = -70.0;
constexpr double kRelativeGateLu = -10.0;

struct BiquadCoeffs {
    double b0, b1, b2, a1, a2;
};

// Pre-filter stage 1: the spherical-head high shelf, bilinear design that
// reproduces the published 48 kHz coefficients exactly.
BiquadCoeffs k_shelf(double rate) {
    const double fc = 1681.9744509555319;
    const double gain_db = 3.999843853973347;
    const double q = 0.7071752369554196;
    const double k = std::tan(kPi * fc / rate);
    const double vh = std::pow(10.0, gain_db / 20.0);
    const double vb = std::pow(vh, 0.499666774155);
    const double a0 = 1.0 + k / q + k * k;
    return {(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0,
            (vh - vb * k / q + k * k) / a0, 2.0 * (k * k - 1.0) / a0,
            (1.0 - k / q + k * k) / a0};
}

// Pre-filter stage 2: the 38 Hz high-pass.
BiquadCoeffs k_highpass(double rate) {
    const double fc = 38.13547087602444;
    const double q = 0.5003270373238773;
    const double k = std::tan(kPi * fc / rate);
    const double den = 1.0 + k / q + k * k;
    return {1.0, -2.0, 1.0, 2.0 * (k * k - 1.0) / den, (1.0 - k / q + k * k) / den};
}

std::vector<double> filter_df1(const BiquadCoeffs& c, const std::vector<double>& in) {
    std::vector<double> out(in.size());
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double x0 = in[i];
        const double y0 = c.b0 * x0 + c.b1 * x1 + c.b2 * x2 - c.a1 * y1 - c.a2 * y2;
        out[i] = y0;
        x2 = x1;
        x1 = x0;
        y2 = y1;
        y1 = y0;
    }
    return out;
}

}  // namespace

double integrated_loudness(const AudioBuffer& audio) {
    audio.validate();
    const std::size_t block = static_cast<std::size_t>(std::llround(0.4 * audio.sample_rate));
    const std::size_t hop = block / 4;  // 75% overlap
    if (audio.num_samples() < block)
        throw std::runtime_error("integrated_loudness: audio shorter than one 400 ms block");

    const BiquadCoeffs shelf = k_shelf(audio.sample_rate);
    const BiquadCoeffs highpass = k_highpass(audio.sample_rate);
    std::vector<std::vector<double>> weighted;
    for (const auto& ch : audio.channels)
        weighted.push_back(filter_df1(highpass, filter_df1(shelf, ch)));

    const std::size_t n_blocks = (audio.num_samples() - block) / hop + 1;
    const std::size_t n_ch = weighted.size();
    // z[j][ch]: mean square of block j per channel.
    std::vector<std::vector<double>> z(n_blocks, std::vector<double>(n_ch));
    std::vector<double> block_loudness(n_blocks);
    for (std::size_t j = 0; j < n_blocks; ++j) {
        double sum_ch = 0.0;
        for (std::size_t c = 0; c < n_ch; ++c) {
            const double* x = weighted[c].data() + j * hop;
            double acc = 0.0;
            for (std::size_t i = 0; i < block; ++i) acc += x[i] * x[i];
            z[j][c] = acc / static_cast<double>(block);
            sum_ch += z[j][c];
        }
        block_loudness[j] = kLoudnessOffset + 10.0 * std::log10(sum_ch);
    }

    // Absolute gate.
    std::vector<std::size_t> passed;
    for (std::size_t j = 0; j < n_blocks; ++j)
        if (block_loudness[j] > kAbsoluteGate) passed.push_back(j);
    if (passed.empty())
        throw std::runtime_error("integrated_loudness: no block above the -70 LUFS gate (silence?)");

    auto gated_mean = [&](const std::vector<std::size_t>& idx) {
        double sum = 0.0;
        for (std::size_t c = 0; c < n_ch; ++c) {
            double acc = 0.0;
            for (std::size_t j : idx) acc += z[j][c];
            sum += acc / static_cast<double>(idx.size());
        }
        return sum;
    };

    // Relative gate at -10 LU below the absolute-gated level.
    const double relative_gate =
        kLoudnessOffset + 10.0 * std::log10(gated_mean(passed)) + kRelativeGateLu;
    std::vector<std::size_t> final_idx;
    for (std::size_t j : passed)
        if (block_loudness[j] > relative_gate) final_idx.push_back(j);
    if (final_idx.empty())
        throw std::runtime_error("integrated_loudness: every block fell below the relative gate");

    return kLoudnessOffset + 10.0 * std::log10(gated_mean(final_idx));
}

AudioBuffer lufs_normalize(const AudioBuffer& audio, double target_lufs) {
    const double measured = integrated_loudness(audio);
    const double gain = std::pow(10.0, (target_lufs - measured) / 20.0);
    AudioBuffer out = audio;
    for (auto& ch : out.channels)
        for (auto& v : ch) v *= gain;
    return out;
}

}  // namespace ambiup
