#include "ambiup/ambisonic.hpp"

#include <cmath>
#include <stdexcept>

#include "ambiup/fft.hpp"

namespace ambiup {

BFormat encode_source(const AudioBuffer& source, const AmbisonicIR& ir, Azimuth theta) {
    source.validate();
    ir.validate();
    if (!source.is_mono())
        throw std::invalid_argument("encode_source: source must be mono");
    if (source.sample_rate != ir.sample_rate)
        throw std::invalid_argument("encode_source: source/IR sample rates differ");
    if (source.num_samples() == 0)
        throw std::invalid_argument("encode_source: empty source");

    const auto& s = source.channels[0];
    std::vector<double> w = fft_convolve(s, ir.w);
    std::vector<double> x = fft_convolve(s, ir.x);
    std::vector<double> y = fft_convolve(s, ir.y);

    const double gx = std::cos(theta.radians) * kDipoleGain;
    const double gy = std::sin(theta.radians) * kDipoleGain;
    for (auto& v : x) v *= gx;
    for (auto& v : y) v *= gy;

    return BFormat(source.sample_rate, std::move(w), std::move(x), std::move(y));
}

BFormat mix_bformat(const std::vector<BFormat>& contributions) {
    if (contributions.empty())
        throw std::invalid_argument("mix_bformat: empty contribution list");
    const int rate = contributions[0].sample_rate;
    std::size_t len = 0;
    for (const auto& bf : contributions) {
        bf.validate();
        if (bf.sample_rate != rate)
            throw std::invalid_argument("mix_bformat: sample rates differ");
        len = std::max(len, bf.num_samples());
    }

    BFormat out;
    out.sample_rate = rate;
    out.w.assign(len, 0.0);
    out.x.assign(len, 0.0);
    out.y.assign(len, 0.0);
    for (const auto& bf : contributions) {
        for (std::size_t i = 0; i < bf.w.size(); ++i) out.w[i] += bf.w[i];
        for (std::size_t i = 0; i < bf.x.size(); ++i) out.x[i] += bf.x[i];
        for (std::size_t i = 0; i < bf.y.size(); ++i) out.y[i] += bf.y[i];
    }
    return out;
}

AudioBuffer decode_polygon(const BFormat& bf, Azimuth theta) {
    bf.validate();
    const double c = std::cos(theta.radians);
    const double s = std::sin(theta.radians);
    std::vector<double> out(bf.num_samples());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = bf.w[i] + bf.x[i] * c + bf.y[i] * s;
    return AudioBuffer::mono(std::move(out), bf.sample_rate);
}

AudioBuffer decode_stereo(const BFormat& bf, Azimuth theta_l, Azimuth theta_r) {
    AudioBuffer left = decode_polygon(bf, theta_l);
    AudioBuffer right = decode_polygon(bf, theta_r);
    return AudioBuffer::stereo(std::move(left.channels[0]), std::move(right.channels[0]),
                               bf.sample_rate);
}

}  // namespace ambiup
