#include "ambiup/audio.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace ambiup {

AudioBuffer::AudioBuffer(int rate, std::vector<std::vector<double>> data)
    : sample_rate(rate), channels(std::move(data)) {
    validate();
}

AudioBuffer AudioBuffer::mono(std::vector<double> samples, int rate) {
    AudioBuffer buf;
    buf.sample_rate = rate;
    buf.channels.push_back(std::move(samples));
    buf.validate();
    return buf;
}

AudioBuffer AudioBuffer::stereo(std::vector<double> left, std::vector<double> right, int rate) {
    AudioBuffer buf;
    buf.sample_rate = rate;
    buf.channels.push_back(std::move(left));
    buf.channels.push_back(std::move(right));
    buf.validate();
    return buf;
}

double AudioBuffer::duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(num_samples()) / sample_rate : 0.0;
}

void AudioBuffer::validate() const {
    if (sample_rate <= 0) throw std::invalid_argument("AudioBuffer: sample_rate must be positive");
    if (channels.empty()) throw std::invalid_argument("AudioBuffer: needs at least one channel");
    const std::size_t len = channels[0].size();
    for (const auto& ch : channels) {
        if (ch.size() != len)
            throw std::invalid_argument("AudioBuffer: channel lengths differ");
    }
}

double Azimuth::wrap(double theta) {
    const double two_pi = 6.283185307179586476925286766559;
    const double pi = 3.1415926535897932384626433832795;
    double t = std::fmod(theta + pi, two_pi);
    if (t < 0.0) t += two_pi;
    return t - pi;
}

double Azimuth::degrees() const { return radians * (180.0 / 3.1415926535897932384626433832795); }

BFormat::BFormat(int rate, std::vector<double> w_ch, std::vector<double> x_ch,
                 std::vector<double> y_ch)
    : sample_rate(rate), w(std::move(w_ch)), x(std::move(x_ch)), y(std::move(y_ch)) {
    validate();
}

void BFormat::validate() const {
    if (sample_rate <= 0) throw std::invalid_argument("BFormat: sample_rate must be positive");
    if (w.size() != x.size() || w.size() != y.size())
        throw std::invalid_argument("BFormat: W/X/Y lengths differ");
}

AmbisonicIR::AmbisonicIR(int rate, std::vector<double> w_ch, std::vector<double> x_ch,
                         std::vector<double> y_ch)
    : sample_rate(rate), w(std::move(w_ch)), x(std::move(x_ch)), y(std::move(y_ch)) {
    validate();
}

void AmbisonicIR::validate() const {
    if (sample_rate <= 0) throw std::invalid_argument("AmbisonicIR: sample_rate must be positive");
    if (w.empty()) throw std::invalid_argument("AmbisonicIR: empty impulse response");
    if (w.size() != x.size() || w.size() != y.size())
        throw std::invalid_argument("AmbisonicIR: channel lengths differ");
}

AudioBuffer downmix_mono(const AudioBuffer& stereo) {
    stereo.validate();
    if (stereo.num_channels() != 2)
        throw std::invalid_argument("downmix_mono: input must have exactly 2 channels");
    const auto& l = stereo.channels[0];
    const auto& r = stereo.channels[1];
    std::vector<double> mono(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) mono[i] = 0.5 * (l[i] + r[i]);
    return AudioBuffer::mono(std::move(mono), stereo.sample_rate);
}

}  // namespace ambiup
