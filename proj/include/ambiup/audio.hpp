#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ambiup {

/// Uniform container for sampled audio: channels x samples at a fixed rate.
/// Amplitudes are nominally in [-1, 1] but are never clipped internally.
struct AudioBuffer {
    int sample_rate = 0;
    std::vector<std::vector<double>> channels;

    AudioBuffer() = default;
    AudioBuffer(int rate, std::vector<std::vector<double>> data);

    static AudioBuffer mono(std::vector<double> samples, int rate);
    static AudioBuffer stereo(std::vector<double> left, std::vector<double> right, int rate);

    int num_channels() const { return static_cast<int>(channels.size()); }
    std::size_t num_samples() const { return channels.empty() ? 0 : channels[0].size(); }
    double duration_seconds() const;

    bool is_mono() const { return num_channels() == 1; }
    bool is_stereo() const { return num_channels() == 2; }

    /// Throws std::invalid_argument if channel lengths differ or the rate is
    /// not positive.
    void validate() const;
};

/// Horizontal source angle in radians, counterclockwise, wrapped to [-pi, pi).
/// Ties at +pi map to -pi so the wrap is idempotent.
struct Azimuth {
    double radians = 0.0;

    Azimuth() = default;
    explicit Azimuth(double theta) : radians(wrap(theta)) {}

    static double wrap(double theta);
    double degrees() const;
};

/// First-order Ambisonic signal without elevation: W (omni), X, Y channels of
/// equal length. Channel order is fixed as (W, X, Y) everywhere in this
/// toolkit, including on disk.
struct BFormat {
    int sample_rate = 0;
    std::vector<double> w;
    std::vector<double> x;
    std::vector<double> y;

    BFormat() = default;
    BFormat(int rate, std::vector<double> w_ch, std::vector<double> x_ch,
            std::vector<double> y_ch);

    std::size_t num_samples() const { return w.size(); }
    void validate() const;
};

/// Ambisonic impulse-response triple (W, X, Y), all the same length.
struct AmbisonicIR {
    int sample_rate = 0;
    std::vector<double> w;
    std::vector<double> x;
    std::vector<double> y;

    AmbisonicIR() = default;
    AmbisonicIR(int rate, std::vector<double> w_ch, std::vector<double> x_ch,
                std::vector<double> y_ch);

    std::size_t num_samples() const { return w.size(); }
    void validate() const;
};

/// Per-sample (L + R) / 2. Input must have exactly two channels.
AudioBuffer downmix_mono(const AudioBuffer& stereo);

}  // namespace ambiup
