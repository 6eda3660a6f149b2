#include "ambiup/augmentation.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "ambiup/fft.hpp"

namespace ambiup {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace

Biquad Biquad::peaking(double f0, double gain_db, double q, double rate) {
    const double a = std::pow(10.0, gain_db / 40.0);
    const double w0 = 2.0 * kPi * f0 / rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha / a;
    Biquad bq;
    bq.b0 = (1.0 + alpha * a) / a0;
    bq.b1 = -2.0 * c / a0;
    bq.b2 = (1.0 - alpha * a) / a0;
    bq.a1 = -2.0 * c / a0;
    bq.a2 = (1.0 - alpha / a) / a0;
    return bq;
}

Biquad Biquad::low_shelf(double f0, double gain_db, double slope, double rate) {
    const double a = std::pow(10.0, gain_db / 40.0);
    const double w0 = 2.0 * kPi * f0 / rate;
    const double c = std::cos(w0);
    const double alpha =
        std::sin(w0) / 2.0 * std::sqrt((a + 1.0 / a) * (1.0 / slope - 1.0) + 2.0);
    const double sq = 2.0 * std::sqrt(a) * alpha;
    const double a0 = (a + 1.0) + (a - 1.0) * c + sq;
    Biquad bq;
    bq.b0 = a * ((a + 1.0) - (a - 1.0) * c + sq) / a0;
    bq.b1 = 2.0 * a * ((a - 1.0) - (a + 1.0) * c) / a0;
    bq.b2 = a * ((a + 1.0) - (a - 1.0) * c - sq) / a0;
    bq.a1 = -2.0 * ((a - 1.0) + (a + 1.0) * c) / a0;
    bq.a2 = ((a + 1.0) + (a - 1.0) * c - sq) / a0;
    return bq;
}

Biquad Biquad::high_shelf(double f0, double gain_db, double slope, double rate) {
    const double a = std::pow(10.0, gain_db / 40.0);
    const double w0 = 2.0 * kPi * f0 / rate;
    const double c = std::cos(w0);
    const double alpha =
        std::sin(w0) / 2.0 * std::sqrt((a + 1.0 / a) * (1.0 / slope - 1.0) + 2.0);
    const double sq = 2.0 * std::sqrt(a) * alpha;
    const double a0 = (a + 1.0) - (a - 1.0) * c + sq;
    Biquad bq;
    bq.b0 = a * ((a + 1.0) + (a - 1.0) * c + sq) / a0;
    bq.b1 = -2.0 * a * ((a - 1.0) + (a + 1.0) * c) / a0;
    bq.b2 = a * ((a + 1.0) + (a - 1.0) * c - sq) / a0;
    bq.a1 = 2.0 * ((a - 1.0) - (a + 1.0) * c) / a0;
    bq.a2 = ((a + 1.0) - (a - 1.0) * c - sq) / a0;
    return bq;
}

std::vector<double> Biquad::process(const std::vector<double>& in) const {
    std::vector<double> out(in.size());
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double x0 = in[i];
        const double y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        out[i] = y0;
        x2 = x1;
        x1 = x0;
        y2 = y1;
        y1 = y0;
    }
    return out;
}

double Biquad::magnitude_at(double f, double rate) const {
    const std::complex<double> z = std::exp(std::complex<double>(0.0, -2.0 * kPi * f / rate));
    const std::complex<double> num = b0 + b1 * z + b2 * z * z;
    const std::complex<double> den = 1.0 + a1 * z + a2 * z * z;
    return std::abs(num / den);
}

void AugmentationChain::validate() const {
    if (probability < 0.0 || probability > 1.0)
        throw std::invalid_argument("AugmentationChain: probability outside [0, 1]");
    if (gain_min_db > gain_max_db || air_min_m > air_max_m || eq_min_db > eq_max_db ||
        transition_min_db > transition_max_db || transition_min_s > transition_max_s)
        throw std::invalid_argument("AugmentationChain: inverted range");
}

ChainDraws draw_chain(const AugmentationChain& chain, Pcg64& rng) {
    chain.validate();
    ChainDraws d;
    if (rng.uniform01() < chain.probability)
        d.gain_db = rng.uniform(chain.gain_min_db, chain.gain_max_db);
    if (rng.uniform01() < chain.probability)
        d.air_distance_m = rng.uniform(chain.air_min_m, chain.air_max_m);
    if (rng.uniform01() < chain.probability) {
        std::array<double, 7> g{};
        for (auto& v : g) v = rng.uniform(chain.eq_min_db, chain.eq_max_db);
        d.eq_gains_db = g;
    }
    if (rng.uniform01() < chain.probability) {
        ChainDraws::Transition t;
        t.gain_db = rng.uniform(chain.transition_min_db, chain.transition_max_db);
        t.duration_s = rng.uniform(chain.transition_min_s, chain.transition_max_s);
        t.start_fraction = rng.uniform01();
        d.transition = t;
    }
    return d;
}

AudioBuffer gain_aug_with(const AudioBuffer& track, double gain_db) {
    const double g = db_to_linear(gain_db);
    AudioBuffer out = track;
    for (auto& ch : out.channels)
        for (auto& v : ch) v *= g;
    return out;
}

namespace {

// ISO 9613-1 pure-tone attenuation at 20 degC, 70% RH, 101.325 kPa.
constexpr std::array<double, 8> kAirBandHz = {125.0,  250.0,  500.0,  1000.0,
                                              2000.0, 4000.0, 8000.0, 16000.0};
constexpr std::array<double, 8> kAirAlphaDbPerM = {
    0.00033499, 0.00112395, 0.00279109, 0.00497781,
    0.00903944, 0.02308577, 0.07763315, 0.28107276};

}  // namespace

double air_absorption_db_per_m(double freq_hz) {
    if (freq_hz <= kAirBandHz.front()) return kAirAlphaDbPerM.front();
    if (freq_hz >= kAirBandHz.back()) return kAirAlphaDbPerM.back();
    std::size_t i = 0;
    while (freq_hz > kAirBandHz[i + 1]) ++i;
    const double t = (std::log2(freq_hz) - std::log2(kAirBandHz[i])) /
                     (std::log2(kAirBandHz[i + 1]) - std::log2(kAirBandHz[i]));
    return kAirAlphaDbPerM[i] + t * (kAirAlphaDbPerM[i + 1] - kAirAlphaDbPerM[i]);
}

AudioBuffer air_absorption_with(const AudioBuffer& track, double distance_m) {
    track.validate();
    // Linear-phase FIR by frequency sampling: target magnitude on an FFT grid,
    // zero-phase IFFT, center, then Hann-window to the final tap count.
    const int taps = 511;
    const std::size_t grid = 2048;
    const double rate = track.sample_rate;

    std::vector<std::complex<double>> spec(grid);
    for (std::size_t k = 0; k <= grid / 2; ++k) {
        const double f = rate * static_cast<double>(k) / static_cast<double>(grid);
        const double att_db = air_absorption_db_per_m(f) * distance_m;
        spec[k] = std::pow(10.0, -att_db / 20.0);
    }
    for (std::size_t k = grid / 2 + 1; k < grid; ++k) spec[k] = spec[grid - k];
    fft_inplace(spec, true);

    std::vector<double> h(taps);
    const int half = taps / 2;
    for (int n = 0; n < taps; ++n) {
        const int m = n - half;  // zero-phase kernel centered on tap `half`
        const std::size_t idx = static_cast<std::size_t>((m + static_cast<int>(grid)) % grid);
        const double window = 0.5 * (1.0 + std::cos(kPi * static_cast<double>(m) / (half + 1)));
        h[n] = spec[idx].real() / static_cast<double>(grid) * window;
    }

    AudioBuffer out = track;
    for (auto& ch : out.channels) {
        std::vector<double> full = fft_convolve(ch, h);
        for (std::size_t i = 0; i < ch.size(); ++i) ch[i] = full[i + half];  // delay-compensated
    }
    return out;
}

AudioBuffer seven_band_eq_with(const AudioBuffer& track, const std::array<double, 7>& gains_db) {
    track.validate();
    const double rate = track.sample_rate;
    const std::array<Biquad, 7> cascade = {
        Biquad::low_shelf(100.0, gains_db[0], 1.0, rate),
        Biquad::peaking(200.0, gains_db[1], 1.0, rate),
        Biquad::peaking(400.0, gains_db[2], 1.0, rate),
        Biquad::peaking(800.0, gains_db[3], 1.0, rate),
        Biquad::peaking(1600.0, gains_db[4], 1.0, rate),
        Biquad::peaking(3200.0, gains_db[5], 1.0, rate),
        Biquad::high_shelf(6400.0, gains_db[6], 1.0, rate),
    };
    AudioBuffer out = track;
    for (auto& ch : out.channels)
        for (const auto& bq : cascade) ch = bq.process(ch);
    return out;
}

AudioBuffer gain_transition_with(const AudioBuffer& track, double gain_db, double duration_s,
                                 double start_fraction) {
    track.validate();
    if (track.duration_seconds() < 0.2)
        throw std::invalid_argument("gain_transition: track shorter than 0.2 s");
    const std::size_t len = track.num_samples();
    std::size_t ramp = static_cast<std::size_t>(std::llround(duration_s * track.sample_rate));
    if (ramp > len) ramp = len;
    if (ramp == 0) ramp = 1;
    const std::size_t start =
        static_cast<std::size_t>(std::llround(start_fraction * static_cast<double>(len - ramp)));

    AudioBuffer out = track;
    for (auto& ch : out.channels) {
        for (std::size_t i = start; i < len; ++i) {
            double db;
            if (i >= start + ramp - 1) {
                db = gain_db;
            } else {
                db = gain_db * static_cast<double>(i - start) / static_cast<double>(ramp - 1);
            }
            ch[i] *= db_to_linear(db);
        }
    }
    return out;
}

AudioBuffer gain_aug(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng) {
    chain.validate();
    if (rng.uniform01() >= chain.probability) return track;
    return gain_aug_with(track, rng.uniform(chain.gain_min_db, chain.gain_max_db));
}

AudioBuffer air_absorption(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng) {
    chain.validate();
    if (rng.uniform01() >= chain.probability) return track;
    return air_absorption_with(track, rng.uniform(chain.air_min_m, chain.air_max_m));
}

AudioBuffer seven_band_eq(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng) {
    chain.validate();
    if (rng.uniform01() >= chain.probability) return track;
    std::array<double, 7> g{};
    for (auto& v : g) v = rng.uniform(chain.eq_min_db, chain.eq_max_db);
    return seven_band_eq_with(track, g);
}

AudioBuffer gain_transition(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng) {
    chain.validate();
    if (rng.uniform01() >= chain.probability) return track;
    const double g = rng.uniform(chain.transition_min_db, chain.transition_max_db);
    const double d = rng.uniform(chain.transition_min_s, chain.transition_max_s);
    return gain_transition_with(track, g, d, rng.uniform01());
}

AudioBuffer apply_chain(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng) {
    return apply_chain_with(track, draw_chain(chain, rng));
}

AudioBuffer apply_chain_with(const AudioBuffer& track, const ChainDraws& draws) {
    AudioBuffer out = track;
    if (draws.gain_db) out = gain_aug_with(out, *draws.gain_db);
    if (draws.air_distance_m) out = air_absorption_with(out, *draws.air_distance_m);
    if (draws.eq_gains_db) out = seven_band_eq_with(out, *draws.eq_gains_db);
    if (draws.transition)
        out = gain_transition_with(out, draws.transition->gain_db, draws.transition->duration_s,
                                   draws.transition->start_fraction);
    return out;
}

}  // namespace ambiup
