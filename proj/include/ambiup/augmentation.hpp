#pragma once

#include <array>
#include <optional>

#include "ambiup/audio.hpp"
#include "ambiup/rng.hpp"

namespace ambiup {

/// One second-order IIR section, direct form I. Designs follow the usual
/// audio-EQ cookbook forms.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;  // a0 normalized to 1

    static Biquad peaking(double f0, double gain_db, double q, double rate);
    static Biquad low_shelf(double f0, double gain_db, double slope, double rate);
    static Biquad high_shelf(double f0, double gain_db, double slope, double rate);

    std::vector<double> process(const std::vector<double>& in) const;
    /// Complex magnitude response at frequency f.
    double magnitude_at(double f, double rate) const;
};

/// Stage parameters for the four per-track augmentations. Each stage fires
/// independently with `probability`.
struct AugmentationChain {
    double probability = 0.7;
    double gain_min_db = -10.0, gain_max_db = 10.0;
    double air_min_m = 0.1, air_max_m = 10.0;
    double eq_min_db = -12.0, eq_max_db = 12.0;
    double transition_min_db = -24.0, transition_max_db = 6.0;
    double transition_min_s = 0.2, transition_max_s = 6.0;

    void validate() const;
};

/// All random decisions for one pass of the chain, drawn up front so the same
/// draws can be replayed on both sides of a stereo stem.
struct ChainDraws {
    std::optional<double> gain_db;                 // stage skipped when empty
    std::optional<double> air_distance_m;
    std::optional<std::array<double, 7>> eq_gains_db;
    struct Transition {
        double gain_db;
        double duration_s;
        double start_fraction;  // of the available start range [0, len - D]
    };
    std::optional<Transition> transition;
};

ChainDraws draw_chain(const AugmentationChain& chain, Pcg64& rng);

// Deterministic, parameterized forms of each stage. These are what the chain
// replays; tests pin exact parameters through them.
AudioBuffer gain_aug_with(const AudioBuffer& track, double gain_db);
AudioBuffer air_absorption_with(const AudioBuffer& track, double distance_m);
AudioBuffer seven_band_eq_with(const AudioBuffer& track, const std::array<double, 7>& gains_db);
AudioBuffer gain_transition_with(const AudioBuffer& track, double gain_db, double duration_s,
                                 double start_fraction);

// Stochastic stages: fire with probability chain.probability, else identity.
AudioBuffer gain_aug(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng);
AudioBuffer air_absorption(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng);
AudioBuffer seven_band_eq(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng);
AudioBuffer gain_transition(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng);

/// Applies the four stages in order: gain, air absorption, EQ, gain transition.
AudioBuffer apply_chain(const AudioBuffer& track, const AugmentationChain& chain, Pcg64& rng);
AudioBuffer apply_chain_with(const AudioBuffer& track, const ChainDraws& draws);

/// Atmospheric attenuation in dB/m at 20 degC / 70% RH for the eight octave
/// bands 125 Hz .. 16 kHz; log-interpolated between centers, clamped outside.
double air_absorption_db_per_m(double freq_hz);

}  // namespace ambiup
