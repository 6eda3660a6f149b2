#pragma once

#include <string>

#include "ambiup/audio.hpp"
#include "ambiup/rng.hpp"

namespace ambiup {

/// Randomization ranges for impulse responses. Truncation and fadeout lengths
/// are drawn uniformly from these intervals (seconds).
struct IrRandomizeSpec {
    double truncate_min_s = 0.3;
    double truncate_max_s = 1.0;
    double fadeout_min_s = 0.05;
    double fadeout_max_s = 0.3;

    void validate() const;
};

/// Cuts all three channels at the same index; the duration is drawn uniformly
/// from [truncate_min_s, truncate_max_s]. An IR already shorter than the draw
/// is returned unchanged. Throws if the IR is shorter than truncate_min_s.
AmbisonicIR truncate_ir(const AmbisonicIR& ir, const IrRandomizeSpec& spec, Pcg64& rng);

/// Applies a half-Hann fade over the last F samples of every channel, F drawn
/// uniformly from [fadeout_min_s, fadeout_max_s]. Gains descend from 1 at the
/// fade start to exactly 0 at the last sample.
AmbisonicIR apply_fadeout(const AmbisonicIR& ir, const IrRandomizeSpec& spec, Pcg64& rng);

/// truncate_ir followed by apply_fadeout, drawing from one stream in that
/// order. This is the randomization applied per training pair.
AmbisonicIR randomize_ir(const AmbisonicIR& ir, const IrRandomizeSpec& spec, Pcg64& rng);

/// Deterministic synthetic IR for tests and demos: each channel is a unit
/// delta at t=0 plus exponentially decaying noise (about -60 dB at the end),
/// with mutually decorrelated noise across W/X/Y.
AmbisonicIR synth_test_ir(double duration_s, int sample_rate, Pcg64& rng);

/// Loads an Ambisonic IR from a 3- or 4-channel WAV. Four channels are read
/// as (W, X, Y, Z) and Z is dropped; three as (W, X, Y). Files at any other
/// rate than expected_rate are rejected (no resampling).
AmbisonicIR load_ir_wav(const std::string& path, int expected_rate);

}  // namespace ambiup
