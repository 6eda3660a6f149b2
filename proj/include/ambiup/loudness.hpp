#pragma once

#include "ambiup/audio.hpp"

namespace ambiup {

/// Integrated loudness in LUFS per ITU-R BS.1770-4: K-weighting (shelf +
/// high-pass designed parametrically, exact at 48 kHz and consistent at other
/// rates), 400 ms blocks with 75% overlap, -70 LUFS absolute gate and -10 LU
/// relative gate. Channel weights are 1 (horizontal setups only).
/// Throws if no block passes the absolute gate (silence) or the audio is
/// shorter than one block.
double integrated_loudness(const AudioBuffer& audio);

/// Scales by a single gain so the integrated loudness hits the target.
AudioBuffer lufs_normalize(const AudioBuffer& audio, double target_lufs = -24.0);

}  // namespace ambiup
