#pragma once

#include <vector>

#include "ambiup/audio.hpp"

namespace ambiup {

/// sqrt(3) gain applied to the X/Y dipole channels when encoding a source.
inline constexpr double kDipoleGain = 1.7320508075688772935274463415059;

/// Encodes a mono source at azimuth theta through an Ambisonic IR triple:
///   W = IR_W * S,  X = (IR_X * S) cos(theta) sqrt(3),  Y = (IR_Y * S) sin(theta) sqrt(3)
/// where * is full linear convolution; the output keeps the convolution tail,
/// so its length is len(S) + len(IR) - 1.
BFormat encode_source(const AudioBuffer& source, const AmbisonicIR& ir, Azimuth theta);

/// Element-wise sum of B-format contributions; shorter inputs are zero-padded
/// to the longest. All inputs must share a sample rate.
BFormat mix_bformat(const std::vector<BFormat>& contributions);

/// Renders a virtual speaker at azimuth theta:  Y(theta) = W + X cos(theta) + Y sin(theta).
AudioBuffer decode_polygon(const BFormat& bf, Azimuth theta);

/// Stereo render from two virtual speakers (L first).
AudioBuffer decode_stereo(const BFormat& bf, Azimuth theta_l, Azimuth theta_r);

}  // namespace ambiup
