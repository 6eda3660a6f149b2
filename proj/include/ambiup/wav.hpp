#pragma once

#include <string>

#include "ambiup/audio.hpp"

namespace ambiup {

/// Reads a RIFF/WAVE file. Accepts PCM 16-bit, PCM 24-bit and IEEE float
/// 32-bit data (plain or WAVE_FORMAT_EXTENSIBLE); anything else is rejected.
AudioBuffer read_wav(const std::string& path);

/// Writes all channels as interleaved IEEE float 32-bit samples.
void write_wav(const std::string& path, const AudioBuffer& audio);

}  // namespace ambiup
