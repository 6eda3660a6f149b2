#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ambiup/ambisonic.hpp"
#include "ambiup/audio.hpp"
#include "ambiup/augmentation.hpp"
#include "ambiup/ir_pipeline.hpp"
#include "ambiup/rng.hpp"

namespace ambiup {

/// Virtual azimuths of the paired stereo render. Kept pi radians apart so the
/// stereo downmix reproduces the W channel exactly.
inline constexpr double kVirtualLeftAzimuth = 0.39269908169872415480783042290994;  // pi/8

/// Where a stem was placed in the horizontal field. Stereo stems split into
/// two mono virtual sources at azimuth +- width/2; mono stems have width 0.
struct SourcePlacement {
    double azimuth = 0.0;       // radians in [-pi, pi)
    double width = 0.0;         // radians in [0, pi]
    std::size_t offset = 0;     // window start into the stem file, samples
};

/// One synthesized training example: the virtual stereo mix and its B-format
/// counterpart, equal length, with downmix_mono(stereo) == bformat.w.
struct TrainingPair {
    AudioBuffer stereo;
    BFormat bformat;
    std::size_t crop_offset = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ManifestRecord {
    std::string pair_id;
    std::vector<std::string> stem_paths;
    std::string ir_path;
    std::vector<SourcePlacement> placements;
    std::uint64_t seed = 0;
    std::size_t crop_offset = 0;
    std::string stereo_path;
    std::string bformat_path;
};

struct Manifest {
    int sample_rate = 0;
    std::vector<ManifestRecord> records;
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
};

struct CorpusConfig {
    std::string stem_dir;
    std::string ir_dir;
    std::string out_dir;
    double total_hours = 0.1;
    double pair_seconds = 8.0;
    int sample_rate = 44100;
    int stems_per_pair = 4;
    double validation_fraction = 0.10;
    int workers = 1;
    IrRandomizeSpec ir_spec;
    AugmentationChain chain;
};

struct PlacedEncoding {
    BFormat bformat;
    std::vector<SourcePlacement> placements;
};

/// Places each stem at a random azimuth (stereo stems as two virtual sources
/// at azimuth +- width/2 sharing one augmentation draw), encodes every virtual
/// source through the IR, sums the contributions and trims the mix to the
/// longest stem length.
PlacedEncoding place_and_encode(const std::vector<AudioBuffer>& stems, const AmbisonicIR& ir,
                                const AugmentationChain& chain, Pcg64& rng);

/// Decodes the virtual stereo pair at (pi/8, 9pi/8). Computed as W +- dipole
/// so (L + R) / 2 reproduces W up to a rounding error per sample.
AudioBuffer render_virtual_stereo(const BFormat& bf);

/// Identical window and a shared random gain (+-6 dB) applied to all five
/// channels, so the W-downmix identity survives the crop.
TrainingPair crop_pair(const TrainingPair& pair, std::size_t crop_len, Pcg64& rng);

/// Regenerates one pair from its manifest record (paths + seed). Byte-stable:
/// the randomized sub-streams are derived from the record seed alone.
TrainingPair synthesize_pair(const std::vector<std::string>& stem_paths,
                             const std::string& ir_path, std::uint64_t pair_seed,
                             const CorpusConfig& config,
                             std::vector<SourcePlacement>* placements_out = nullptr);

/// Synthesizes the corpus: audio pairs on disk, manifest.jsonl, split.json and
/// a corpus.json header documenting rate and B-format channel order.
Manifest synthesize_corpus(const CorpusConfig& config, std::uint64_t seed);

Manifest load_manifest(const std::string& corpus_dir);
TrainingPair load_pair(const Manifest& manifest, const ManifestRecord& record);

}  // namespace ambiup
