#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ambiup/dataset.hpp"
#include "ambiup/wav.hpp"
#include "test_util.hpp"

using namespace ambiup;
using namespace ambiup::testutil;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

AmbisonicIR delta_ir(int rate = 44100) { return AmbisonicIR(rate, {1.0}, {1.0}, {1.0}); }

AugmentationChain no_augmentation() {
    AugmentationChain chain;
    chain.probability = 0.0;
    return chain;
}

std::string file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

struct TempCorpus {
    fs::path root;
    CorpusConfig config;

    explicit TempCorpus(const std::string& tag, int n_stems = 3, double stem_seconds = 1.0) {
        root = fs::temp_directory_path() / ("ambiup_corpus_" + tag);
        fs::remove_all(root);
        fs::create_directories(root / "stems");
        fs::create_directories(root / "irs");
        const int rate = 44100;
        Pcg64 rng(1234);
        for (int i = 0; i < n_stems; ++i) {
            const auto n = static_cast<std::size_t>(stem_seconds * rate);
            if (i % 2 == 0) {
                write_wav((root / "stems" / ("stem" + std::to_string(i) + ".wav")).string(),
                          AudioBuffer::mono(random_vector(n, rng, 0.4), rate));
            } else {
                write_wav((root / "stems" / ("stem" + std::to_string(i) + ".wav")).string(),
                          AudioBuffer::stereo(random_vector(n, rng, 0.4),
                                              random_vector(n, rng, 0.4), rate));
            }
        }
        Pcg64 ir_rng(77);
        for (int i = 0; i < 2; ++i) {
            const AmbisonicIR ir = synth_test_ir(0.35 + 0.1 * i, rate, ir_rng);
            AudioBuffer buf;
            buf.sample_rate = rate;
            buf.channels = {ir.w, ir.x, ir.y};
            write_wav((root / "irs" / ("ir" + std::to_string(i) + ".wav")).string(), buf);
        }
        config.stem_dir = (root / "stems").string();
        config.ir_dir = (root / "irs").string();
        config.out_dir = (root / "out").string();
        config.pair_seconds = 0.5;
        config.total_hours = 6.0 * 0.5 / 3600.0;  // 6 pairs
        config.stems_per_pair = 2;
    }
    ~TempCorpus() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("wav float32 round trip and pcm readers") {
    const auto dir = fs::temp_directory_path() / "ambiup_wav_test";
    fs::create_directories(dir);
    Pcg64 rng(9);
    AudioBuffer buf = AudioBuffer::stereo(random_vector(500, rng, 0.9), random_vector(500, rng, 0.9),
                                          44100);
    const auto path = (dir / "f32.wav").string();
    write_wav(path, buf);
    const AudioBuffer back = read_wav(path);
    REQUIRE(back.num_channels() == 2);
    REQUIRE(back.num_samples() == 500);
    CHECK(back.sample_rate == 44100);
    CHECK(rel_error(back.channels[0], buf.channels[0]) < 1e-7);  // float32 quantization

    // Hand-built PCM16 file.
    {
        std::string b;
        auto u32 = [&](std::uint32_t v) {
            for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        };
        auto u16 = [&](std::uint16_t v) {
            b.push_back(static_cast<char>(v & 0xFF));
            b.push_back(static_cast<char>((v >> 8) & 0xFF));
        };
        b += "RIFF";
        u32(36 + 8);
        b += "WAVEfmt ";
        u32(16);
        u16(1);      // PCM
        u16(1);      // mono
        u32(44100);
        u32(44100 * 2);
        u16(2);
        u16(16);
        b += "data";
        u32(8);
        for (std::int16_t v : {std::int16_t(16384), std::int16_t(-16384), std::int16_t(0),
                               std::int16_t(32767)})
            u16(static_cast<std::uint16_t>(v));
        std::ofstream f((dir / "pcm16.wav").string(), std::ios::binary);
        f.write(b.data(), static_cast<std::streamsize>(b.size()));
    }
    const AudioBuffer pcm = read_wav((dir / "pcm16.wav").string());
    CHECK(pcm.channels[0][0] == doctest::Approx(0.5));
    CHECK(pcm.channels[0][1] == doctest::Approx(-0.5));
    CHECK(pcm.channels[0][3] == doctest::Approx(32767.0 / 32768.0));
    fs::remove_all(dir);
}

TEST_CASE("place_and_encode axis identities") {
    const int rate = 44100;
    Pcg64 rng(17);
    const auto chain = no_augmentation();

    SUBCASE("single mono stem at a forced azimuth of zero") {
        // Draw azimuths until one lands near zero is fragile; instead encode
        // directly and compare against place_and_encode at the drawn azimuth.
        std::vector<AudioBuffer> stems = {AudioBuffer::mono(random_vector(200, rng, 0.5), rate)};
        Pcg64 r1(5), r2(5);
        const PlacedEncoding placed = place_and_encode(stems, delta_ir(rate), chain, r1);
        const double az = r2.uniform(-kPi, kPi);
        CHECK(placed.placements[0].azimuth == doctest::Approx(az));
        const BFormat direct = encode_source(stems[0], delta_ir(rate), Azimuth(az));
        CHECK(rel_error(placed.bformat.x, std::vector<double>(direct.x.begin(),
                                                              direct.x.begin() + 200)) < 1e-12);
        // x/w ratio encodes the azimuth: x = sqrt(3) cos(az) w.
        for (std::size_t i = 0; i < 200; ++i)
            CHECK(placed.bformat.x[i] ==
                  doctest::Approx(std::sqrt(3.0) * std::cos(az) * placed.bformat.w[i]));
    }

    SUBCASE("superposition of two stems") {
        std::vector<AudioBuffer> stems = {AudioBuffer::mono(random_vector(150, rng, 0.5), rate),
                                          AudioBuffer::mono(random_vector(150, rng, 0.5), rate)};
        Pcg64 r_all(99);
        const PlacedEncoding both = place_and_encode(stems, delta_ir(rate), chain, r_all);

        // Each stem encoded alone with the matching draws.
        Pcg64 r_replay(99);
        std::vector<BFormat> parts;
        for (const auto& stem : stems) {
            const double az = r_replay.uniform(-kPi, kPi);
            draw_chain(chain, r_replay);  // keep streams aligned (inactive: p = 0)
            parts.push_back(encode_source(stem, delta_ir(rate), Azimuth(az)));
        }
        BFormat sum = mix_bformat(parts);
        sum.w.resize(150);
        sum.x.resize(150);
        sum.y.resize(150);
        CHECK(rel_error(both.bformat.w, sum.w) < 1e-12);
        CHECK(rel_error(both.bformat.x, sum.x) < 1e-12);
        CHECK(rel_error(both.bformat.y, sum.y) < 1e-12);
    }

    SUBCASE("stereo stem decomposes into two mono sources at azimuth +- width/2") {
        const auto left = random_vector(100, rng, 0.5);
        const auto right = random_vector(100, rng, 0.5);
        std::vector<AudioBuffer> stems = {AudioBuffer::stereo(left, right, rate)};
        Pcg64 r(314);
        const PlacedEncoding placed = place_and_encode(stems, delta_ir(rate), chain, r);
        const double az = placed.placements[0].azimuth;
        const double wd = placed.placements[0].width;
        const BFormat bl =
            encode_source(AudioBuffer::mono(left, rate), delta_ir(rate), Azimuth(az + 0.5 * wd));
        const BFormat br =
            encode_source(AudioBuffer::mono(right, rate), delta_ir(rate), Azimuth(az - 0.5 * wd));
        BFormat sum = mix_bformat({bl, br});
        sum.w.resize(100);
        sum.x.resize(100);
        sum.y.resize(100);
        CHECK(rel_error(placed.bformat.x, sum.x) < 1e-12);
        CHECK(rel_error(placed.bformat.y, sum.y) < 1e-12);
    }

    SUBCASE("near-zero width collapses to the mono-sum placement") {
        const auto left = random_vector(100, rng, 0.5);
        const auto right = random_vector(100, rng, 0.5);
        std::vector<AudioBuffer> stems = {AudioBuffer::stereo(left, right, rate)};
        // The collapse error is O(width/2 * (L-R)); a width below 1e-3 with
        // cos(az) away from zero keeps it under 5e-3 relative.
        for (std::uint64_t seed = 0; seed < 60000; ++seed) {
            Pcg64 probe(seed);
            const double az_probe = probe.uniform(-kPi, kPi);
            if (std::abs(std::cos(az_probe)) > 0.3 && probe.uniform(0.0, kPi) < 1e-3) {
                Pcg64 r(seed);
                const PlacedEncoding placed = place_and_encode(stems, delta_ir(rate), chain, r);
                const double az = placed.placements[0].azimuth;
                std::vector<double> mono_sum(100);
                for (std::size_t i = 0; i < 100; ++i) mono_sum[i] = left[i] + right[i];
                const BFormat direct =
                    encode_source(AudioBuffer::mono(mono_sum, rate), delta_ir(rate), Azimuth(az));
                CHECK(rel_error(placed.bformat.x,
                                std::vector<double>(direct.x.begin(), direct.x.begin() + 100)) < 5e-3);
                return;
            }
        }
        FAIL("no seed with a small width draw found");
    }
}

TEST_CASE("render_virtual_stereo reconstructs W and uses pi/8") {
    Pcg64 rng(21);
    BFormat bf(44100, random_vector(128, rng), random_vector(128, rng), random_vector(128, rng));
    const AudioBuffer st = render_virtual_stereo(bf);

    std::vector<double> mid(128);
    for (std::size_t i = 0; i < 128; ++i) mid[i] = 0.5 * (st.channels[0][i] + st.channels[1][i]);
    CHECK(rel_error(mid, bf.w) < 1e-15);

    SUBCASE("w only: both channels equal w") {
        BFormat omni(44100, bf.w, std::vector<double>(128, 0.0), std::vector<double>(128, 0.0));
        const AudioBuffer s2 = render_virtual_stereo(omni);
        CHECK(rel_error(s2.channels[0], omni.w) == 0.0);
        CHECK(rel_error(s2.channels[1], omni.w) == 0.0);
    }
    SUBCASE("x only: channels are +-cos(pi/8)") {
        BFormat xonly(44100, {0.0}, {1.0}, {0.0});
        const AudioBuffer s2 = render_virtual_stereo(xonly);
        CHECK(s2.channels[0][0] == doctest::Approx(0.92387953251).epsilon(1e-9));
        CHECK(s2.channels[1][0] == doctest::Approx(-0.92387953251).epsilon(1e-9));
    }
}

TEST_CASE("crop_pair keeps the window and gain shared across channels") {
    Pcg64 rng(31);
    const std::size_t n = 1000;
    TrainingPair pair;
    pair.bformat = BFormat(44100, random_vector(n, rng), random_vector(n, rng), random_vector(n, rng));
    pair.stereo = render_virtual_stereo(pair.bformat);
    pair.seed = 7;

    Pcg64 crop_rng(41);
    const TrainingPair cropped = crop_pair(pair, 300, crop_rng);
    REQUIRE(cropped.stereo.num_samples() == 300);
    REQUIRE(cropped.bformat.num_samples() == 300);

    // The W-downmix identity survives the crop.
    std::vector<double> mid(300);
    for (std::size_t i = 0; i < 300; ++i)
        mid[i] = 0.5 * (cropped.stereo.channels[0][i] + cropped.stereo.channels[1][i]);
    CHECK(rel_error(mid, cropped.bformat.w) < 1e-12);

    // Offset and gain recoverable from the stream: offset first, then gain.
    Pcg64 replay(41);
    const std::size_t offset = replay.uniform_int(n - 300 + 1);
    const double gain = std::pow(10.0, replay.uniform(-6.0, 6.0) / 20.0);
    CHECK(cropped.crop_offset == offset);
    for (std::size_t i = 0; i < 300; ++i)
        CHECK(cropped.bformat.w[i] == doctest::Approx(pair.bformat.w[offset + i] * gain));

    SUBCASE("crop of the whole pair forces offset zero") {
        Pcg64 r2(5);
        const TrainingPair full = crop_pair(pair, n, r2);
        CHECK(full.crop_offset == 0);
    }
    SUBCASE("crop longer than the pair is rejected") {
        Pcg64 r2(5);
        CHECK_THROWS(crop_pair(pair, n + 1, r2));
    }
}

TEST_CASE("synthesize_corpus is deterministic and splits 90/10") {
    TempCorpus tc("synth");
    const Manifest m1 = synthesize_corpus(tc.config, 4242);
    REQUIRE(m1.records.size() == 6);
    CHECK(m1.validation_ids.size() == 1);  // round(0.1 * 6)
    CHECK(m1.train_ids.size() == 5);

    // Byte-identical on rerun with the same seed.
    const std::string manifest_bytes = file_bytes(tc.config.out_dir + "/manifest.jsonl");
    const std::string wav_bytes = file_bytes(m1.records[0].stereo_path);
    const Manifest m2 = synthesize_corpus(tc.config, 4242);
    CHECK(file_bytes(tc.config.out_dir + "/manifest.jsonl") == manifest_bytes);
    CHECK(file_bytes(m2.records[0].stereo_path) == wav_bytes);

    // Total duration bookkeeping.
    double total = 0.0;
    for (const auto& rec : m1.records) {
        const AudioBuffer st = read_wav(rec.stereo_path);
        total += st.duration_seconds();
    }
    CHECK(total == doctest::Approx(6 * 0.5));

    // Every pair satisfies the W-downmix identity after the float32 round trip.
    const Manifest loaded = load_manifest(tc.config.out_dir);
    for (const auto& rec : loaded.records) {
        const TrainingPair pair = load_pair(loaded, rec);
        std::vector<double> mid(pair.stereo.num_samples());
        for (std::size_t i = 0; i < mid.size(); ++i)
            mid[i] = 0.5 * (pair.stereo.channels[0][i] + pair.stereo.channels[1][i]);
        CHECK(rel_error(mid, pair.bformat.w) < 1e-6);
    }

    // Per-pair regeneration from the manifest record is byte-identical
    // against the stored audio (third synthesis changed nothing).
    const ManifestRecord& rec = loaded.records[2];
    const TrainingPair regen = synthesize_pair(rec.stem_paths, rec.ir_path, rec.seed, tc.config);
    const AudioBuffer stored = read_wav(rec.stereo_path);
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < stored.num_samples(); ++i)
            CHECK(static_cast<float>(regen.stereo.channels[c][i]) ==
                  static_cast<float>(stored.channels[c][i]));
}

TEST_CASE("synthesize_corpus with parallel workers matches single-threaded output") {
    TempCorpus tc("workers");
    synthesize_corpus(tc.config, 99);
    const std::string manifest_bytes = file_bytes(tc.config.out_dir + "/manifest.jsonl");
    const std::string wav_bytes = file_bytes(tc.config.out_dir + "/pair_000003_stereo.wav");

    CorpusConfig parallel = tc.config;
    parallel.workers = 3;
    synthesize_corpus(parallel, 99);
    CHECK(file_bytes(tc.config.out_dir + "/manifest.jsonl") == manifest_bytes);
    CHECK(file_bytes(tc.config.out_dir + "/pair_000003_stereo.wav") == wav_bytes);
}

TEST_CASE("azimuth draws are uniform over [-pi, pi)") {
    // Chi-square over 36 bins at 1e4 draws; placement azimuths come from the
    // same uniform(-pi, pi) the corpus uses.
    Pcg64 rng(2025);
    const int bins = 36, draws = 10000;
    std::vector<int> hist(bins, 0);
    for (int i = 0; i < draws; ++i) {
        const double az = rng.uniform(-kPi, kPi);
        int b = static_cast<int>((az + kPi) / (2.0 * kPi) * bins);
        if (b >= bins) b = bins - 1;
        hist[static_cast<std::size_t>(b)]++;
    }
    const double expected = static_cast<double>(draws) / bins;
    double chi2 = 0.0;
    for (int c : hist) chi2 += (c - expected) * (c - expected) / expected;
    // 99th percentile of chi-square with 35 dof is ~57.3; p > 0.01 means below.
    CHECK(chi2 < 57.342);
}

TEST_CASE("synthesize_corpus surfaces missing inputs") {
    CorpusConfig config;
    config.stem_dir = "/nonexistent/stems";
    config.ir_dir = "/nonexistent/irs";
    config.out_dir = (fs::temp_directory_path() / "ambiup_missing").string();
    CHECK_THROWS(synthesize_corpus(config, 1));
}
