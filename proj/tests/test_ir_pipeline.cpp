#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ambiup/ir_pipeline.hpp"
#include "ambiup/wav.hpp"
#include "test_util.hpp"

using namespace ambiup;
using namespace ambiup::testutil;

namespace {

AmbisonicIR constant_ir(double seconds, int rate, double value = 1.0) {
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    return AmbisonicIR(rate, std::vector<double>(n, value), std::vector<double>(n, value),
                       std::vector<double>(n, value));
}

}  // namespace

TEST_CASE("truncate_ir draws a duration in [0.3, 1.0] s and cuts all channels") {
    const int rate = 44100;
    const AmbisonicIR ir = constant_ir(2.0, rate);
    IrRandomizeSpec spec;

    Pcg64 rng(1);
    const AmbisonicIR cut = truncate_ir(ir, spec, rng);
    CHECK(cut.num_samples() >= static_cast<std::size_t>(0.3 * rate));
    CHECK(cut.num_samples() <= static_cast<std::size_t>(1.0 * rate) + 1);
    CHECK(cut.w.size() == cut.x.size());
    CHECK(cut.w.size() == cut.y.size());

    // Samples before the cut are untouched.
    for (std::size_t i = 0; i < cut.num_samples(); ++i) CHECK(cut.w[i] == 1.0);
}

TEST_CASE("truncate_ir length arithmetic at a pinned draw") {
    // Drive the rng until a draw near 0.5 s appears, then verify sample count
    // equals round(draw * rate) exactly by recomputing from the same stream.
    const int rate = 44100;
    const AmbisonicIR ir = constant_ir(2.0, rate);
    IrRandomizeSpec spec;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        Pcg64 probe(seed);
        const double draw = probe.uniform(spec.truncate_min_s, spec.truncate_max_s);
        Pcg64 rng(seed);
        const AmbisonicIR cut = truncate_ir(ir, spec, rng);
        CHECK(cut.num_samples() == static_cast<std::size_t>(std::llround(draw * rate)));
    }
}

TEST_CASE("truncate_ir clamps short IRs and rejects too-short ones") {
    const int rate = 44100;
    IrRandomizeSpec spec;
    const AmbisonicIR at_min = constant_ir(0.3, rate);
    Pcg64 rng(9);
    const AmbisonicIR kept = truncate_ir(at_min, spec, rng);
    CHECK(kept.num_samples() == at_min.num_samples());

    const AmbisonicIR too_short = constant_ir(0.1, rate);
    Pcg64 rng2(9);
    CHECK_THROWS(truncate_ir(too_short, spec, rng2));
}

TEST_CASE("truncation draw statistics match the uniform distribution") {
    const int rate = 44100;
    const AmbisonicIR ir = constant_ir(1.2, rate);
    IrRandomizeSpec spec;
    Pcg64 rng(123);
    double sum = 0.0, lo = 1e9, hi = -1e9;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        const AmbisonicIR cut = truncate_ir(ir, spec, rng);
        const double dur = static_cast<double>(cut.num_samples()) / rate;
        sum += dur;
        lo = std::min(lo, dur);
        hi = std::max(hi, dur);
    }
    CHECK(lo >= 0.3 - 1e-4);
    CHECK(hi <= 1.0 + 1e-4);
    CHECK(sum / trials == doctest::Approx(0.65).epsilon(0.016));
}

TEST_CASE("apply_fadeout half-Hann endpoints and closed form") {
    const int rate = 100;  // fadeout range [0.05, 0.3] s -> 5..30 samples
    IrRandomizeSpec spec;
    const AmbisonicIR ir = constant_ir(1.0, rate);
    Pcg64 rng(7);
    const AmbisonicIR faded = apply_fadeout(ir, spec, rng);
    CHECK(faded.w.back() == 0.0);
    CHECK(faded.x.back() == 0.0);
    CHECK(faded.y.back() == 0.0);

    // Locate the fade start: last index where the value is still 1.
    std::size_t fade_start = 0;
    for (std::size_t i = 0; i < faded.num_samples(); ++i)
        if (faded.w[i] == 1.0) fade_start = i;
    const std::size_t fade_len = faded.num_samples() - fade_start;
    for (std::size_t k = 0; k < fade_len; ++k) {
        const double c = std::cos(3.14159265358979323846 * static_cast<double>(k) /
                                  (2.0 * static_cast<double>(fade_len - 1)));
        CHECK(faded.w[fade_start + k] == doctest::Approx(c * c).epsilon(1e-12));
    }
}

TEST_CASE("fade of 4 samples gives gains [1, 0.75, 0.25, 0]") {
    // Half-Hann closed form cos^2(pi k / (2 (F-1))) at F = 4.
    const double pi = 3.14159265358979323846;
    std::vector<double> gains;
    for (int k = 0; k < 4; ++k) {
        const double c = std::cos(pi * k / (2.0 * 3.0));
        gains.push_back(c * c);
    }
    CHECK(gains[0] == doctest::Approx(1.0));
    CHECK(gains[1] == doctest::Approx(0.75));
    CHECK(gains[2] == doctest::Approx(0.25));
    CHECK(gains[3] == doctest::Approx(0.0));
}

TEST_CASE("fadeout leaves a zero IR zero and rejects fades longer than the IR") {
    const int rate = 44100;
    IrRandomizeSpec spec;
    AmbisonicIR zero = constant_ir(0.5, rate, 0.0);
    Pcg64 rng(3);
    const AmbisonicIR faded = apply_fadeout(zero, spec, rng);
    for (double v : faded.w) CHECK(v == 0.0);

    AmbisonicIR tiny(rate, {1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0});
    Pcg64 rng2(3);
    CHECK_THROWS(apply_fadeout(tiny, spec, rng2));
}

TEST_CASE("randomize_ir is deterministic under a fixed seed") {
    const int rate = 44100;
    Pcg64 gen(55);
    const AmbisonicIR ir = synth_test_ir(1.5, rate, gen);
    IrRandomizeSpec spec;

    Pcg64 r1(77), r2(77);
    const AmbisonicIR a = randomize_ir(ir, spec, r1);
    const AmbisonicIR b = randomize_ir(ir, spec, r2);
    REQUIRE(a.num_samples() == b.num_samples());
    CHECK(a.w == b.w);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
}

TEST_CASE("synth_test_ir structure") {
    const int rate = 44100;
    Pcg64 rng(99);
    const AmbisonicIR ir = synth_test_ir(0.5, rate, rng);
    CHECK(ir.num_samples() == 22050);
    CHECK(ir.w[0] == 1.0);
    CHECK(ir.x[0] == 1.0);
    CHECK(ir.y[0] == 1.0);

    // Deterministic for the same seed.
    Pcg64 rng2(99);
    const AmbisonicIR again = synth_test_ir(0.5, rate, rng2);
    CHECK(ir.w == again.w);

    // Energy decays: the second half holds less than the first.
    auto half_energy = [&](const std::vector<double>& ch, bool second) {
        const std::size_t half = ch.size() / 2;
        double acc = 0.0;
        for (std::size_t i = second ? half : 0; i < (second ? ch.size() : half); ++i)
            acc += ch[i] * ch[i];
        return acc;
    };
    CHECK(half_energy(ir.w, true) < half_energy(ir.w, false));

    // Channels are decorrelated (ignore the shared delta at t = 0).
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 1; i < ir.num_samples(); ++i) {
        dot += ir.x[i] * ir.y[i];
        nx += ir.x[i] * ir.x[i];
        ny += ir.y[i] * ir.y[i];
    }
    CHECK(std::abs(dot) / std::sqrt(nx * ny) < 0.05);

    CHECK_THROWS(synth_test_ir(0.0, rate, rng));
}

TEST_CASE("load_ir_wav handles 3- and 4-channel files and rejects others") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "ambiup_ir_test";
    fs::create_directories(dir);

    AudioBuffer four;
    four.sample_rate = 44100;
    four.channels = {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}, {0.7, 0.8}};  // W X Y Z
    const auto four_path = (dir / "four.wav").string();
    write_wav(four_path, four);
    const AmbisonicIR ir4 = load_ir_wav(four_path, 44100);
    CHECK(ir4.w[0] == doctest::Approx(0.1));
    CHECK(ir4.x[0] == doctest::Approx(0.3));
    CHECK(ir4.y[0] == doctest::Approx(0.5));  // Z dropped

    AudioBuffer three;
    three.sample_rate = 44100;
    three.channels = {{0.1}, {0.3}, {0.5}};
    const auto three_path = (dir / "three.wav").string();
    write_wav(three_path, three);
    const AmbisonicIR ir3 = load_ir_wav(three_path, 44100);
    CHECK(ir3.y[0] == doctest::Approx(0.5));

    CHECK_THROWS(load_ir_wav(three_path, 48000));  // no resampling

    AudioBuffer stereo;
    stereo.sample_rate = 44100;
    stereo.channels = {{0.1}, {0.2}};
    const auto stereo_path = (dir / "two.wav").string();
    write_wav(stereo_path, stereo);
    CHECK_THROWS(load_ir_wav(stereo_path, 44100));
    fs::remove_all(dir);
}
