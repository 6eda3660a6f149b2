#include "ambiup/ir_pipeline.hpp"

#include <cmath>
#include <stdexcept>

#include "ambiup/wav.hpp"

namespace ambiup {

void IrRandomizeSpec::validate() const {
    if (!(truncate_min_s > 0.0 && truncate_min_s <= truncate_max_s))
        throw std::invalid_argument("IrRandomizeSpec: bad truncation range");
    if (!(fadeout_min_s > 0.0 && fadeout_min_s <= fadeout_max_s &&
          fadeout_max_s <= truncate_min_s))
        throw std::invalid_argument("IrRandomizeSpec: bad fadeout range");
}

AmbisonicIR truncate_ir(const AmbisonicIR& ir, const IrRandomizeSpec& spec, Pcg64& rng) {
    ir.validate();
    spec.validate();
    const auto min_len =
        static_cast<std::size_t>(std::llround(spec.truncate_min_s * ir.sample_rate));
    if (ir.num_samples() < min_len)
        throw std::invalid_argument("truncate_ir: IR shorter than the minimum truncation length");

    const double duration = rng.uniform(spec.truncate_min_s, spec.truncate_max_s);
    const auto cut = static_cast<std::size_t>(std::llround(duration * ir.sample_rate));
    if (cut >= ir.num_samples()) return ir;

    AmbisonicIR out = ir;
    out.w.resize(cut);
    out.x.resize(cut);
    out.y.resize(cut);
    return out;
}

AmbisonicIR apply_fadeout(const AmbisonicIR& ir, const IrRandomizeSpec& spec, Pcg64& rng) {
    ir.validate();
    spec.validate();
    const double fade_s = rng.uniform(spec.fadeout_min_s, spec.fadeout_max_s);
    const auto fade = static_cast<std::size_t>(std::llround(fade_s * ir.sample_rate));
    if (fade > ir.num_samples())
        throw std::invalid_argument("apply_fadeout: fadeout longer than the IR");

    AmbisonicIR out = ir;
    const std::size_t start = out.num_samples() - fade;
    const double pi = 3.1415926535897932384626433832795;
    for (std::size_t k = 0; k < fade; ++k) {
        // Half-Hann: cos^2(pi*k / (2*(F-1))), 1 at the fade start, exactly 0
        // at the last sample.
        double g = 0.0;
        if (fade > 1 && k + 1 < fade) {
            const double c = std::cos(pi * static_cast<double>(k) /
                                      (2.0 * static_cast<double>(fade - 1)));
            g = c * c;
        }
        out.w[start + k] *= g;
        out.x[start + k] *= g;
        out.y[start + k] *= g;
    }
    return out;
}

AmbisonicIR randomize_ir(const AmbisonicIR& ir, const IrRandomizeSpec& spec, Pcg64& rng) {
    return apply_fadeout(truncate_ir(ir, spec, rng), spec, rng);
}

AmbisonicIR synth_test_ir(double duration_s, int sample_rate, Pcg64& rng) {
    if (duration_s <= 0.0) throw std::invalid_argument("synth_test_ir: duration must be positive");
    const auto len = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    if (len == 0) throw std::invalid_argument("synth_test_ir: duration rounds to zero samples");

    const double decay = std::log(1000.0) / static_cast<double>(len);  // -60 dB at the tail
    auto channel = [&] {
        std::vector<double> ch(len);
        for (std::size_t n = 0; n < len; ++n)
            ch[n] = 0.3 * rng.uniform(-1.0, 1.0) * std::exp(-decay * static_cast<double>(n));
        ch[0] = 1.0;
        return ch;
    };
    std::vector<double> w = channel();
    std::vector<double> x = channel();
    std::vector<double> y = channel();
    return AmbisonicIR(sample_rate, std::move(w), std::move(x), std::move(y));
}

AmbisonicIR load_ir_wav(const std::string& path, int expected_rate) {
    AudioBuffer buf = read_wav(path);
    if (buf.sample_rate != expected_rate)
        throw std::runtime_error("load_ir_wav: " + path + " has sample rate " +
                                 std::to_string(buf.sample_rate) + ", expected " +
                                 std::to_string(expected_rate) + " (no resampling)");
    if (buf.num_channels() != 3 && buf.num_channels() != 4)
        throw std::runtime_error("load_ir_wav: " + path + " must have 3 (W,X,Y) or 4 (W,X,Y,Z) channels");
    return AmbisonicIR(buf.sample_rate, std::move(buf.channels[0]), std::move(buf.channels[1]),
                       std::move(buf.channels[2]));
}

}  // namespace ambiup
