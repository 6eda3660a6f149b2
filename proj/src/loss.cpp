#include "ambiup/loss.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>

#include "ambiup/fft.hpp"

namespace ambiup {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

// Reflection-padded sample lookup: position q in a signal padded by win/2.
inline std::size_t reflect_index(long long i, long long len) {
    if (i < 0) i = -i;
    if (i >= len) i = 2 * len - 2 - i;
    return static_cast<std::size_t>(i);
}

std::vector<double> hann_window(int win) {
    std::vector<double> w(static_cast<std::size_t>(win));
    for (int n = 0; n < win; ++n)
        w[static_cast<std::size_t>(n)] = 0.5 * (1.0 - std::cos(2.0 * kPi * n / win));
    return w;
}

struct Spectra {
    int frames = 0;
    int bins = 0;
    std::vector<double> re, im, mag;  // frames x bins, row-major
};

// One-sided magnitude STFT: Hann window, reflect padding of win/2, frame
// starts every hop while the frame fits the padded signal.
Spectra stft_forward(const double* x, std::size_t len, int fft, int win, int hop, double eps) {
    Spectra s;
    s.bins = fft / 2 + 1;
    s.frames = static_cast<int>(len / static_cast<std::size_t>(hop)) + 1;
    s.re.resize(static_cast<std::size_t>(s.frames) * s.bins);
    s.im.resize(static_cast<std::size_t>(s.frames) * s.bins);
    s.mag.resize(static_cast<std::size_t>(s.frames) * s.bins);

    const std::vector<double> window = hann_window(win);
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(fft));
    const long long slen = static_cast<long long>(len);
    for (int f = 0; f < s.frames; ++f) {
        const long long start = static_cast<long long>(f) * hop - win / 2;
        for (int n = 0; n < win; ++n)
            buf[static_cast<std::size_t>(n)] =
                x[reflect_index(start + n, slen)] * window[static_cast<std::size_t>(n)];
        for (int n = win; n < fft; ++n) buf[static_cast<std::size_t>(n)] = 0.0;
        fft_inplace(buf, false);
        const std::size_t base = static_cast<std::size_t>(f) * s.bins;
        for (int b = 0; b < s.bins; ++b) {
            const double re = buf[static_cast<std::size_t>(b)].real();
            const double im = buf[static_cast<std::size_t>(b)].imag();
            s.re[base + b] = re;
            s.im[base + b] = im;
            s.mag[base + b] = std::sqrt(re * re + im * im + eps);
        }
    }
    return s;
}

}  // namespace

void StftLossConfig::validate() const {
    if (fft_sizes.size() != window_sizes.size() || fft_sizes.size() != hop_sizes.size() ||
        fft_sizes.empty())
        throw std::invalid_argument("StftLossConfig: resolution lists must be equal and non-empty");
    for (std::size_t r = 0; r < fft_sizes.size(); ++r) {
        if (window_sizes[r] > fft_sizes[r] || hop_sizes[r] > window_sizes[r] || hop_sizes[r] <= 0)
            throw std::invalid_argument("StftLossConfig: need hop <= window <= fft");
        if ((fft_sizes[r] & (fft_sizes[r] - 1)) != 0)
            throw std::invalid_argument("StftLossConfig: FFT sizes must be powers of two");
    }
}

int stft_l1_node(ad::Tape& tape, int pred, const ad::Tensor& target, const StftLossConfig& cfg) {
    cfg.validate();
    const ad::Tensor& p = tape.val(pred);
    if (!p.same_shape(target)) throw std::invalid_argument("stft_loss: shape mismatch");
    if (p.shape.size() != 2) throw std::invalid_argument("stft_loss: input must be [C x L]");
    const int channels = p.rows();
    const auto len = static_cast<std::size_t>(p.cols());

    // Cache the prediction spectra and the target magnitudes for backward.
    struct Cache {
        std::vector<Spectra> pred_spectra;      // per (resolution, channel)
        std::vector<std::vector<double>> target_mag;
    };
    auto cache = std::make_shared<Cache>();

    double loss = 0.0;
    for (std::size_t r = 0; r < cfg.fft_sizes.size(); ++r) {
        for (int c = 0; c < channels; ++c) {
            Spectra sp = stft_forward(p.row(c), len, cfg.fft_sizes[r], cfg.window_sizes[r],
                                      cfg.hop_sizes[r], cfg.mag_eps);
            Spectra st = stft_forward(target.row(c), len, cfg.fft_sizes[r], cfg.window_sizes[r],
                                      cfg.hop_sizes[r], cfg.mag_eps);
            for (std::size_t i = 0; i < sp.mag.size(); ++i)
                loss += std::abs(sp.mag[i] - st.mag[i]);
            cache->pred_spectra.push_back(std::move(sp));
            cache->target_mag.push_back(std::move(st.mag));
        }
    }

    StftLossConfig cfg_copy = cfg;
    return tape.custom(
        ad::Tensor::scalar(loss), {pred},
        [cache, cfg_copy, channels, len](ad::Tape& t, int self, const std::vector<int>& parents) {
            const double gout = t.grad(self).data[0];
            if (gout == 0.0) return;
            ad::Tensor& gx = t.grad_mut(parents[0]);
            const long long slen = static_cast<long long>(len);
            std::size_t idx = 0;
            for (std::size_t r = 0; r < cfg_copy.fft_sizes.size(); ++r) {
                const int fft = cfg_copy.fft_sizes[r];
                const int win = cfg_copy.window_sizes[r];
                const int hop = cfg_copy.hop_sizes[r];
                const std::vector<double> window = hann_window(win);
                std::vector<std::complex<double>> buf(static_cast<std::size_t>(fft));
                for (int c = 0; c < channels; ++c, ++idx) {
                    const Spectra& sp = cache->pred_spectra[idx];
                    const std::vector<double>& tm = cache->target_mag[idx];
                    double* grow = gx.row(c);
                    for (int f = 0; f < sp.frames; ++f) {
                        const std::size_t base = static_cast<std::size_t>(f) * sp.bins;
                        // dL/dX_k packed as a complex vector; the adjoint of the
                        // one-sided real DFT is Re(inverse transform).
                        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
                        bool nonzero = false;
                        for (int b = 0; b < sp.bins; ++b) {
                            const double diff = sp.mag[base + b] - tm[base + b];
                            if (diff == 0.0) continue;
                            const double s = diff > 0.0 ? gout : -gout;
                            const double inv_mag = 1.0 / sp.mag[base + b];
                            buf[static_cast<std::size_t>(b)] = {
                                s * sp.re[base + b] * inv_mag, s * sp.im[base + b] * inv_mag};
                            nonzero = true;
                        }
                        if (!nonzero) continue;
                        fft_inplace(buf, true);
                        const long long start = static_cast<long long>(f) * hop - win / 2;
                        for (int n = 0; n < win; ++n) {
                            const double g =
                                buf[static_cast<std::size_t>(n)].real() * window[static_cast<std::size_t>(n)];
                            grow[reflect_index(start + n, slen)] += g;
                        }
                    }
                }
            }
        });
}

int l2_node(ad::Tape& tape, int pred, const ad::Tensor& target) {
    const ad::Tensor& p = tape.val(pred);
    if (!p.same_shape(target)) throw std::invalid_argument("l2_loss: shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double d = p.data[i] - target.data[i];
        loss += d * d;
    }
    auto target_copy = std::make_shared<ad::Tensor>(target);
    return tape.custom(ad::Tensor::scalar(loss), {pred},
                       [target_copy](ad::Tape& t, int self, const std::vector<int>& parents) {
                           const double g = t.grad(self).data[0];
                           const ad::Tensor& p2 = t.val(parents[0]);
                           ad::Tensor& gx = t.grad_mut(parents[0]);
                           for (std::size_t i = 0; i < p2.data.size(); ++i)
                               gx.data[i] += 2.0 * g * (p2.data[i] - target_copy->data[i]);
                       });
}

int kl_node(ad::Tape& tape, int mu, int logvar) {
    const ad::Tensor& m = tape.val(mu);
    const ad::Tensor& lv = tape.val(logvar);
    if (!m.same_shape(lv)) throw std::invalid_argument("kl_loss: mu/logvar shape mismatch");
    ad::check_finite(m, "kl_loss mu");
    ad::check_finite(lv, "kl_loss logvar");
    double loss = 0.0;
    for (std::size_t i = 0; i < m.data.size(); ++i)
        loss += 0.5 * (m.data[i] * m.data[i] + std::exp(lv.data[i]) - lv.data[i] - 1.0);
    return tape.custom(ad::Tensor::scalar(loss), {mu, logvar},
                       [](ad::Tape& t, int self, const std::vector<int>& parents) {
                           const double g = t.grad(self).data[0];
                           const ad::Tensor& m2 = t.val(parents[0]);
                           const ad::Tensor& lv2 = t.val(parents[1]);
                           ad::Tensor& gm = t.grad_mut(parents[0]);
                           ad::Tensor& gl = t.grad_mut(parents[1]);
                           for (std::size_t i = 0; i < m2.data.size(); ++i) {
                               gm.data[i] += g * m2.data[i];
                               gl.data[i] += g * 0.5 * (std::exp(lv2.data[i]) - 1.0);
                           }
                       });
}

LossNodes total_loss_nodes(ad::Tape& tape, int pred, const ad::Tensor& target, int mu, int logvar,
                           const StftLossConfig& cfg) {
    LossNodes nodes;
    nodes.stft = stft_l1_node(tape, pred, target, cfg);
    nodes.l2 = l2_node(tape, pred, target);
    nodes.kl = kl_node(tape, mu, logvar);
    nodes.total = tape.add(tape.add(nodes.stft, tape.scale(nodes.l2, 10.0)), nodes.kl);
    return nodes;
}

LossBreakdown breakdown_from_nodes(const ad::Tape& tape, const LossNodes& nodes) {
    LossBreakdown b;
    b.stft = tape.val(nodes.stft).data[0];
    b.l2 = tape.val(nodes.l2).data[0];
    b.kl = tape.val(nodes.kl).data[0];
    b.total = tape.val(nodes.total).data[0];
    return b;
}

double stft_loss(const ad::Tensor& pred, const ad::Tensor& target, const StftLossConfig& cfg) {
    ad::Tape tape;
    return tape.val(stft_l1_node(tape, tape.leaf(pred), target, cfg)).data[0];
}

double l2_loss(const ad::Tensor& pred, const ad::Tensor& target) {
    ad::Tape tape;
    return tape.val(l2_node(tape, tape.leaf(pred), target)).data[0];
}

double kl_loss(const std::vector<double>& mu, const std::vector<double>& logvar) {
    ad::Tape tape;
    const int n = static_cast<int>(mu.size());
    const int a = tape.leaf(ad::Tensor::from({n, 1}, mu));
    const int b = tape.leaf(ad::Tensor::from({n, 1}, logvar));
    return tape.val(kl_node(tape, a, b)).data[0];
}

LossBreakdown total_loss(const ad::Tensor& pred, const ad::Tensor& target,
                         const std::vector<double>& mu, const std::vector<double>& logvar,
                         const StftLossConfig& cfg) {
    LossBreakdown b;
    b.stft = stft_loss(pred, target, cfg);
    b.l2 = l2_loss(pred, target);
    b.kl = kl_loss(mu, logvar);
    b.total = b.stft + 10.0 * b.l2 + b.kl;
    return b;
}

}  // namespace ambiup
