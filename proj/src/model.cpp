#include "ambiup/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ambiup {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;
constexpr char kCheckpointMagic[8] = {'A', 'B', 'U', 'P', 'C', 'K', 'P', 'T'};

std::string block_name(const char* prefix, int i, const char* suffix) {
    return std::string(prefix) + std::to_string(i) + suffix;
}

}  // namespace

void ModelConfig::validate() const {
    if (base_channels < 4) throw std::invalid_argument("ModelConfig: base_channels must be >= 4");
    if (latent_dim <= 0) throw std::invalid_argument("ModelConfig: latent_dim must be positive");
    for (int s : strides)
        if (s < 2) throw std::invalid_argument("ModelConfig: strides must be >= 2");
    if (model_dim() % tx_heads != 0)
        throw std::invalid_argument("ModelConfig: model dim must divide evenly into heads");
    if (tx_layers < 1) throw std::invalid_argument("ModelConfig: need at least one transformer layer");
    if (kernel % 2 != 1) throw std::invalid_argument("ModelConfig: kernel must be odd");
}

void ModelParams::add(const std::string& name, ad::Tensor t) {
    index.emplace(name, tensors.size());
    tensors.emplace_back(name, std::move(t));
}

ad::Tensor& ModelParams::at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw std::runtime_error("ModelParams: unknown tensor " + name);
    return tensors[it->second].second;
}

const ad::Tensor& ModelParams::at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw std::runtime_error("ModelParams: unknown tensor " + name);
    return tensors[it->second].second;
}

std::size_t ModelParams::total_parameters() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors) n += t.numel();
    return n;
}

ModelParams make_param_skeleton(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    const int base = config.base_channels;
    const int k = config.kernel;
    const int latent = config.latent_dim;
    const int enc_ch = config.encoder_channels();
    const int dim = config.model_dim();

    auto conv_stack = [&](const char* prefix, int in_channels) {
        p.add(std::string(prefix) + ".in.w", ad::Tensor({base, in_channels, k}));
        p.add(std::string(prefix) + ".in.b", ad::Tensor({base, 1}));
        int c = base;
        for (int i = 0; i < 4; ++i) {
            const int s = config.strides[static_cast<std::size_t>(i)];
            const std::string b = std::string(prefix) + ".b" + std::to_string(i);
            p.add(b + ".res.c1.w", ad::Tensor({c, c, 3}));
            p.add(b + ".res.c1.b", ad::Tensor({c, 1}));
            p.add(b + ".res.c2.w", ad::Tensor({c, c, 1}));
            p.add(b + ".res.c2.b", ad::Tensor({c, 1}));
            p.add(b + ".down.w", ad::Tensor({2 * c, c, 2 * s}));
            p.add(b + ".down.b", ad::Tensor({2 * c, 1}));
            c *= 2;
        }
    };

    // Audio encoder: conv stack, two LSTM layers, projection to latent_dim.
    conv_stack("enc", 1);
    for (int l = 0; l < 2; ++l) {
        const std::string b = block_name("enc.lstm", l, "");
        p.add(b + ".w_ih", ad::Tensor({4 * enc_ch, enc_ch}));
        p.add(b + ".w_hh", ad::Tensor({4 * enc_ch, enc_ch}));
        p.add(b + ".b_ih", ad::Tensor({4 * enc_ch, 1}));
        p.add(b + ".b_hh", ad::Tensor({4 * enc_ch, 1}));
    }
    p.add("enc.out.w", ad::Tensor({latent, enc_ch, k}));
    p.add("enc.out.b", ad::Tensor({latent, 1}));

    // Spatial encoder: same conv stack from stereo input plus variational heads.
    conv_stack("spa", 2);
    p.add("spa.out.w", ad::Tensor({latent, enc_ch, k}));
    p.add("spa.out.b", ad::Tensor({latent, 1}));
    p.add("spa.mu.w", ad::Tensor({latent, latent}));
    p.add("spa.mu.b", ad::Tensor({latent, 1}));
    p.add("spa.logvar.w", ad::Tensor({latent, latent}));
    p.add("spa.logvar.b", ad::Tensor({latent, 1}));

    // Bottleneck transformer.
    p.add("bot.in.w", ad::Tensor({dim, dim}));
    p.add("bot.in.b", ad::Tensor({dim, 1}));
    for (int l = 0; l < config.tx_layers; ++l) {
        const std::string b = block_name("bot.l", l, "");
        p.add(b + ".ln1.g", ad::Tensor({dim, 1}));
        p.add(b + ".ln1.b", ad::Tensor({dim, 1}));
        for (const char* w : {".wq", ".wk", ".wv", ".wo"}) p.add(b + w, ad::Tensor({dim, dim}));
        for (const char* bn : {".bq", ".bk", ".bv", ".bo"}) p.add(b + bn, ad::Tensor({dim, 1}));
        p.add(b + ".ln2.g", ad::Tensor({dim, 1}));
        p.add(b + ".ln2.b", ad::Tensor({dim, 1}));
        p.add(b + ".ff1.w", ad::Tensor({config.ffn_mult * dim, dim}));
        p.add(b + ".ff1.b", ad::Tensor({config.ffn_mult * dim, 1}));
        p.add(b + ".ff2.w", ad::Tensor({dim, config.ffn_mult * dim}));
        p.add(b + ".ff2.b", ad::Tensor({dim, 1}));
    }
    p.add("bot.ln_out.g", ad::Tensor({dim, 1}));
    p.add("bot.ln_out.b", ad::Tensor({dim, 1}));
    p.add("bot.out.w", ad::Tensor({latent, dim}));
    p.add("bot.out.b", ad::Tensor({latent, 1}));

    // Decoder: mirrored stack with channel attention before each residual unit.
    p.add("dec.in.w", ad::Tensor({enc_ch, latent, k}));
    p.add("dec.in.b", ad::Tensor({enc_ch, 1}));
    int c = enc_ch;
    for (int i = 0; i < 4; ++i) {
        const int s = config.strides[static_cast<std::size_t>(3 - i)];
        const int cout = c / 2;
        const int reduced = cout / 4;
        if (reduced < 1)
            throw std::invalid_argument("ModelConfig: channel attention reduction below 1");
        const std::string b = block_name("dec.b", i, "");
        p.add(b + ".up.w", ad::Tensor({c, cout, 2 * s}));
        p.add(b + ".up.b", ad::Tensor({cout, 1}));
        p.add(b + ".att.w1", ad::Tensor({reduced, cout}));
        p.add(b + ".att.b1", ad::Tensor({reduced, 1}));
        p.add(b + ".att.w2", ad::Tensor({cout, reduced}));
        p.add(b + ".att.b2", ad::Tensor({cout, 1}));
        p.add(b + ".res.c1.w", ad::Tensor({cout, cout, 3}));
        p.add(b + ".res.c1.b", ad::Tensor({cout, 1}));
        p.add(b + ".res.c2.w", ad::Tensor({cout, cout, 1}));
        p.add(b + ".res.c2.b", ad::Tensor({cout, 1}));
        c = cout;
    }
    p.add("dec.out.w", ad::Tensor({2, base, k}));
    p.add("dec.out.b", ad::Tensor({2, 1}));
    return p;
}

namespace {

void fill_uniform(ad::Tensor& t, double bound, Pcg64& rng) {
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
}

// Modified Gram-Schmidt orthogonalization of a random Gaussian square matrix.
void fill_orthogonal(double* m, int n, Pcg64& rng) {
    std::vector<double> a(static_cast<std::size_t>(n) * n);
    for (auto& v : a) v = rng.normal();
    for (int i = 0; i < n; ++i) {
        double* row = a.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < i; ++j) {
            const double* prev = a.data() + static_cast<std::size_t>(j) * n;
            double dot = 0.0;
            for (int k = 0; k < n; ++k) dot += row[k] * prev[k];
            for (int k = 0; k < n; ++k) row[k] -= dot * prev[k];
        }
        double norm = 0.0;
        for (int k = 0; k < n; ++k) norm += row[k] * row[k];
        norm = std::sqrt(norm);
        if (norm < 1e-12) norm = 1.0;
        for (int k = 0; k < n; ++k) row[k] /= norm;
    }
    std::memcpy(m, a.data(), a.size() * sizeof(double));
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool contains(const std::string& s, const std::string& sub) { return s.find(sub) != std::string::npos; }

}  // namespace

ModelParams init_model_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p = make_param_skeleton(config);
    Pcg64 rng(derive_seed(seed, 0x90DE1ULL));
    for (auto& [name, t] : p.tensors) {
        if (ends_with(name, ".b") || contains(name, ".b_ih") || contains(name, ".b_hh") ||
            ends_with(name, ".b1") || ends_with(name, ".b2") || ends_with(name, ".bq") ||
            ends_with(name, ".bk") || ends_with(name, ".bv") || ends_with(name, ".bo")) {
            continue;  // biases stay zero
        }
        if (ends_with(name, ".ln1.g") || ends_with(name, ".ln2.g") || ends_with(name, ".ln_out.g")) {
            for (auto& v : t.data) v = 1.0;
            continue;
        }
        if (ends_with(name, ".ln1.b") || ends_with(name, ".ln2.b") || ends_with(name, ".ln_out.b")) {
            continue;
        }
        if (contains(name, "spa.mu.") || contains(name, "spa.logvar.")) {
            continue;  // heads start at the prior
        }
        if (contains(name, ".w_hh")) {
            const int h = t.shape[1];
            for (int gate = 0; gate < 4; ++gate)
                fill_orthogonal(t.data.data() + static_cast<std::size_t>(gate) * h * h, h, rng);
            continue;
        }
        if (contains(name, ".w_ih")) {
            fill_uniform(t, 1.0 / std::sqrt(static_cast<double>(t.shape[1])), rng);
            continue;
        }
        if (t.shape.size() == 3) {  // convolution: Kaiming-uniform over fan-in
            const double fan_in = static_cast<double>(t.shape[1]) * t.shape[2];
            fill_uniform(t, std::sqrt(6.0 / fan_in), rng);
            continue;
        }
        if (t.shape.size() == 2 && t.cols() > 1) {  // linear: Xavier-uniform
            const double fan_in = t.shape[1], fan_out = t.shape[0];
            fill_uniform(t, std::sqrt(6.0 / (fan_in + fan_out)), rng);
            continue;
        }
        // remaining [N x 1] tensors are biases
    }
    return p;
}

SpatialLatent sample_prior(const ModelConfig& config, Pcg64& rng) {
    SpatialLatent latent;
    latent.mu.assign(static_cast<std::size_t>(config.latent_dim), 0.0);
    latent.logvar.assign(static_cast<std::size_t>(config.latent_dim), 0.0);
    latent.sample = rng.normal_vector(static_cast<std::size_t>(config.latent_dim));
    return latent;
}

int ParamNodes::at(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw std::runtime_error("ParamNodes: unknown tensor " + name);
    return it->second;
}

ParamNodes register_params(ad::Tape& tape, const ModelParams& params, bool requires_grad) {
    ParamNodes nodes;
    for (const auto& [name, t] : params.tensors)
        nodes.ids.emplace(name, tape.leaf(t, requires_grad));
    return nodes;
}

namespace {

int same_conv(ad::Tape& tape, const ParamNodes& p, const std::string& prefix, int x, int k) {
    return tape.conv1d(x, p.at(prefix + ".w"), p.at(prefix + ".b"), 1, (k - 1) / 2, k / 2);
}

int residual_unit(ad::Tape& tape, const ParamNodes& p, const std::string& prefix, int x) {
    int h = tape.conv1d(x, p.at(prefix + ".c1.w"), p.at(prefix + ".c1.b"), 1, 1, 1);
    h = tape.relu(h);
    h = tape.conv1d(h, p.at(prefix + ".c2.w"), p.at(prefix + ".c2.b"), 1, 0, 0);
    return tape.add(x, h);
}

int conv_stack(ad::Tape& tape, const ParamNodes& p, const ModelConfig& config,
               const std::string& prefix, int x) {
    const int k = config.kernel;
    int h = tape.relu(same_conv(tape, p, prefix + ".in", x, k));
    for (int i = 0; i < 4; ++i) {
        const int s = config.strides[static_cast<std::size_t>(i)];
        const std::string b = prefix + ".b" + std::to_string(i);
        h = residual_unit(tape, p, b + ".res", h);
        if (tape.val(h).cols() % s != 0)
            throw std::invalid_argument("encoder: length not divisible by stride chain");
        h = tape.conv1d(h, p.at(b + ".down.w"), p.at(b + ".down.b"), s, s / 2, s - s / 2);
        h = tape.relu(h);
    }
    return h;
}

int lstm_layers(ad::Tape& tape, const ParamNodes& p, const std::string& prefix, int x,
                int num_layers) {
    const int hidden = tape.val(x).rows();
    const int frames = tape.val(x).cols();
    int input = x;
    for (int l = 0; l < num_layers; ++l) {
        const std::string b = prefix + std::to_string(l);
        const int w_ih = p.at(b + ".w_ih");
        const int w_hh = p.at(b + ".w_hh");
        const int b_ih = p.at(b + ".b_ih");
        const int b_hh = p.at(b + ".b_hh");
        int h_prev = tape.leaf(ad::Tensor({hidden, 1}));
        int c_prev = tape.leaf(ad::Tensor({hidden, 1}));
        std::vector<int> outputs;
        outputs.reserve(static_cast<std::size_t>(frames));
        for (int t = 0; t < frames; ++t) {
            const int x_t = tape.slice_cols(input, t, t + 1);
            int gates = tape.add(tape.add_bias(tape.matmul(w_ih, x_t), b_ih),
                                 tape.add_bias(tape.matmul(w_hh, h_prev), b_hh));
            const int i_g = tape.sigmoid(tape.slice_rows(gates, 0, hidden));
            const int f_g = tape.sigmoid(tape.slice_rows(gates, hidden, 2 * hidden));
            const int g_g = tape.tanh_act(tape.slice_rows(gates, 2 * hidden, 3 * hidden));
            const int o_g = tape.sigmoid(tape.slice_rows(gates, 3 * hidden, 4 * hidden));
            c_prev = tape.add(tape.mul(f_g, c_prev), tape.mul(i_g, g_g));
            h_prev = tape.mul(o_g, tape.tanh_act(c_prev));
            outputs.push_back(h_prev);
        }
        input = tape.concat_cols(outputs);
    }
    return input;
}

ad::Tensor sinusoidal_positions(int dim, int frames) {
    ad::Tensor pe({dim, frames});
    for (int i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
        for (int t = 0; t < frames; ++t) {
            pe.row(2 * i)[t] = std::sin(freq * t);
            pe.row(2 * i + 1)[t] = std::cos(freq * t);
        }
    }
    return pe;
}

int linear(ad::Tape& tape, const ParamNodes& p, const std::string& w, const std::string& b, int x) {
    return tape.add_bias(tape.matmul(p.at(w), x), p.at(b));
}

}  // namespace

int audio_encoder_nodes(ad::Tape& tape, const ParamNodes& p, const ModelConfig& config, int input) {
    config.validate();
    const ad::Tensor& in = tape.val(input);
    if (in.shape.size() != 2 || in.rows() != 1)
        throw std::invalid_argument("audio_encoder: input must be [1 x L]");
    if (in.cols() % config.frame_stride() != 0)
        throw std::invalid_argument("audio_encoder: length must be a multiple of the stride product");
    ad::check_finite(in, "audio_encoder input");

    int h = conv_stack(tape, p, config, "enc", input);
    h = lstm_layers(tape, p, "enc.lstm", h, 2);
    return same_conv(tape, p, "enc.out", h, config.kernel);
}

SpatialNodes spatial_encoder_nodes(ad::Tape& tape, const ParamNodes& p, const ModelConfig& config,
                                   int input, const std::vector<double>& eps) {
    config.validate();
    const ad::Tensor& in = tape.val(input);
    if (in.shape.size() != 2 || in.rows() != 2)
        throw std::invalid_argument("spatial_encoder: input must be [2 x L]");
    if (in.cols() % config.frame_stride() != 0)
        throw std::invalid_argument("spatial_encoder: length must be a multiple of the stride product");
    if (static_cast<int>(eps.size()) != config.latent_dim)
        throw std::invalid_argument("spatial_encoder: eps must have latent_dim entries");
    ad::check_finite(in, "spatial_encoder input");

    int h = conv_stack(tape, p, config, "spa", input);
    h = same_conv(tape, p, "spa.out", h, config.kernel);
    const int pooled = tape.mean_time(h);

    SpatialNodes out;
    out.mu = linear(tape, p, "spa.mu.w", "spa.mu.b", pooled);
    out.logvar = linear(tape, p, "spa.logvar.w", "spa.logvar.b", pooled);
    const int eps_leaf = tape.leaf(ad::Tensor::from({config.latent_dim, 1}, eps));
    const int sigma = tape.exp_act(tape.scale(out.logvar, 0.5));
    out.sample = tape.add(out.mu, tape.mul(sigma, eps_leaf));
    return out;
}

int bottleneck_nodes(ad::Tape& tape, const ParamNodes& p, const ModelConfig& config, int z,
                     int zc_sample) {
    const ad::Tensor& zt = tape.val(z);
    if (zt.rows() != config.latent_dim)
        throw std::invalid_argument("bottleneck: z must be [latent_dim x T]");
    if (tape.val(zc_sample).rows() != config.latent_dim || tape.val(zc_sample).cols() != 1)
        throw std::invalid_argument("bottleneck: z_c must be [latent_dim x 1]");
    const int frames = zt.cols();
    const int dim = config.model_dim();
    const int heads = config.tx_heads;
    const int dh = dim / heads;

    int x = tape.concat_rows(z, tape.broadcast_time(zc_sample, frames));
    x = linear(tape, p, "bot.in.w", "bot.in.b", x);
    x = tape.add_const(x, sinusoidal_positions(dim, frames));

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int l = 0; l < config.tx_layers; ++l) {
        const std::string b = block_name("bot.l", l, "");
        int h = tape.layer_norm_cols(x, p.at(b + ".ln1.g"), p.at(b + ".ln1.b"));
        const int q = linear(tape, p, b + ".wq", b + ".bq", h);
        const int k = linear(tape, p, b + ".wk", b + ".bk", h);
        const int v = linear(tape, p, b + ".wv", b + ".bv", h);
        int ctx = -1;
        for (int hd = 0; hd < heads; ++hd) {
            const int q_h = tape.slice_rows(q, hd * dh, (hd + 1) * dh);
            const int k_h = tape.slice_rows(k, hd * dh, (hd + 1) * dh);
            const int v_h = tape.slice_rows(v, hd * dh, (hd + 1) * dh);
            const int scores = tape.scale(tape.matmul(tape.transpose(q_h), k_h), inv_sqrt_dh);
            const int attn = tape.softmax_rows(scores);  // rows: queries
            const int ctx_h = tape.matmul(v_h, tape.transpose(attn));
            ctx = (ctx < 0) ? ctx_h : tape.concat_rows(ctx, ctx_h);
        }
        x = tape.add(x, linear(tape, p, b + ".wo", b + ".bo", ctx));

        int h2 = tape.layer_norm_cols(x, p.at(b + ".ln2.g"), p.at(b + ".ln2.b"));
        h2 = tape.relu(linear(tape, p, b + ".ff1.w", b + ".ff1.b", h2));
        x = tape.add(x, linear(tape, p, b + ".ff2.w", b + ".ff2.b", h2));
    }
    x = tape.layer_norm_cols(x, p.at("bot.ln_out.g"), p.at("bot.ln_out.b"));
    return linear(tape, p, "bot.out.w", "bot.out.b", x);
}

int channel_attention_nodes(ad::Tape& tape, int f, int w1, int b1, int w2, int b2) {
    const int avg = tape.mean_time(f);
    int gate = tape.relu(tape.add_bias(tape.matmul(w1, avg), b1));
    gate = tape.sigmoid(tape.add_bias(tape.matmul(w2, gate), b2));
    return tape.mul_bcast_rows(f, gate);
}

int decoder_nodes(ad::Tape& tape, const ParamNodes& p, const ModelConfig& config, int z) {
    const ad::Tensor& zt = tape.val(z);
    if (zt.rows() != config.latent_dim)
        throw std::invalid_argument("decoder: input must be [latent_dim x T]");
    const int k = config.kernel;

    int h = tape.relu(same_conv(tape, p, "dec.in", z, k));
    for (int i = 0; i < 4; ++i) {
        const int s = config.strides[static_cast<std::size_t>(3 - i)];
        const std::string b = block_name("dec.b", i, "");
        h = tape.conv_transpose1d(h, p.at(b + ".up.w"), p.at(b + ".up.b"), s, s / 2, s - s / 2);
        h = tape.relu(h);
        h = channel_attention_nodes(tape, h, p.at(b + ".att.w1"), p.at(b + ".att.b1"),
                                    p.at(b + ".att.w2"), p.at(b + ".att.b2"));
        h = residual_unit(tape, p, b + ".res", h);
    }
    return same_conv(tape, p, "dec.out", h, k);
}

BFormat upmix(const AudioBuffer& input, const ModelParams& params, const ModelConfig& config,
              UpmixMode mode, Pcg64& rng) {
    input.validate();
    if (mode == UpmixMode::kConditional && !input.is_stereo())
        throw std::invalid_argument("upmix: conditional mode requires stereo input");
    if (mode == UpmixMode::kUnconditional && !input.is_mono())
        throw std::invalid_argument("upmix: unconditional mode requires mono input");

    const std::vector<double> mono =
        input.is_mono() ? input.channels[0] : downmix_mono(input).channels[0];
    const std::size_t len = mono.size();
    if (len == 0) throw std::invalid_argument("upmix: empty input");

    const auto stride = static_cast<std::size_t>(config.frame_stride());
    const std::size_t padded_len = (len + stride - 1) / stride * stride;

    ad::Tape tape;
    const ParamNodes p = register_params(tape, params, /*requires_grad=*/false);

    ad::Tensor mono_in({1, static_cast<int>(padded_len)});
    std::copy(mono.begin(), mono.end(), mono_in.data.begin());
    const int z = audio_encoder_nodes(tape, p, config, tape.leaf(std::move(mono_in)));

    int zc = -1;
    if (mode == UpmixMode::kConditional) {
        ad::Tensor stereo_in({2, static_cast<int>(padded_len)});
        std::copy(input.channels[0].begin(), input.channels[0].end(), stereo_in.data.begin());
        std::copy(input.channels[1].begin(), input.channels[1].end(),
                  stereo_in.data.begin() + static_cast<std::ptrdiff_t>(padded_len));
        // Deterministic conditional inference: the posterior mean (eps = 0).
        const std::vector<double> eps(static_cast<std::size_t>(config.latent_dim), 0.0);
        zc = spatial_encoder_nodes(tape, p, config, tape.leaf(std::move(stereo_in)), eps).sample;
    } else {
        const SpatialLatent prior = sample_prior(config, rng);
        zc = tape.leaf(ad::Tensor::from({config.latent_dim, 1}, prior.sample));
    }

    const int out = decoder_nodes(tape, p, config, bottleneck_nodes(tape, p, config, z, zc));
    const ad::Tensor& pred = tape.val(out);

    BFormat bf;
    bf.sample_rate = input.sample_rate;
    bf.w = mono;  // bit-exact pass-through
    bf.x.assign(pred.row(0), pred.row(0) + len);
    bf.y.assign(pred.row(1), pred.row(1) + len);
    return bf;
}

namespace {

void write_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write(kCheckpointMagic, 8);
    write_u32(f, 1);  // format version
    write_u32(f, static_cast<std::uint32_t>(config.base_channels));
    for (int s : config.strides) write_u32(f, static_cast<std::uint32_t>(s));
    write_u32(f, static_cast<std::uint32_t>(config.latent_dim));
    write_u32(f, static_cast<std::uint32_t>(config.tx_heads));
    write_u32(f, static_cast<std::uint32_t>(config.tx_layers));
    write_u32(f, static_cast<std::uint32_t>(config.kernel));
    write_u32(f, static_cast<std::uint32_t>(config.ffn_mult));
    write_u32(f, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& [name, t] : params.tensors) {
        write_u32(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(f, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) write_u32(f, static_cast<std::uint32_t>(d));
        for (double v : t.data) {
            const float fv = static_cast<float>(v);
            char buf[4];
            std::memcpy(buf, &fv, 4);
            f.write(buf, 4);
        }
    }
    if (!f) throw std::runtime_error("save_checkpoint: short write to " + path);
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    const std::uint32_t version = read_u32(f);
    if (version != 1) throw std::runtime_error("load_checkpoint: unsupported version");

    ModelConfig config;
    config.base_channels = static_cast<int>(read_u32(f));
    for (auto& s : config.strides) s = static_cast<int>(read_u32(f));
    config.latent_dim = static_cast<int>(read_u32(f));
    config.tx_heads = static_cast<int>(read_u32(f));
    config.tx_layers = static_cast<int>(read_u32(f));
    config.kernel = static_cast<int>(read_u32(f));
    config.ffn_mult = static_cast<int>(read_u32(f));

    ModelParams params = make_param_skeleton(config);
    const std::uint32_t count = read_u32(f);
    if (count != params.tensors.size())
        throw std::runtime_error("load_checkpoint: tensor count does not match the config");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const std::uint32_t ndim = read_u32(f);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(read_u32(f));
        ad::Tensor& dst = params.at(name);  // throws on unknown names
        if (dst.shape != shape)
            throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
        for (auto& v : dst.data) {
            char buf[4];
            f.read(buf, 4);
            float fv;
            std::memcpy(&fv, buf, 4);
            v = static_cast<double>(fv);
        }
    }
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
    return {config, std::move(params)};
}

}  // namespace ambiup
