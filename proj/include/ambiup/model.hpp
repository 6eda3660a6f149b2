#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ambiup/audio.hpp"
#include "ambiup/autodiff.hpp"
#include "ambiup/rng.hpp"
#include "ambiup/tensor.hpp"

namespace ambiup {

/// Architecture hyperparameters. Defaults are the full-scale configuration;
/// desk() is the reduced CPU-friendly preset used by tests and quick runs.
struct ModelConfig {
    int base_channels = 32;
    std::array<int, 4> strides{2, 4, 5, 8};
    int latent_dim = 64;
    int tx_heads = 8;
    int tx_layers = 8;
    int kernel = 7;
    int ffn_mult = 4;

    static ModelConfig desk() {
        ModelConfig c;
        c.base_channels = 8;
        c.latent_dim = 16;
        c.tx_heads = 2;
        c.tx_layers = 2;
        return c;
    }

    /// Total downsampling factor (product of strides); input lengths are
    /// padded to a multiple of this.
    int frame_stride() const { return strides[0] * strides[1] * strides[2] * strides[3]; }
    int encoder_channels() const { return base_channels * 16; }
    int model_dim() const { return 2 * latent_dim; }
    void validate() const;
};

/// Named parameter tensors in a fixed order; shapes derive from ModelConfig
/// alone.
struct ModelParams {
    std::vector<std::pair<std::string, ad::Tensor>> tensors;
    std::unordered_map<std::string, std::size_t> index;

    void add(const std::string& name, ad::Tensor t);
    ad::Tensor& at(const std::string& name);
    const ad::Tensor& at(const std::string& name) const;
    std::size_t total_parameters() const;
};

/// Zero-valued parameter set with the right names and shapes.
ModelParams make_param_skeleton(const ModelConfig& config);

/// Seeded initialization: convs Kaiming-uniform, LSTM recurrent weights
/// orthogonal per gate, transformer linears Xavier-uniform, layer norms at
/// identity, variational heads zeroed so training starts from the prior.
ModelParams init_model_params(const ModelConfig& config, std::uint64_t seed);

struct SpatialLatent {
    std::vector<double> mu;
    std::vector<double> logvar;
    std::vector<double> sample;
};

/// Z_C ~ N(0, I); mu = 0 and logvar = 0 are recorded alongside the draw.
SpatialLatent sample_prior(const ModelConfig& config, Pcg64& rng);

/// Node ids of every registered parameter within one tape.
struct ParamNodes {
    std::unordered_map<std::string, int> ids;
    int at(const std::string& name) const;
};

ParamNodes register_params(ad::Tape& tape, const ModelParams& params, bool requires_grad);

/// Mono waveform [1 x L] -> latent sequence [latent_dim x L/320].
int audio_encoder_nodes(ad::Tape& tape, const ParamNodes& p, const ModelConfig& config, int input);

struct SpatialNodes {
    int mu = -1;      // [latent x 1]
    int logvar = -1;  // [latent x 1]
    int sample = -1;  // [latent x 1]
};

/// Stereo waveform [2 x L] -> variational spatial embedding. eps is the
/// caller-supplied reparameterization noise.
SpatialNodes spatial_encoder_nodes(ad::Tape& tape, const ParamNodes& p, const ModelConfig& config,
                                   int input, const std::vector<double>& eps);

/// Concatenates the broadcast spatial embedding with the latent sequence and
/// runs the pre-norm transformer stack with sinusoidal positions.
int bottleneck_nodes(ad::Tape& tape, const ParamNodes& p, const ModelConfig& config, int z,
                     int zc_sample);

/// Latent sequence [latent x T] -> waveform [2 x T*320].
int decoder_nodes(ad::Tape& tape, const ParamNodes& p, const ModelConfig& config, int z);

/// Channel attention gate: sigmoid(W2 relu(W1 avg(F))) broadcast over F.
int channel_attention_nodes(ad::Tape& tape, int f, int w1, int b1, int w2, int b2);

enum class UpmixMode { kConditional, kUnconditional };

/// Full inference path. W passes through bit-exact (the input mono, or the
/// stereo downmix in conditional mode); X/Y come from the decoder. Output is
/// trimmed to the input length.
BFormat upmix(const AudioBuffer& input, const ModelParams& params, const ModelConfig& config,
              UpmixMode mode, Pcg64& rng);

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path);

}  // namespace ambiup
