#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ambiup/dataset.hpp"
#include "ambiup/loss.hpp"
#include "ambiup/model.hpp"

namespace ambiup {

/// Optimization settings. Defaults are the desk-scale preset; full() mirrors
/// the large-scale run (8e5 steps, batch 32, 120k-sample crops).
struct TrainConfig {
    std::int64_t steps = 500;
    int batch_size = 4;
    double lr_max = 5e-5;
    double lr_min = 1e-7;
    int crop_len = 3200;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    int workers = 1;
    std::int64_t val_every = 0;  // 0 -> max(steps / 20, 1)

    static TrainConfig full() {
        TrainConfig c;
        c.steps = 800000;
        c.batch_size = 32;
        c.crop_len = 120000;
        return c;
    }

    void validate() const;
};

/// Cosine annealing between lr_max (step 0) and lr_min (step == steps), both
/// endpoints exact.
double cosine_lr(std::int64_t step, const TrainConfig& cfg);

/// Adam moment accumulators, one pair per parameter tensor.
struct OptimizerState {
    std::vector<ad::Tensor> m;
    std::vector<ad::Tensor> v;
    std::int64_t step = 0;
};

OptimizerState make_optimizer_state(const ModelParams& params);

/// Bias-corrected Adam update, applied in place. grads must be parallel to
/// params.tensors. Throws on a non-finite update.
void adam_step(ModelParams& params, const std::vector<ad::Tensor>& grads, OptimizerState& state,
               double lr, const TrainConfig& cfg);

/// One training example as a loss graph: conditional forward (stereo in, X/Y
/// target) plus the total loss. Exposed for gradient checks.
struct ExampleGraph {
    ad::Tape tape;
    ParamNodes params;
    LossNodes loss;
    SpatialNodes spatial;
    int pred = -1;
};

void build_example_graph(ExampleGraph& graph, const ModelParams& params, const ModelConfig& config,
                         const StftLossConfig& stft_cfg, const ad::Tensor& stereo,
                         const ad::Tensor& target_xy, const std::vector<double>& eps);

/// Runs backward and gathers per-parameter gradients in params order. Throws
/// naming the tensor if any gradient is non-finite.
std::vector<ad::Tensor> collect_gradients(ExampleGraph& graph, const ModelParams& params);

struct StepMetrics {
    std::int64_t step = 0;
    double lr = 0.0;
    LossBreakdown loss;
    std::string split;  // "train" or "val"
};

struct TrainResult {
    std::vector<StepMetrics> metrics;
    double best_val_loss = 0.0;
    std::int64_t best_val_step = -1;
    std::string best_checkpoint_path;
    std::string last_checkpoint_path;
    std::string metrics_path;
};

/// Full training loop over a synthesized corpus: seeded batch sampling and
/// crops, summed batch gradients, Adam with cosine annealing, periodic
/// validation (posterior mean, fixed crops) with best/last checkpoints kept.
/// Deterministic for a fixed seed at any worker count.
TrainResult train(const Manifest& manifest, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const StftLossConfig& stft_cfg, const std::string& out_dir);

}  // namespace ambiup
