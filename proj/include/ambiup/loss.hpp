#pragma once

#include <vector>

#include "ambiup/autodiff.hpp"
#include "ambiup/tensor.hpp"

namespace ambiup {

/// Multi-resolution STFT settings: three resolutions with Hann windows,
/// reflection padding at the edges, magnitude taken one-sided.
struct StftLossConfig {
    std::vector<int> fft_sizes{512, 1024, 2048};
    std::vector<int> window_sizes{240, 600, 1200};
    std::vector<int> hop_sizes{50, 120, 240};
    double mag_eps = 1e-7;  // inside the magnitude square root

    void validate() const;
};

struct LossBreakdown {
    double stft = 0.0;
    double l2 = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

/// Sum over resolutions and channels of || |STFT(pred)| - |STFT(target)| ||_1.
/// No frame-count normalization. pred/target are [C x L].
double stft_loss(const ad::Tensor& pred, const ad::Tensor& target, const StftLossConfig& cfg);

/// Sum of squared differences over all elements.
double l2_loss(const ad::Tensor& pred, const ad::Tensor& target);

/// KL(q || N(0, I)) for a diagonal Gaussian: 0.5 sum(mu^2 + exp(lv) - lv - 1).
double kl_loss(const std::vector<double>& mu, const std::vector<double>& logvar);

/// total = stft + 10 * l2 + kl.
LossBreakdown total_loss(const ad::Tensor& pred, const ad::Tensor& target,
                         const std::vector<double>& mu, const std::vector<double>& logvar,
                         const StftLossConfig& cfg);

// Tape ops for training. Targets are constants.
int stft_l1_node(ad::Tape& tape, int pred, const ad::Tensor& target, const StftLossConfig& cfg);
int l2_node(ad::Tape& tape, int pred, const ad::Tensor& target);
int kl_node(ad::Tape& tape, int mu, int logvar);

struct LossNodes {
    int stft = -1;
    int l2 = -1;
    int kl = -1;
    int total = -1;
};
LossNodes total_loss_nodes(ad::Tape& tape, int pred, const ad::Tensor& target, int mu, int logvar,
                           const StftLossConfig& cfg);

LossBreakdown breakdown_from_nodes(const ad::Tape& tape, const LossNodes& nodes);

}  // namespace ambiup
