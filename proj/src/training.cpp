#include "ambiup/training.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <json.hpp>

namespace ambiup {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
    if (steps <= 0) throw std::invalid_argument("TrainConfig: steps must be positive");
    if (batch_size <= 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (!(lr_min < lr_max)) throw std::invalid_argument("TrainConfig: need lr_min < lr_max");
    if (crop_len <= 0) throw std::invalid_argument("TrainConfig: crop_len must be positive");
}

double cosine_lr(std::int64_t step, const TrainConfig& cfg) {
    cfg.validate();
    if (step < 0 || step > cfg.steps) throw std::invalid_argument("cosine_lr: step out of range");
    const double pi = 3.1415926535897932384626433832795;
    const double f =
        0.5 * (1.0 + std::cos(pi * static_cast<double>(step) / static_cast<double>(cfg.steps)));
    // Convex combination keeps both endpoints exact.
    return cfg.lr_max * f + cfg.lr_min * (1.0 - f);
}

OptimizerState make_optimizer_state(const ModelParams& params) {
    OptimizerState state;
    for (const auto& [name, t] : params.tensors) {
        state.m.emplace_back(t.shape);
        state.v.emplace_back(t.shape);
    }
    return state;
}

void adam_step(ModelParams& params, const std::vector<ad::Tensor>& grads, OptimizerState& state,
               double lr, const TrainConfig& cfg) {
    if (grads.size() != params.tensors.size())
        throw std::invalid_argument("adam_step: gradient count mismatch");
    state.step += 1;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        auto& [name, p] = params.tensors[i];
        if (!grads[i].same_shape(p)) throw std::invalid_argument("adam_step: shape mismatch at " + name);
        auto& m = state.m[i].data;
        auto& v = state.v[i].data;
        const auto& g = grads[i].data;
        for (std::size_t j = 0; j < g.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            const double update = lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            if (!std::isfinite(update))
                throw std::runtime_error("adam_step: non-finite update for " + name);
            p.data[j] -= update;
        }
    }
}

void build_example_graph(ExampleGraph& graph, const ModelParams& params, const ModelConfig& config,
                         const StftLossConfig& stft_cfg, const ad::Tensor& stereo,
                         const ad::Tensor& target_xy, const std::vector<double>& eps) {
    graph.params = register_params(graph.tape, params, /*requires_grad=*/true);
    ad::Tape& tape = graph.tape;

    if (stereo.shape.size() != 2 || stereo.rows() != 2)
        throw std::invalid_argument("build_example_graph: stereo must be [2 x L]");
    const int len = stereo.cols();

    ad::Tensor mono({1, len});
    for (int i = 0; i < len; ++i)
        mono.data[static_cast<std::size_t>(i)] =
            0.5 * (stereo.row(0)[i] + stereo.row(1)[i]);

    const int mono_leaf = tape.leaf(std::move(mono));
    const int stereo_leaf = tape.leaf(stereo);

    const int z = audio_encoder_nodes(tape, graph.params, config, mono_leaf);
    graph.spatial = spatial_encoder_nodes(tape, graph.params, config, stereo_leaf, eps);
    const int bott = bottleneck_nodes(tape, graph.params, config, z, graph.spatial.sample);
    graph.pred = decoder_nodes(tape, graph.params, config, bott);
    graph.loss = total_loss_nodes(tape, graph.pred, target_xy, graph.spatial.mu,
                                  graph.spatial.logvar, stft_cfg);
}

std::vector<ad::Tensor> collect_gradients(ExampleGraph& graph, const ModelParams& params) {
    graph.tape.backward(graph.loss.total);
    std::vector<ad::Tensor> grads;
    grads.reserve(params.tensors.size());
    for (const auto& [name, t] : params.tensors) {
        const ad::Tensor& g = graph.tape.grad(graph.params.at(name));
        for (double v : g.data) {
            if (!std::isfinite(v))
                throw std::runtime_error("backward: non-finite gradient in " + name);
        }
        grads.push_back(g);
    }
    return grads;
}

namespace {

struct ExampleJob {
    ad::Tensor stereo;     // [2 x crop]
    ad::Tensor target_xy;  // [2 x crop]
    std::vector<double> eps;
};

struct ExampleResult {
    std::vector<ad::Tensor> grads;
    LossBreakdown loss;
};

ad::Tensor crop_to_tensors(const TrainingPair& cropped, ad::Tensor* target_xy) {
    const int n = static_cast<int>(cropped.stereo.num_samples());
    ad::Tensor stereo({2, n});
    std::copy(cropped.stereo.channels[0].begin(), cropped.stereo.channels[0].end(),
              stereo.data.begin());
    std::copy(cropped.stereo.channels[1].begin(), cropped.stereo.channels[1].end(),
              stereo.data.begin() + n);
    *target_xy = ad::Tensor({2, n});
    std::copy(cropped.bformat.x.begin(), cropped.bformat.x.end(), target_xy->data.begin());
    std::copy(cropped.bformat.y.begin(), cropped.bformat.y.end(), target_xy->data.begin() + n);
    return stereo;
}

LossBreakdown eval_example(const ModelParams& params, const ModelConfig& config,
                           const StftLossConfig& stft_cfg, const ad::Tensor& stereo,
                           const ad::Tensor& target_xy, const std::vector<double>& eps) {
    // Forward-only pass: parameters registered without gradients.
    ad::Tape tape;
    ParamNodes p = register_params(tape, params, /*requires_grad=*/false);
    const int len = stereo.cols();
    ad::Tensor mono({1, len});
    for (int i = 0; i < len; ++i)
        mono.data[static_cast<std::size_t>(i)] = 0.5 * (stereo.row(0)[i] + stereo.row(1)[i]);
    const int z = audio_encoder_nodes(tape, p, config, tape.leaf(std::move(mono)));
    const SpatialNodes spatial = spatial_encoder_nodes(tape, p, config, tape.leaf(stereo), eps);
    const int bott = bottleneck_nodes(tape, p, config, z, spatial.sample);
    const int pred = decoder_nodes(tape, p, config, bott);
    const LossNodes loss =
        total_loss_nodes(tape, pred, target_xy, spatial.mu, spatial.logvar, stft_cfg);
    return breakdown_from_nodes(tape, loss);
}

json metrics_to_json(const StepMetrics& m) {
    return json{{"step", m.step},   {"lr", m.lr},           {"stft", m.loss.stft},
                {"l2", m.loss.l2},  {"kl", m.loss.kl},      {"total", m.loss.total},
                {"split", m.split}};
}

}  // namespace

TrainResult train(const Manifest& manifest, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const StftLossConfig& stft_cfg, const std::string& out_dir) {
    cfg.validate();
    model_cfg.validate();
    stft_cfg.validate();
    if (cfg.crop_len % model_cfg.frame_stride() != 0)
        throw std::invalid_argument("train: crop_len must be a multiple of the stride product");
    if (manifest.records.empty()) throw std::runtime_error("train: empty corpus manifest");
    if (manifest.train_ids.empty()) throw std::runtime_error("train: empty training split");
    fs::create_directories(out_dir);

    std::unordered_map<std::string, const ManifestRecord*> by_id;
    for (const auto& rec : manifest.records) by_id.emplace(rec.pair_id, &rec);
    auto record_of = [&](const std::string& id) -> const ManifestRecord& {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::runtime_error("train: split references unknown pair " + id);
        return *it->second;
    };

    // Pairs are small at desk scale; cache them on first use.
    std::unordered_map<std::string, TrainingPair> cache;
    auto pair_of = [&](const std::string& id) -> const TrainingPair& {
        auto it = cache.find(id);
        if (it == cache.end()) {
            TrainingPair pair = load_pair(manifest, record_of(id));
            if (pair.stereo.num_samples() < static_cast<std::size_t>(cfg.crop_len))
                throw std::runtime_error("train: pair " + id + " shorter than crop_len");
            it = cache.emplace(id, std::move(pair)).first;
        }
        return it->second;
    };

    ModelParams params = init_model_params(model_cfg, cfg.seed);
    OptimizerState opt = make_optimizer_state(params);
    const std::int64_t val_every = cfg.val_every > 0 ? cfg.val_every : std::max<std::int64_t>(cfg.steps / 20, 1);

    TrainResult result;
    result.metrics_path = (fs::path(out_dir) / "metrics.jsonl").string();
    result.best_checkpoint_path = (fs::path(out_dir) / "checkpoint_best.bin").string();
    result.last_checkpoint_path = (fs::path(out_dir) / "checkpoint_last.bin").string();
    std::ofstream metrics_file(result.metrics_path, std::ios::trunc);
    if (!metrics_file) throw std::runtime_error("train: cannot write " + result.metrics_path);

    const auto latent = static_cast<std::size_t>(model_cfg.latent_dim);
    bool have_best = false;

    auto run_validation = [&](std::int64_t step, double lr) {
        LossBreakdown mean;
        const std::vector<double> eps_zero(latent, 0.0);
        std::size_t count = 0;
        for (const auto& id : manifest.validation_ids) {
            const TrainingPair& pair = pair_of(id);
            // Deterministic validation: leading crop, unit gain, posterior mean.
            TrainingPair head;
            auto cut = [&](const std::vector<double>& ch) {
                return std::vector<double>(ch.begin(), ch.begin() + cfg.crop_len);
            };
            head.stereo = AudioBuffer::stereo(cut(pair.stereo.channels[0]),
                                              cut(pair.stereo.channels[1]), pair.stereo.sample_rate);
            head.bformat = BFormat(pair.bformat.sample_rate, cut(pair.bformat.w),
                                   cut(pair.bformat.x), cut(pair.bformat.y));
            ad::Tensor target;
            const ad::Tensor stereo = crop_to_tensors(head, &target);
            const LossBreakdown b = eval_example(params, model_cfg, stft_cfg, stereo, target, eps_zero);
            mean.stft += b.stft;
            mean.l2 += b.l2;
            mean.kl += b.kl;
            mean.total += b.total;
            ++count;
        }
        if (count == 0) return;
        mean.stft /= static_cast<double>(count);
        mean.l2 /= static_cast<double>(count);
        mean.kl /= static_cast<double>(count);
        mean.total /= static_cast<double>(count);

        StepMetrics vm{step, lr, mean, "val"};
        result.metrics.push_back(vm);
        metrics_file << metrics_to_json(vm).dump() << "\n";

        if (!have_best || mean.total < result.best_val_loss) {
            have_best = true;
            result.best_val_loss = mean.total;
            result.best_val_step = step;
            save_checkpoint(result.best_checkpoint_path, model_cfg, params);
        }
    };

    const std::size_t n_train = manifest.train_ids.size();
    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        const double lr = cosine_lr(step, cfg);

        // All randomness is drawn up front on one stream so results do not
        // depend on the worker count.
        Pcg64 step_rng(derive_seed(cfg.seed, 0x57E9000000ULL + static_cast<std::uint64_t>(step)));
        std::vector<ExampleJob> jobs(static_cast<std::size_t>(cfg.batch_size));
        for (auto& job : jobs) {
            const auto& id = manifest.train_ids[step_rng.uniform_int(n_train)];
            const TrainingPair cropped =
                crop_pair(pair_of(id), static_cast<std::size_t>(cfg.crop_len), step_rng);
            job.stereo = crop_to_tensors(cropped, &job.target_xy);
            job.eps = step_rng.normal_vector(latent);
        }

        std::vector<ExampleResult> results(jobs.size());
        std::atomic<std::size_t> next{0};
        std::mutex error_mutex;
        std::string error_message;
        auto work = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) break;
                try {
                    ExampleGraph graph;
                    build_example_graph(graph, params, model_cfg, stft_cfg, jobs[i].stereo,
                                        jobs[i].target_xy, jobs[i].eps);
                    results[i].loss = breakdown_from_nodes(graph.tape, graph.loss);
                    results[i].grads = collect_gradients(graph, params);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (error_message.empty()) error_message = e.what();
                }
            }
        };
        const int workers = std::max(1, cfg.workers);
        if (workers == 1) {
            work();
        } else {
            std::vector<std::thread> threads;
            for (int t = 0; t < workers; ++t) threads.emplace_back(work);
            for (auto& t : threads) t.join();
        }
        if (!error_message.empty())
            throw std::runtime_error("train: step " + std::to_string(step) + ": " + error_message);

        // Batch gradient = sum of per-example gradients, in example order.
        std::vector<ad::Tensor> batch_grads = std::move(results[0].grads);
        LossBreakdown batch_loss = results[0].loss;
        for (std::size_t i = 1; i < results.size(); ++i) {
            for (std::size_t j = 0; j < batch_grads.size(); ++j) {
                const auto& src = results[i].grads[j].data;
                auto& dst = batch_grads[j].data;
                for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
            }
            batch_loss.stft += results[i].loss.stft;
            batch_loss.l2 += results[i].loss.l2;
            batch_loss.kl += results[i].loss.kl;
            batch_loss.total += results[i].loss.total;
        }
        const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
        batch_loss.stft *= inv_b;
        batch_loss.l2 *= inv_b;
        batch_loss.kl *= inv_b;
        batch_loss.total *= inv_b;
        if (!std::isfinite(batch_loss.total))
            throw std::runtime_error("train: NaN loss at step " + std::to_string(step));

        adam_step(params, batch_grads, opt, lr, cfg);

        StepMetrics sm{step, lr, batch_loss, "train"};
        result.metrics.push_back(sm);
        metrics_file << metrics_to_json(sm).dump() << "\n";

        if ((step + 1) % val_every == 0 || step + 1 == cfg.steps) run_validation(step, lr);
    }

    save_checkpoint(result.last_checkpoint_path, model_cfg, params);
    metrics_file.close();
    return result;
}

}  // namespace ambiup
