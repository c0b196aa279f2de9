#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "ardiff/denoiser.hpp"
#include "ardiff/lattice.hpp"
#include "ardiff/schedule.hpp"

namespace ardiff {

struct TrainConfig {
    int steps = 2000;
    int batch_size = 16;
    double learning_rate = 2e-4;
    /// The last `finetune_steps` steps run at `finetune_learning_rate`.
    int finetune_steps = 0;
    double finetune_learning_rate = 1e-5;
    double momentum = 0.9;
    double grad_clip_norm = 1.0;
    double ema_decay = 0.999;
    std::uint64_t seed = 0;
    /// Latents are multiplied by this before corruption.
    double scale_factor = 0.5;
    FoppOptions fopp;

    void validate() const;
};

struct SyntheticDatasetSpec {
    int n_sequences = 512;
    int frames = 8;
    int tokens = 1;
    int dim = 2;
    double omega_min = 0.1;  // radians per frame
    double omega_max = 0.5;
    double noise_std = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Rotating points: each token starts uniformly on the unit circle in its
/// first two channels and turns by a per-sequence angle omega each frame,
/// with i.i.d. Gaussian perturbations on every channel.
std::vector<LatentVideo> make_synthetic_dataset(const SyntheticDatasetSpec& spec);

struct LossRecord {
    int step = 0;
    double loss = 0.0;
    double grad_norm = 0.0;  // before clipping
    double learning_rate = 0.0;

    friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct StepObservation {
    int step;
    std::span<const TrainingSample> batch;
    double grad_norm_before_clip;
    double grad_norm_after_clip;
    const DenoiserParams& params;  // after the update
    const DenoiserParams& ema;
};

using StepObserver = std::function<void(const StepObservation&)>;

struct TrainResult {
    DenoiserParams params;
    DenoiserParams ema;
    std::vector<LossRecord> log;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// SGD with momentum on FoPP-corrupted batches, global-norm gradient
/// clipping, and an exponential moving average of the weights. Fully
/// determined by config.seed. Initial weights come from `initial` when given.
TrainResult train(const TrainConfig& config, std::span<const LatentVideo> dataset, const DenoiserConfig& model,
                  const NoiseSchedule& sched, const StepObserver& observer = {},
                  const DenoiserParams* initial = nullptr);

/// Seed for the initial weights of a run with the given training seed.
std::uint64_t init_seed(std::uint64_t train_seed);

/// CSV with header "step,loss,grad_norm,lr".
void write_loss_csv(std::ostream& os, std::span<const LossRecord> log);

double global_norm(std::span<const double> values);

}  // namespace ardiff
