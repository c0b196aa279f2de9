#include "ardiff/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "ardiff/kernels.hpp"

namespace ardiff {

namespace {

Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id)};
    return Rng(seq);
}

enum Stream : std::uint64_t {
    kShuffle = 1,
    kComposition = 2,
    kNoise = 3,
    kInit = 4,
};

}  // namespace

void TrainConfig::validate() const {
    if (steps < 0 || batch_size < 1) {
        throw std::invalid_argument("TrainConfig: steps must be >= 0 and batch_size >= 1");
    }
    if (!(learning_rate >= 0.0) || !(finetune_learning_rate >= 0.0) || finetune_steps < 0) {
        throw std::invalid_argument("TrainConfig: learning rates and finetune_steps must be non-negative");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("TrainConfig: momentum must lie in [0, 1)");
    }
    if (!(grad_clip_norm > 0.0)) {
        throw std::invalid_argument("TrainConfig: grad_clip_norm must be positive");
    }
    if (!(ema_decay > 0.0 && ema_decay < 1.0)) {
        throw std::invalid_argument("TrainConfig: ema_decay must lie in (0, 1)");
    }
    if (!(scale_factor > 0.0)) {
        throw std::invalid_argument("TrainConfig: scale_factor must be positive");
    }
}

void SyntheticDatasetSpec::validate() const {
    if (n_sequences < 1 || frames < 2 || tokens < 1 || dim < 2) {
        throw std::invalid_argument("SyntheticDatasetSpec: need n >= 1, F >= 2, L >= 1, D >= 2");
    }
    if (!(omega_min <= omega_max)) {
        throw std::invalid_argument("SyntheticDatasetSpec: angular velocity range is not ordered");
    }
    if (!(noise_std >= 0.0)) {
        throw std::invalid_argument("SyntheticDatasetSpec: noise std must be non-negative");
    }
}

std::vector<LatentVideo> make_synthetic_dataset(const SyntheticDatasetSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> omega_dist(spec.omega_min, spec.omega_max);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<LatentVideo> out;
    out.reserve(static_cast<std::size_t>(spec.n_sequences));
    const auto D = static_cast<std::size_t>(spec.dim);
    for (int n = 0; n < spec.n_sequences; ++n) {
        LatentVideo v(spec.frames, spec.tokens, spec.dim);
        const double omega = spec.omega_min == spec.omega_max ? spec.omega_min : omega_dist(rng);
        const double c = std::cos(omega);
        const double s = std::sin(omega);
        auto first = v.frame(0);
        for (int l = 0; l < spec.tokens; ++l) {
            const double theta = angle(rng);
            first[l * D] = std::cos(theta);
            first[l * D + 1] = std::sin(theta);
        }
        for (int f = 1; f < spec.frames; ++f) {
            const auto prev = v.frame(f - 1);
            auto cur = v.frame(f);
            for (int l = 0; l < spec.tokens; ++l) {
                const std::size_t o = l * D;
                cur[o] = c * prev[o] - s * prev[o + 1];
                cur[o + 1] = s * prev[o] + c * prev[o + 1];
                for (std::size_t k = 2; k < D; ++k) {
                    cur[o + k] = prev[o + k];
                }
            }
            if (spec.noise_std > 0.0) {
                for (double& x : cur) {
                    x += spec.noise_std * noise(rng);
                }
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

double global_norm(std::span<const double> values) { return std::sqrt(kernels::sum_squares(values)); }

std::uint64_t init_seed(std::uint64_t train_seed) { return stream(train_seed, kInit)(); }

TrainResult train(const TrainConfig& config, std::span<const LatentVideo> dataset, const DenoiserConfig& model,
                  const NoiseSchedule& sched, const StepObserver& observer, const DenoiserParams* initial) {
    config.validate();
    model.validate();
    if (dataset.empty()) {
        throw std::invalid_argument("train: empty dataset");
    }
    for (const LatentVideo& v : dataset) {
        if (v.frames() != model.frames || v.tokens() != model.tokens || v.dim() != model.dim) {
            throw std::invalid_argument("train: dataset shape does not match the denoiser config");
        }
    }
    if (sched.timesteps() != model.timesteps) {
        throw std::invalid_argument("train: schedule length does not match the denoiser config");
    }

    DenoiserParams params = initial != nullptr ? *initial : DenoiserParams::initialize(model, init_seed(config.seed));
    if (!(params.config() == model)) {
        throw std::invalid_argument("train: initial parameters were built for a different config");
    }
    DenoiserParams ema = params;
    std::vector<double> velocity(params.values().size(), 0.0);

    const CountTables tables = CountTables::build(model.frames, model.timesteps);
    Rng shuffle_rng = stream(config.seed, kShuffle);
    Rng comp_rng = stream(config.seed, kComposition);
    Rng noise_rng = stream(config.seed, kNoise);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<std::size_t> order(dataset.size());
    std::size_t cursor = order.size();

    TrainResult result{params, ema, {}};
    result.log.reserve(static_cast<std::size_t>(config.steps));
    std::vector<TrainingSample> batch;
    double last_grad_norm = 0.0;

    for (int step = 1; step <= config.steps; ++step) {
        batch.clear();
        for (int b = 0; b < config.batch_size; ++b) {
            if (cursor == order.size()) {
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                std::shuffle(order.begin(), order.end(), shuffle_rng);
                cursor = 0;
            }
            LatentVideo z0 = dataset[order[cursor++]];
            for (double& x : z0.data()) {
                x *= config.scale_factor;
            }
            TimestepComposition comp = sample_training_composition(tables, config.fopp, comp_rng);
            LatentVideo eps(model.frames, model.tokens, model.dim);
            for (double& x : eps.data()) {
                x = normal(noise_rng);
            }
            batch.push_back(TrainingSample{std::move(z0), std::move(comp), std::move(eps)});
        }

        LossAndGrad lg = [&] {
            try {
                return loss_and_grad(params, model, batch, sched);
            } catch (const NonFiniteLoss& e) {
                std::ostringstream msg;
                msg << "training diverged at step " << step << ": " << e.what() << "; composition "
                    << batch[e.batch_index()].composition << "; previous grad norm " << last_grad_norm
                    << "; parameter norm " << global_norm(params.values());
                throw TrainingDiverged(msg.str());
            }
        }();

        auto grad = lg.grads.values();
        const double norm = global_norm(grad);
        double clipped = norm;
        if (norm > config.grad_clip_norm) {
            const double scale = config.grad_clip_norm / norm;
            for (double& g : grad) g *= scale;
            clipped = global_norm(grad);
        }

        const bool finetune = step > config.steps - config.finetune_steps;
        const double lr = finetune ? config.finetune_learning_rate : config.learning_rate;
        auto p = params.values();
        for (std::size_t i = 0; i < p.size(); ++i) {
            velocity[i] = config.momentum * velocity[i] + grad[i];
            p[i] -= lr * velocity[i];
        }
        auto e = ema.values();
        for (std::size_t i = 0; i < e.size(); ++i) {
            e[i] = config.ema_decay * e[i] + (1.0 - config.ema_decay) * p[i];
        }

        result.log.push_back(LossRecord{step, lg.loss, norm, lr});
        last_grad_norm = norm;
        if (observer) {
            observer(StepObservation{step, batch, norm, clipped, params, ema});
        }
    }
    result.params = std::move(params);
    result.ema = std::move(ema);
    return result;
}

void write_loss_csv(std::ostream& os, std::span<const LossRecord> log) {
    os << "step,loss,grad_norm,lr\n";
    char buf[128];
    for (const LossRecord& r : log) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.step, r.loss, r.grad_norm, r.learning_rate);
        os << buf;
    }
}

}  // namespace ardiff
