#include "ardiff/sampling.hpp"

#include <random>
#include <sstream>

namespace ardiff {

std::string_view mode_name(SampleMode mode) {
    switch (mode) {
        case SampleMode::RecorruptDeterministic:
            return "recorrupt_deterministic";
        case SampleMode::RecorruptStochastic:
            return "recorrupt_stochastic";
        case SampleMode::Posterior:
            return "posterior";
    }
    return "unknown";
}

SampleMode parse_mode(std::string_view name) {
    for (SampleMode m : {SampleMode::RecorruptDeterministic, SampleMode::RecorruptStochastic, SampleMode::Posterior}) {
        if (name == mode_name(m)) {
            return m;
        }
    }
    throw std::invalid_argument("unknown sampling mode '" + std::string(name) + "'");
}

LatentVideo generate(const X0Predictor& predictor, int tokens, int dim, const NoiseSchedule& sched,
                     const SampleConfig& config, Rng& rng, GenerationTrace* trace) {
    const int T = sched.timesteps();
    if (config.grid_steps < 1 || config.grid_steps > T) {
        throw std::invalid_argument("generate: grid steps must lie in [1, T]");
    }
    if (config.mode == SampleMode::Posterior && config.grid_steps != T) {
        throw std::invalid_argument("generate: posterior mode needs the full timestep grid (N == T)");
    }
    if (!(config.scale_factor > 0.0)) {
        throw std::invalid_argument("generate: scale_factor must be positive");
    }
    const TrajectoryPlan plan = plan_trajectory(config.frames, config.grid_steps, config.difference);
    const std::vector<int> levels = grid_map(config.grid_steps, T);
    auto timesteps_of = [&](const TimestepComposition& grid) {
        std::vector<int> t(static_cast<std::size_t>(grid.frames()));
        for (int f = 0; f < grid.frames(); ++f) {
            t[static_cast<std::size_t>(f)] = levels[static_cast<std::size_t>(grid[f])];
        }
        return TimestepComposition(std::move(t), T);
    };

    std::normal_distribution<double> normal(0.0, 1.0);
    LatentVideo z(config.frames, tokens, dim);
    for (double& x : z.data()) {
        x = normal(rng);
    }
    std::vector<double> noise(z.frame_size());

    for (std::size_t k = 0; k < plan.size(); ++k) {
        const TimestepComposition& before = plan.before(k);
        const TrajectoryStep& step = plan.steps[k];
        const TimestepComposition input_t = timesteps_of(before);
        const LatentVideo x0 = predictor(z, input_t);
        if (trace != nullptr) {
            ++trace->model_calls;
        }
        if (!x0.same_shape(z)) {
            throw GenerationError("generate: predictor returned the wrong shape");
        }
        for (int f = 0; f < config.frames; ++f) {
            if (!step.update_mask[static_cast<std::size_t>(f)]) {
                continue;
            }
            const int from = levels[static_cast<std::size_t>(before[f])];
            const int to = levels[static_cast<std::size_t>(step.composition[f])];
            auto zf = z.frame(f);
            const auto xf = x0.frame(f);
            switch (config.mode) {
                case SampleMode::RecorruptDeterministic:
                    ddim_step(zf, xf, from, to, sched, zf);
                    break;
                case SampleMode::RecorruptStochastic:
                    for (double& x : noise) x = normal(rng);
                    corrupt_frame(xf, to, noise, sched, zf);
                    break;
                case SampleMode::Posterior:
                    for (int t = from; t > to; --t) {
                        if (t > 1) {
                            for (double& x : noise) x = normal(rng);
                        }
                        posterior_step(zf, xf, t, noise, sched, zf);
                    }
                    break;
            }
            if (trace != nullptr) {
                trace->transitions.push_back(Transition{k, f, before[f], step.composition[f]});
            }
        }
        if (!z.all_finite()) {
            std::ostringstream msg;
            msg << "generate: non-finite latent after step " << k << " (levels " << step.composition << ", mode "
                << mode_name(config.mode) << ")";
            throw GenerationError(msg.str());
        }
    }
    for (double& x : z.data()) {
        x /= config.scale_factor;
    }
    return z;
}

LatentVideo generate(const DenoiserParams& params, const DenoiserConfig& model, const NoiseSchedule& sched,
                     const SampleConfig& config, Rng& rng, GenerationTrace* trace) {
    if (config.frames != model.frames) {
        throw std::invalid_argument("generate: sample frame count does not match the denoiser config");
    }
    const X0Predictor predictor = [&](const LatentVideo& z, const TimestepComposition& t) {
        return forward(params, model, z, t, sched);
    };
    return generate(predictor, model.tokens, model.dim, sched, config, rng, trace);
}

}  // namespace ardiff
