#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ardiff/ad_scheduler.hpp"
#include "ardiff/denoiser.hpp"
#include "ardiff/schedule.hpp"

namespace ardiff {

enum class SampleMode {
    RecorruptDeterministic,  // DDIM (eta = 0) jump between mapped timesteps
    RecorruptStochastic,     // re-noise the x0 estimate at the new timestep
    Posterior,               // ancestral posterior steps; needs N == T
};

std::string_view mode_name(SampleMode mode);
SampleMode parse_mode(std::string_view name);

struct SampleConfig {
    int frames = 8;
    int grid_steps = 50;  // N
    int difference = 0;   // s
    SampleMode mode = SampleMode::RecorruptDeterministic;
    std::uint64_t seed = 0;
    double scale_factor = 0.5;  // must match training
};

/// Maps a noisy video and its per-frame diffusion timesteps to an x0 estimate.
using X0Predictor = std::function<LatentVideo(const LatentVideo& z_noisy, const TimestepComposition& timesteps)>;

struct Transition {
    std::size_t step;
    int frame;
    int from_level;  // grid levels
    int to_level;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Optional instrumentation of a generation run.
struct GenerationTrace {
    std::size_t model_calls = 0;
    std::vector<Transition> transitions;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Walks the AD plan for (F, N, s): one predictor call per step over the
/// whole sequence, then each frame whose level changed moves from its old
/// timestep to its new one; unchanged frames are carried over untouched. The
/// result is divided by scale_factor.
LatentVideo generate(const X0Predictor& predictor, int tokens, int dim, const NoiseSchedule& sched,
                     const SampleConfig& config, Rng& rng, GenerationTrace* trace = nullptr);

LatentVideo generate(const DenoiserParams& params, const DenoiserConfig& model, const NoiseSchedule& sched,
                     const SampleConfig& config, Rng& rng, GenerationTrace* trace = nullptr);

}  // namespace ardiff
