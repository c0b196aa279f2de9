#pragma once

// A small pre-activation-free transformer over F*L latent tokens. Tokens of
// frame f see every token of frames 0..f and nothing later; each frame is
// conditioned on its own diffusion timestep through a learned embedding row.
// The network predicts the clean latent x0 directly.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ardiff/lattice.hpp"
#include "ardiff/schedule.hpp"

namespace ardiff {

struct DenoiserConfig {
    int frames = 8;
    int tokens = 1;
    int dim = 2;
    int timesteps = 100;  // embedding table has timesteps + 1 rows
    int d_model = 32;
    int n_layers = 2;
    int n_heads = 2;
    int mlp_hidden = 64;
    double x0_clamp = 2.0;  // 0 disables

    void validate() const;
    friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Block lower-triangular attention pattern over frame blocks of L tokens.
class CausalMask {
public:
    CausalMask(int frames, int tokens);

    int size() const { return frames_ * tokens_; }
    bool allowed(int query, int key) const { return key < row_limit(query); }
    /// Keys [0, row_limit(q)) are visible to query q.
    int row_limit(int query) const { return (query / tokens_ + 1) * tokens_; }
    std::size_t allowed_count() const;
    std::vector<bool> dense() const;  // row-major size() x size()

private:
    int frames_;
    int tokens_;
};

CausalMask causal_mask(int frames, int tokens);

struct TensorSpec {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Flat storage for every parameter tensor; gradients share the layout.
class DenoiserParams {
public:
    static DenoiserParams zeros(const DenoiserConfig& config);

    /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero; output
    /// projection zero, so the untrained network predicts x0 = 0.
    static DenoiserParams initialize(const DenoiserConfig& config, std::uint64_t seed);

    const DenoiserConfig& config() const { return config_; }
    const std::vector<TensorSpec>& tensors() const { return specs_; }
    const TensorSpec& spec(const std::string& name) const;

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::span<double> tensor(const std::string& name);
    std::span<const double> tensor(const std::string& name) const;
    std::span<double> tensor(const TensorSpec& spec) { return values().subspan(spec.offset, spec.size); }
    std::span<const double> tensor(const TensorSpec& spec) const { return values().subspan(spec.offset, spec.size); }

    bool all_finite() const;
    bool same_layout(const DenoiserParams& other) const;

    friend bool operator==(const DenoiserParams& a, const DenoiserParams& b) {
        return a.config_ == b.config_ && a.values_ == b.values_;
    }

    // Checkpoint format: 8-byte magic "ARDPARAM", u32 version, the config
    // (u32 frames, tokens, dim, timesteps, d_model, n_layers, n_heads,
    // mlp_hidden; f64 x0_clamp), u32 tensor count, then per tensor: u32 name
    // length, name bytes, u32 rank, u32 dims, float32 values. All little-endian.
    void save(std::ostream& os) const;
    void save(const std::string& path) const;
    static DenoiserParams load(std::istream& is);
    static DenoiserParams load(const std::string& path);

private:
    explicit DenoiserParams(const DenoiserConfig& config);

    DenoiserConfig config_;
    std::vector<TensorSpec> specs_;
    std::vector<double> values_;
};

using DenoiserGrads = DenoiserParams;

/// x0 prediction for one noisy video. `composition` holds true diffusion
/// timesteps in [0, T].
LatentVideo forward(const DenoiserParams& params, const DenoiserConfig& config, const LatentVideo& z_noisy,
                    const TimestepComposition& composition, const NoiseSchedule& sched);

struct TrainingSample {
    LatentVideo z0;
    TimestepComposition composition;
    LatentVideo eps;
};

struct LossAndGrad {
    double loss = 0.0;
    DenoiserGrads grads;
};

class NonFiniteLoss : public std::runtime_error {
public:
    NonFiniteLoss(std::size_t batch_index, double value);
    std::size_t batch_index() const { return batch_index_; }

private:
    std::size_t batch_index_;
};

/// Mean squared x0 error over batch, frames, tokens and channels, after
/// corrupting each z0 frame at its composition timestep with the given eps,
/// together with its exact gradient.
LossAndGrad loss_and_grad(const DenoiserParams& params, const DenoiserConfig& config,
                          std::span<const TrainingSample> batch, const NoiseSchedule& sched);

/// Same loss without the backward pass.
double loss_only(const DenoiserParams& params, const DenoiserConfig& config, std::span<const TrainingSample> batch,
                 const NoiseSchedule& sched);

}  // namespace ardiff
