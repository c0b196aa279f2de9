#pragma once

// Per-frame diffusion math. Timesteps run 0..T where t = 0 is the clean
// signal (alpha_bar(0) = 1). Every stochastic operation takes its noise from
// the caller; nothing here owns an RNG.

#include <cstddef>
#include <span>
#include <vector>

namespace ardiff {

class NoiseSchedule {
public:
    /// betas linearly interpolated from beta_start (t = 1) to beta_end (t = T).
    static NoiseSchedule linear(int timesteps, double beta_start, double beta_end);

    /// Builds a schedule from explicit betas (betas[0] is beta_1).
    static NoiseSchedule from_betas(std::vector<double> betas);

    int timesteps() const { return static_cast<int>(betas_.size()); }

    // Valid for t in 1..T.
    double beta(int t) const;
    double alpha(int t) const;
    // Valid for t in 0..T.
    double alpha_bar(int t) const;

private:
    NoiseSchedule() = default;

    std::vector<double> betas_;       // betas_[t - 1]
    std::vector<double> alpha_bars_;  // alpha_bars_[t], alpha_bars_[0] == 1
};

/// F frames of L tokens with D channels, stored frame-major.
class LatentVideo {
public:
    LatentVideo() = default;
    LatentVideo(int frames, int tokens, int dim);
    LatentVideo(int frames, int tokens, int dim, std::vector<double> data);

    int frames() const { return frames_; }
    int tokens() const { return tokens_; }
    int dim() const { return dim_; }
    std::size_t frame_size() const { return static_cast<std::size_t>(tokens_) * dim_; }

    std::span<double> frame(int f);
    std::span<const double> frame(int f) const;
    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool all_finite() const;
    bool same_shape(const LatentVideo& other) const;

    friend bool operator==(const LatentVideo&, const LatentVideo&) = default;

private:
    int frames_ = 0;
    int tokens_ = 0;
    int dim_ = 0;
    std::vector<double> data_;
};

// Frame-level kernels. All inputs are one frame (L*D values); `out` must have
// the same length and may alias an input.

/// sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps
void corrupt_frame(std::span<const double> z0, int t, std::span<const double> eps, const NoiseSchedule& sched,
                   std::span<double> out);
std::vector<double> corrupt_frame(std::span<const double> z0, int t, std::span<const double> eps,
                                  const NoiseSchedule& sched);

/// Inverts corrupt_frame for the noise given a clean estimate. Requires t >= 1.
void eps_from_x0(std::span<const double> z_t, std::span<const double> x0_hat, int t, const NoiseSchedule& sched,
                 std::span<double> out);
std::vector<double> eps_from_x0(std::span<const double> z_t, std::span<const double> x0_hat, int t,
                                const NoiseSchedule& sched);

/// One ancestral step t -> t-1 from the Gaussian posterior q(z_{t-1} | z_t, x0).
/// The noise term is dropped at t = 1, where the posterior collapses onto x0_hat.
void posterior_step(std::span<const double> z_t, std::span<const double> x0_hat, int t,
                    std::span<const double> noise, const NoiseSchedule& sched, std::span<double> out);
std::vector<double> posterior_step(std::span<const double> z_t, std::span<const double> x0_hat, int t,
                                   std::span<const double> noise, const NoiseSchedule& sched);

/// Posterior mean and variance of the step t -> t-1 (t >= 1).
struct PosteriorMoments {
    double mean_z_coef;    // coefficient on z_t after substituting the noise estimate
    double mean_x0_coef;   // coefficient on x0_hat
    double variance;       // beta-tilde
};
PosteriorMoments posterior_moments(int t, const NoiseSchedule& sched);

/// Deterministic (eta = 0) DDIM jump from t to t_prev < t.
void ddim_step(std::span<const double> z_t, std::span<const double> x0_hat, int t, int t_prev,
               const NoiseSchedule& sched, std::span<double> out);
std::vector<double> ddim_step(std::span<const double> z_t, std::span<const double> x0_hat, int t, int t_prev,
                              const NoiseSchedule& sched);

}  // namespace ardiff
