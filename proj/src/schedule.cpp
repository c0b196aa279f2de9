#include "ardiff/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ardiff/kernels.hpp"

namespace ardiff {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
}

void require_timestep(int t, int lo, const NoiseSchedule& sched, const char* what) {
    if (t < lo || t > sched.timesteps()) {
        throw std::out_of_range(std::string(what) + ": timestep " + std::to_string(t) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(sched.timesteps()) + "]");
    }
}

}  // namespace

NoiseSchedule NoiseSchedule::linear(int timesteps, double beta_start, double beta_end) {
    if (timesteps < 1) {
        throw std::invalid_argument("NoiseSchedule: timesteps must be >= 1");
    }
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw std::invalid_argument("NoiseSchedule: require 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(static_cast<std::size_t>(timesteps));
    for (int t = 1; t <= timesteps; ++t) {
        if (timesteps == 1) {
            betas[0] = beta_start;
            break;
        }
        const double frac = static_cast<double>(t - 1) / static_cast<double>(timesteps - 1);
        betas[static_cast<std::size_t>(t - 1)] = beta_start + (beta_end - beta_start) * frac;
    }
    if (timesteps > 1) {
        betas.back() = beta_end;
    }
    return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    if (betas.empty()) {
        throw std::invalid_argument("NoiseSchedule: empty beta sequence");
    }
    NoiseSchedule s;
    s.alpha_bars_.resize(betas.size() + 1);
    s.alpha_bars_[0] = 1.0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0 && betas[i] < 1.0)) {
            throw std::invalid_argument("NoiseSchedule: beta_" + std::to_string(i + 1) + " outside (0, 1)");
        }
        s.alpha_bars_[i + 1] = s.alpha_bars_[i] * (1.0 - betas[i]);
    }
    s.betas_ = std::move(betas);
    return s;
}

double NoiseSchedule::beta(int t) const {
    if (t < 1 || t > timesteps()) {
        throw std::out_of_range("NoiseSchedule::beta: t outside [1, T]");
    }
    return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const { return 1.0 - beta(t); }

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > timesteps()) {
        throw std::out_of_range("NoiseSchedule::alpha_bar: t outside [0, T]");
    }
    return alpha_bars_[static_cast<std::size_t>(t)];
}

LatentVideo::LatentVideo(int frames, int tokens, int dim)
    : LatentVideo(frames, tokens, dim,
                  std::vector<double>(static_cast<std::size_t>(frames > 0 ? frames : 0) *
                                      static_cast<std::size_t>(tokens > 0 ? tokens : 0) *
                                      static_cast<std::size_t>(dim > 0 ? dim : 0))) {}

LatentVideo::LatentVideo(int frames, int tokens, int dim, std::vector<double> data)
    : frames_(frames), tokens_(tokens), dim_(dim), data_(std::move(data)) {
    if (frames < 1 || tokens < 1 || dim < 1) {
        throw std::invalid_argument("LatentVideo: all extents must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(frames) * tokens * dim) {
        throw std::invalid_argument("LatentVideo: data length does not match F*L*D");
    }
}

std::span<double> LatentVideo::frame(int f) {
    if (f < 0 || f >= frames_) {
        throw std::out_of_range("LatentVideo::frame");
    }
    return std::span<double>(data_).subspan(static_cast<std::size_t>(f) * frame_size(), frame_size());
}

std::span<const double> LatentVideo::frame(int f) const {
    if (f < 0 || f >= frames_) {
        throw std::out_of_range("LatentVideo::frame");
    }
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(f) * frame_size(), frame_size());
}

bool LatentVideo::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

bool LatentVideo::same_shape(const LatentVideo& other) const {
    return frames_ == other.frames_ && tokens_ == other.tokens_ && dim_ == other.dim_;
}

void corrupt_frame(std::span<const double> z0, int t, std::span<const double> eps, const NoiseSchedule& sched,
                   std::span<double> out) {
    require_timestep(t, 0, sched, "corrupt_frame");
    require_same_length(z0, eps, "corrupt_frame");
    require_same_length(z0, out, "corrupt_frame");
    const double abar = sched.alpha_bar(t);
    kernels::axpby(std::sqrt(abar), z0, std::sqrt(1.0 - abar), eps, out);
}

std::vector<double> corrupt_frame(std::span<const double> z0, int t, std::span<const double> eps,
                                  const NoiseSchedule& sched) {
    std::vector<double> out(z0.size());
    corrupt_frame(z0, t, eps, sched, out);
    return out;
}

void eps_from_x0(std::span<const double> z_t, std::span<const double> x0_hat, int t, const NoiseSchedule& sched,
                 std::span<double> out) {
    require_timestep(t, 1, sched, "eps_from_x0");
    require_same_length(z_t, x0_hat, "eps_from_x0");
    require_same_length(z_t, out, "eps_from_x0");
    const double abar = sched.alpha_bar(t);
    const double inv_sigma = 1.0 / std::sqrt(1.0 - abar);
    kernels::axpby(inv_sigma, z_t, -std::sqrt(abar) * inv_sigma, x0_hat, out);
}

std::vector<double> eps_from_x0(std::span<const double> z_t, std::span<const double> x0_hat, int t,
                                const NoiseSchedule& sched) {
    std::vector<double> out(z_t.size());
    eps_from_x0(z_t, x0_hat, t, sched, out);
    return out;
}

PosteriorMoments posterior_moments(int t, const NoiseSchedule& sched) {
    require_timestep(t, 1, sched, "posterior_moments");
    // mu = (z_t - beta_t / sqrt(1 - abar_t) * eps) / sqrt(alpha_t), with
    // eps = (z_t - sqrt(abar_t) x0) / sqrt(1 - abar_t).
    const double beta = sched.beta(t);
    const double alpha = sched.alpha(t);
    const double abar = sched.alpha_bar(t);
    const double abar_prev = sched.alpha_bar(t - 1);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    const double eps_coef = beta / (1.0 - abar);
    PosteriorMoments m{};
    m.mean_z_coef = inv_sqrt_alpha * (1.0 - eps_coef);
    m.mean_x0_coef = inv_sqrt_alpha * eps_coef * std::sqrt(abar);
    m.variance = t == 1 ? 0.0 : (1.0 - abar_prev) / (1.0 - abar) * beta;
    return m;
}

void posterior_step(std::span<const double> z_t, std::span<const double> x0_hat, int t,
                    std::span<const double> noise, const NoiseSchedule& sched, std::span<double> out) {
    require_timestep(t, 1, sched, "posterior_step");
    require_same_length(z_t, x0_hat, "posterior_step");
    require_same_length(z_t, out, "posterior_step");
    if (t == 1) {
        // 1 - abar_1 == beta_1, so the mean is x0_hat and beta-tilde is 0.
        std::copy(x0_hat.begin(), x0_hat.end(), out.begin());
        return;
    }
    require_same_length(z_t, noise, "posterior_step");
    const double abar = sched.alpha_bar(t);
    const double beta = sched.beta(t);
    std::vector<double> eps(z_t.size());
    eps_from_x0(z_t, x0_hat, t, sched, eps);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
    std::vector<double> mean(z_t.size());
    kernels::axpby(inv_sqrt_alpha, z_t, -inv_sqrt_alpha * beta / std::sqrt(1.0 - abar), eps, mean);
    const double sigma = std::sqrt((1.0 - sched.alpha_bar(t - 1)) / (1.0 - abar) * beta);
    kernels::axpby(1.0, mean, sigma, noise, out);
}

std::vector<double> posterior_step(std::span<const double> z_t, std::span<const double> x0_hat, int t,
                                   std::span<const double> noise, const NoiseSchedule& sched) {
    std::vector<double> out(z_t.size());
    posterior_step(z_t, x0_hat, t, noise, sched, out);
    return out;
}

void ddim_step(std::span<const double> z_t, std::span<const double> x0_hat, int t, int t_prev,
               const NoiseSchedule& sched, std::span<double> out) {
    if (t_prev >= t) {
        throw std::invalid_argument("ddim_step: t_prev must be < t");
    }
    require_timestep(t, 1, sched, "ddim_step");
    require_timestep(t_prev, 0, sched, "ddim_step");
    require_same_length(z_t, x0_hat, "ddim_step");
    require_same_length(z_t, out, "ddim_step");
    std::vector<double> eps(z_t.size());
    eps_from_x0(z_t, x0_hat, t, sched, eps);
    const double abar_prev = sched.alpha_bar(t_prev);
    kernels::axpby(std::sqrt(abar_prev), x0_hat, std::sqrt(1.0 - abar_prev), eps, out);
}

std::vector<double> ddim_step(std::span<const double> z_t, std::span<const double> x0_hat, int t, int t_prev,
                              const NoiseSchedule& sched) {
    std::vector<double> out(z_t.size());
    ddim_step(z_t, x0_hat, t, t_prev, sched, out);
    return out;
}

}  // namespace ardiff
