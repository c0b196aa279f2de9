#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "ardiff/schedule.hpp"

using namespace ardiff;

namespace {

NoiseSchedule toy4() { return NoiseSchedule::linear(4, 0.1, 0.4); }

}  // namespace

TEST_SUITE("schedule_core") {

TEST_CASE("linear schedule endpoints") {
    const NoiseSchedule s = NoiseSchedule::linear(1000, 0.0001, 0.002);
    CHECK(s.timesteps() == 1000);
    CHECK(s.beta(1) == 0.0001);
    CHECK(s.beta(1000) == 0.002);
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-15));
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha(t) == 1.0 - s.beta(t));
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(std::abs(s.alpha_bar(t) - s.alpha_bar(t - 1) * (1.0 - s.beta(t))) <= 1e-12 * s.alpha_bar(t));
    }
}

TEST_CASE("single step schedule") {
    const NoiseSchedule s = NoiseSchedule::linear(1, 0.0001, 0.002);
    CHECK(s.beta(1) == 0.0001);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-15));
}

TEST_CASE("schedule rejects bad parameters") {
    CHECK_THROWS_AS(NoiseSchedule::linear(0, 0.1, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.3, 0.2), std::invalid_argument);
    CHECK_THROWS(toy4().beta(5));
    CHECK_THROWS(toy4().alpha_bar(-1));
}

TEST_CASE("corrupt_frame") {
    const NoiseSchedule s = toy4();
    const std::vector<double> z0{1.0, -2.0};
    const std::vector<double> eps{0.3, 0.7};
    CHECK(corrupt_frame(z0, 0, eps, s) == z0);

    const std::vector<double> zero{0.0, 0.0};
    const auto noise_only = corrupt_frame(zero, 3, eps, s);
    CHECK(noise_only[0] == doctest::Approx(std::sqrt(1 - s.alpha_bar(3)) * 0.3).epsilon(1e-15));

    // hand evaluation: sqrt(0.9 * 0.8) + sqrt(1 - 0.72)
    const auto v = corrupt_frame(std::vector<double>{1.0}, 2, std::vector<double>{1.0}, s);
    CHECK(std::abs(v[0] - 1.37768) <= 1e-4);

    CHECK_THROWS(corrupt_frame(z0, 5, eps, s));
    CHECK_THROWS(corrupt_frame(z0, 1, std::vector<double>{1.0}, s));
}

TEST_CASE("corrupt_frame variance matches 1 - alpha_bar") {
    const NoiseSchedule s = NoiseSchedule::linear(10, 0.05, 0.3);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    constexpr int kDraws = 100'000;
    const std::vector<double> z0{0.7};
    for (int t = 1; t <= 10; ++t) {
        double sum = 0.0;
        double sq = 0.0;
        for (int i = 0; i < kDraws; ++i) {
            const double e = normal(rng);
            const double v = corrupt_frame(z0, t, std::vector<double>{e}, s)[0];
            sum += v;
            sq += v * v;
        }
        const double mean = sum / kDraws;
        const double var = sq / kDraws - mean * mean;
        const double expected = 1.0 - s.alpha_bar(t);
        // sd of a Gaussian sample variance is sigma^2 sqrt(2 / n)
        CHECK(std::abs(var - expected) <= 3.0 * expected * std::sqrt(2.0 / kDraws));
    }
}

TEST_CASE("eps_from_x0") {
    const NoiseSchedule s = toy4();
    const std::vector<double> z0{0.4, -1.1, 2.0};
    const std::vector<double> eps{-0.5, 0.2, 1.3};
    for (int t = 1; t <= 4; ++t) {
        const auto zt = corrupt_frame(z0, t, eps, s);
        const auto back = eps_from_x0(zt, z0, t, s);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(back[i] - eps[i]) <= 1e-6);

        std::vector<double> scaled(zt);
        for (double& v : scaled) v /= std::sqrt(s.alpha_bar(t));
        for (double v : eps_from_x0(zt, scaled, t, s)) CHECK(std::abs(v) <= 1e-12);
    }
    CHECK_THROWS(eps_from_x0(z0, z0, 0, s));
}

TEST_CASE("posterior_step") {
    const NoiseSchedule s = toy4();
    const std::vector<double> zt{0.3, -0.9};
    const std::vector<double> x0{1.25, 0.5};
    const std::vector<double> noise{0.8, -0.4};
    CHECK(posterior_step(zt, x0, 1, noise, s) == x0);
    CHECK_THROWS(posterior_step(zt, x0, 0, noise, s));

    // Oracle values from the DDPM posterior written in its mean-coefficient form:
    // sqrt(abar_{t-1}) beta_t / (1 - abar_t) x0 + sqrt(alpha_t) (1 - abar_{t-1}) / (1 - abar_t) z_t.
    const double zt2 = 1.3776783996367752;
    CHECK(posterior_step(std::vector<double>{zt2}, std::vector<double>{0.5}, 2, std::vector<double>{0.3}, s)[0] ==
          doctest::Approx(0.8590770579804754).epsilon(1e-12));
    CHECK(posterior_step(std::vector<double>{zt2}, std::vector<double>{0.5}, 2, std::vector<double>{0.0}, s)[0] ==
          doctest::Approx(0.7788986854067481).epsilon(1e-12));
    CHECK(posterior_moments(2, s).variance == doctest::Approx(0.07142857142857144).epsilon(1e-12));
    CHECK(posterior_step(std::vector<double>{0.4}, std::vector<double>{-0.2}, 3, std::vector<double>{-1.1}, s)[0] ==
          doctest::Approx(-0.3664014914190747).epsilon(1e-12));
}

TEST_CASE("ddim_step") {
    const NoiseSchedule s = NoiseSchedule::linear(10, 0.05, 0.3);
    const std::vector<double> z0{0.6, -0.3, 1.7};
    const std::vector<double> eps{0.1, -1.2, 0.5};
    for (int t = 1; t <= 10; ++t) {
        const auto zt = corrupt_frame(z0, t, eps, s);
        CHECK(ddim_step(zt, z0, t, 0, s) == z0);
        for (int tp = 0; tp < t; ++tp) {
            const auto got = ddim_step(zt, z0, t, tp, s);
            const auto want = corrupt_frame(z0, tp, eps, s);
            for (int i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-6);
        }
    }
    CHECK_THROWS(ddim_step(z0, z0, 3, 3, s));
    CHECK_THROWS(ddim_step(z0, z0, 3, 4, s));
}

TEST_CASE("ddim oracle chain reaches the target") {
    const NoiseSchedule s = NoiseSchedule::linear(1000, 0.0001, 0.002);
    const std::vector<double> target{0.25, -0.5, 0.125, 0.9};
    std::vector<double> z{1.3, -0.2, -2.1, 0.4};
    for (int t = 1000; t > 0; t -= 20) z = ddim_step(z, target, t, t - 20, s);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(z[i] - target[i]) <= 1e-5);
}

TEST_CASE("in-place outputs may alias inputs") {
    const NoiseSchedule s = toy4();
    std::vector<double> z{0.5, 0.25};
    const std::vector<double> x0{1.0, -1.0};
    const auto expected = ddim_step(z, x0, 3, 1, s);
    ddim_step(z, x0, 3, 1, s, z);
    CHECK(z == expected);
}

TEST_CASE("LatentVideo") {
    LatentVideo v(3, 2, 2);
    CHECK(v.data().size() == 12);
    v.frame(1)[3] = 4.0;
    CHECK(v.data()[7] == 4.0);
    CHECK(v.all_finite());
    v.data()[0] = std::nan("");
    CHECK_FALSE(v.all_finite());
    CHECK_THROWS(LatentVideo(0, 1, 1));
    CHECK_THROWS(LatentVideo(2, 1, 1, std::vector<double>(3)));
}

}
