#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ardiff/sampling.hpp"

using namespace ardiff;

namespace {

LatentVideo target_video(int frames) {
    LatentVideo v(frames, 1, 2);
    for (std::size_t i = 0; i < v.data().size(); ++i) v.data()[i] = 0.1 * static_cast<double>(i) - 0.4;
    return v;
}

bool frame_equal(const LatentVideo& a, const LatentVideo& b, int f) {
    return std::equal(a.frame(f).begin(), a.frame(f).end(), b.frame(f).begin());
}

}  // namespace

TEST_SUITE("sampling") {

TEST_CASE("mode names") {
    for (SampleMode m : {SampleMode::RecorruptDeterministic, SampleMode::RecorruptStochastic, SampleMode::Posterior}) {
        CHECK(parse_mode(mode_name(m)) == m);
    }
    CHECK_THROWS(parse_mode("ddpm"));
}

TEST_CASE("oracle chain recovers the target in N calls") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000, 0.0001, 0.002);
    const LatentVideo target = target_video(4);
    const X0Predictor oracle = [&](const LatentVideo&, const TimestepComposition&) { return target; };
    for (SampleMode mode : {SampleMode::RecorruptDeterministic, SampleMode::RecorruptStochastic}) {
        SampleConfig cfg;
        cfg.frames = 4;
        cfg.grid_steps = 50;
        cfg.mode = mode;
        GenerationTrace trace;
        Rng rng(1);
        const LatentVideo out = generate(oracle, 1, 2, sched, cfg, rng, &trace);
        CHECK(trace.model_calls == 50);
        for (std::size_t i = 0; i < out.data().size(); ++i) {
            CHECK(std::abs(out.data()[i] - target.data()[i] / cfg.scale_factor) <= 1e-5);
        }
    }
}

TEST_CASE("posterior mode with the oracle") {
    const NoiseSchedule sched = NoiseSchedule::linear(30, 0.001, 0.1);
    const LatentVideo target = target_video(3);
    const X0Predictor oracle = [&](const LatentVideo&, const TimestepComposition&) { return target; };
    SampleConfig cfg;
    cfg.frames = 3;
    cfg.grid_steps = 30;
    cfg.difference = 4;
    cfg.mode = SampleMode::Posterior;
    Rng rng(2);
    const LatentVideo out = generate(oracle, 1, 2, sched, cfg, rng);
    for (std::size_t i = 0; i < out.data().size(); ++i) CHECK(out.data()[i] == target.data()[i] / 0.5);

    cfg.grid_steps = 10;
    CHECK_THROWS_AS(generate(oracle, 1, 2, sched, cfg, rng), std::invalid_argument);
}

TEST_CASE("call count and transition audit for F=16, N=50, s=5") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000, 0.0001, 0.002);
    SampleConfig cfg;
    cfg.frames = 16;
    cfg.grid_steps = 50;
    cfg.difference = 5;
    std::vector<LatentVideo> inputs;
    std::vector<TimestepComposition> seen_t;
    const X0Predictor spy = [&](const LatentVideo& z, const TimestepComposition& t) {
        inputs.push_back(z);
        seen_t.push_back(t);
        LatentVideo x0 = z;
        for (double& v : x0.data()) v *= 0.5;
        return x0;
    };
    GenerationTrace trace;
    Rng rng(3);
    (void)generate(spy, 1, 2, sched, cfg, rng, &trace);
    CHECK(trace.model_calls == 125);

    const TrajectoryPlan plan = plan_trajectory(16, 50, 5);
    std::vector<Transition> expected;
    for (std::size_t k = 0; k < plan.size(); ++k) {
        CHECK(seen_t[k].values()[0] == grid_to_timestep(plan.before(k)[0], 50, 1000));
        for (int f = 0; f < 16; ++f) {
            if (plan.steps[k].update_mask[f]) {
                expected.push_back(Transition{k, f, plan.before(k)[f], plan.steps[k].composition[f]});
            }
        }
    }
    CHECK(trace.transitions == expected);

    // masked frames reach the next call bit-for-bit unchanged
    for (std::size_t k = 0; k + 1 < plan.size(); ++k) {
        for (int f = 0; f < 16; ++f) {
            if (!plan.steps[k].update_mask[f]) CHECK(frame_equal(inputs[k], inputs[k + 1], f));
            else CHECK_FALSE(frame_equal(inputs[k], inputs[k + 1], f));
        }
    }
}

TEST_CASE("synchronous and sequential orders on the recorded transitions") {
    const NoiseSchedule sched = NoiseSchedule::linear(100, 0.0001, 0.002);
    const X0Predictor zero = [](const LatentVideo& z, const TimestepComposition&) {
        return LatentVideo(z.frames(), z.tokens(), z.dim());
    };
    SampleConfig cfg;
    cfg.frames = 4;
    cfg.grid_steps = 10;
    GenerationTrace sync;
    Rng rng(4);
    (void)generate(zero, 1, 2, sched, cfg, rng, &sync);
    for (std::size_t i = 0; i < sync.transitions.size(); i += 4) {
        for (std::size_t j = 1; j < 4; ++j) {
            CHECK(sync.transitions[i + j].step == sync.transitions[i].step);
            CHECK(sync.transitions[i + j].to_level == sync.transitions[i].to_level);
        }
    }
    cfg.difference = 10;
    GenerationTrace seq;
    (void)generate(zero, 1, 2, sched, cfg, rng, &seq);
    CHECK(seq.transitions.size() == 40);
    for (std::size_t i = 1; i < seq.transitions.size(); ++i) {
        CHECK(seq.transitions[i].frame >= seq.transitions[i - 1].frame);
        CHECK(seq.transitions[i].step > seq.transitions[i - 1].step);
    }
}

TEST_CASE("seeded runs are bit-identical, seeds differ") {
    DenoiserConfig model;
    model.frames = 4;
    const NoiseSchedule sched = NoiseSchedule::linear(100, 0.0001, 0.002);
    DenoiserParams params = DenoiserParams::initialize(model, 3);
    for (double& v : params.tensor("out_proj.weight")) v = 0.05;
    SampleConfig cfg;
    cfg.frames = 4;
    cfg.difference = 5;
    cfg.mode = SampleMode::RecorruptStochastic;
    Rng a(10), b(10), c(11);
    const LatentVideo va = generate(params, model, sched, cfg, a);
    CHECK(va == generate(params, model, sched, cfg, b));
    CHECK_FALSE(va == generate(params, model, sched, cfg, c));
    CHECK(va.all_finite());
    cfg.frames = 5;
    CHECK_THROWS(generate(params, model, sched, cfg, a));
}

TEST_CASE("non-finite latents abort") {
    const NoiseSchedule sched = NoiseSchedule::linear(10, 0.01, 0.1);
    const X0Predictor broken = [](const LatentVideo& z, const TimestepComposition&) {
        LatentVideo x = z;
        x.data()[0] = std::nan("");
        return x;
    };
    SampleConfig cfg;
    cfg.frames = 2;
    cfg.grid_steps = 5;
    Rng rng(0);
    CHECK_THROWS_AS(generate(broken, 1, 2, sched, cfg, rng), GenerationError);
}

}
