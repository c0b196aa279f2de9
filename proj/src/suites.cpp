#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "ardiff/ad_scheduler.hpp"
#include "ardiff/kernels.hpp"
#include "ardiff/sampling.hpp"
#include "ardiff/verification.hpp"

namespace ardiff::verify {

namespace {

using Histogram = std::map<std::vector<int>, std::int64_t>;

std::vector<int> as_vector(const TimestepComposition& c) { return {c.values().begin(), c.values().end()}; }

double three_sigma(double p, double n) { return 3.0 * std::sqrt(n * p * (1.0 - p)); }

Report counts_suite() {
    Report r;
    const auto eq = enumerate_compositions(3, 3, Constraint::Equal);
    const auto ind = enumerate_compositions(3, 3, Constraint::Independent);
    const auto nd = enumerate_compositions(3, 3, Constraint::NonDecreasing);
    r.check("counts.enumerate_equal_F3_T3", eq.count == 3, static_cast<double>(eq.compositions.size()), 3);
    r.check("counts.enumerate_independent_F3_T3", ind.count == 27, static_cast<double>(ind.compositions.size()), 27);
    r.check("counts.enumerate_non_decreasing_F3_T3", nd.count == 10, static_cast<double>(nd.compositions.size()), 10);

    bool closed_forms = true;
    for (int F = 1; F <= 6; ++F) {
        for (int T = 1; T <= 6; ++T) {
            const auto e = enumerate_compositions(F, T, Constraint::NonDecreasing);
            closed_forms = closed_forms && e.count == count_compositions(F, T);
        }
    }
    r.check("counts.enumeration_matches_closed_form_F6_T6", closed_forms);

    bool dp_agrees = true;
    for (int F = 1; F <= 30; ++F) {
        for (int T = 1; T <= 30; ++T) {
            const BigCount closed = binomial(static_cast<unsigned>(T + F - 1), static_cast<unsigned>(F));
            dp_agrees = dp_agrees && CountTables::build(F, T).total() == closed;
        }
    }
    r.check("counts.dp_matches_binomial_F30_T30", dp_agrees);

    const CountTables big = CountTables::build(16, 1000);
    const BigCount expected = binomial(1015, 16);
    r.check("counts.dp_matches_binomial_F16_T1000", big.total() == expected && !big.overflowed(),
            big.total().convert_to<double>(), expected.convert_to<double>());
    return r;
}

Report scheduler_suite(std::uint64_t seed) {
    Report r;

    // Conditional uniformity of FoPP for every anchor on F=3, T=4.
    {
        const int F = 3;
        const int T = 4;
        const CountTables tables = CountTables::build(F, T);
        const auto all = enumerate_compositions(F, T, Constraint::NonDecreasing);
        Rng rng(seed ^ 0x51);
        double worst = 0.0;
        bool any_reject = false;
        bool valid = true;
        for (int f = 0; f < F; ++f) {
            for (int tau = 1; tau <= T; ++tau) {
                std::vector<std::vector<int>> support;
                for (const auto& c : all.compositions) {
                    if (c[static_cast<std::size_t>(f)] == tau) support.push_back(c);
                }
                Histogram h;
                constexpr int kDraws = 100'000;
                for (int i = 0; i < kDraws; ++i) {
                    const auto c = fopp_sample_from_anchor(tables, f, tau, rng);
                    valid = valid && c[f] == tau;
                    ++h[as_vector(c)];
                }
                std::vector<std::int64_t> obs;
                for (const auto& c : support) obs.push_back(h.count(c) ? h[c] : 0);
                valid = valid && h.size() == support.size();
                const std::vector<double> expect(support.size(), 1.0 / static_cast<double>(support.size()));
                const auto chi = chi_square_uniformity(obs, expect);
                any_reject = any_reject || chi.reject;
                if (chi.dof > 0) worst = std::max(worst, chi.statistic / chi.critical);
            }
        }
        r.check("scheduler.fopp_anchor_support_F3_T4", valid);
        r.check_at_most("scheduler.fopp_conditional_uniformity_F3_T4_max_stat_over_critical", worst, 1.0);
        r.check("scheduler.fopp_conditional_uniformity_no_rejection", !any_reject);
    }

    // Mixture law and anchor marginals on F=3, T=3.
    {
        const int F = 3;
        const int T = 3;
        const CountTables tables = CountTables::build(F, T);
        const auto all = enumerate_compositions(F, T, Constraint::NonDecreasing);
        Rng rng(seed ^ 0x52);
        constexpr int kDraws = 1'000'000;
        Histogram h;
        std::vector<std::int64_t> anchors(static_cast<std::size_t>(F * T));
        for (int i = 0; i < kDraws; ++i) {
            const FoppDraw d = fopp_draw(tables, rng);
            ++anchors[static_cast<std::size_t>(d.anchor_frame * T + d.anchor_timestep - 1)];
            ++h[as_vector(d.composition)];
        }
        double worst = 0.0;
        double prob_sum = 0.0;
        for (const auto& c : all.compositions) {
            const double p = std::exp(composition_log_probability(TimestepComposition(c, T), tables));
            prob_sum += p;
            const double dev = std::abs(static_cast<double>(h[c]) - kDraws * p) / three_sigma(p, kDraws);
            worst = std::max(worst, dev);
        }
        r.check_at_most("scheduler.fopp_mixture_law_F3_T3_max_dev_in_3sigma_units", worst, 1.0);
        r.check_at_most("scheduler.fopp_mixture_normalization_error", std::abs(prob_sum - 1.0), 1e-12);
        double worst_anchor = 0.0;
        const double pa = 1.0 / (F * T);
        for (std::int64_t a : anchors) {
            worst_anchor = std::max(worst_anchor, std::abs(static_cast<double>(a) - kDraws * pa) /
                                                      three_sigma(pa, kDraws));
        }
        r.check_at_most("scheduler.fopp_anchor_marginals_max_dev_in_3sigma_units", worst_anchor, 1.0);

        // Naive sequential sampling is visibly biased against the mixture.
        Histogram naive;
        for (int i = 0; i < kDraws; ++i) {
            ++naive[as_vector(naive_sequential_sample(F, T, rng))];
        }
        double tv = 0.0;
        for (const auto& c : all.compositions) {
            const double p = std::exp(composition_log_probability(TimestepComposition(c, T), tables));
            tv += std::abs(static_cast<double>(naive[c]) / kDraws - p);
        }
        r.check_at_least("scheduler.naive_vs_fopp_total_variation_F3_T3", 0.5 * tv, 0.05);
    }

    // Naive sampler bias at F=16, T=1000.
    {
        const int F = 16;
        const int T = 1000;
        Rng rng(seed ^ 0x53);
        constexpr int kDraws = 1'000'000;
        std::int64_t top = 0;
        for (int i = 0; i < kDraws; ++i) {
            const auto c = naive_sequential_sample(F, T, rng);
            top += c[0] == T ? 1 : 0;  // t_1 = T forces every later frame to T
        }
        const double p = 1.0 / T;
        r.check_at_most("scheduler.naive_all_T_probability_dev_in_3sigma_units",
                        std::abs(static_cast<double>(top) - kDraws * p) / three_sigma(p, kDraws), 1.0);
    }

    // AD plans: closed-form length and structure, exhaustively.
    {
        bool ok = true;
        for (int F = 1; F <= 8; ++F) {
            for (int N = 1; N <= 20; ++N) {
                long long prev_len = -1;
                for (int s = 0; s <= N + 2; ++s) {
                    const TrajectoryPlan plan = plan_trajectory(F, N, s);
                    const long long len = static_cast<long long>(plan.size());
                    ok = ok && len == N + static_cast<long long>(F - 1) * std::min(s, N);
                    ok = ok && len >= prev_len;
                    prev_len = len;
                    for (std::size_t k = 0; k < plan.size() && ok; ++k) {
                        const auto& before = plan.before(k);
                        const auto& after = plan.steps[k].composition;
                        for (int f = 0; f < F; ++f) {
                            ok = ok && after[f] <= before[f];
                            ok = ok && plan.steps[k].update_mask[static_cast<std::size_t>(f)] ==
                                           (after[f] != before[f]);
                        }
                    }
                    ok = ok && std::all_of(plan.steps.back().composition.values().begin(),
                                           plan.steps.back().composition.values().end(),
                                           [](int v) { return v == 0; });
                }
            }
        }
        r.check("scheduler.ad_plan_law_and_structure_F8_N20", ok);
        bool limits = true;
        for (int F = 1; F <= 6; ++F) {
            for (int N = 1; N <= 12; ++N) {
                limits = limits && plan_trajectory(F, N, 0).steps == synchronous_plan(F, N).steps;
                limits = limits && plan_trajectory(F, N, N).steps == autoregressive_plan(F, N).steps;
            }
        }
        r.check("scheduler.ad_limiting_cases", limits);
        r.check("scheduler.ad_F16_N50_counts",
                plan_trajectory(16, 50, 0).size() == 50 && plan_trajectory(16, 50, 5).size() == 125 &&
                    plan_trajectory(16, 50, 50).size() == 800);
    }
    return r;
}

Report kernels_suite(std::uint64_t seed) {
    Report r;
    const kernels::KernelTable& ref = kernels::scalar_table();
    const kernels::KernelTable& act = kernels::active();
    Rng rng(seed ^ 0x61);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 31u, 64u, 1000u}) {
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = normal(rng);
        for (auto& v : y) v = normal(rng);
        double scale = 1.0;
        for (double v : x) scale += std::abs(v);
        worst = std::max(worst, std::abs(ref.dot(x.data(), y.data(), n) - act.dot(x.data(), y.data(), n)) / scale);
        std::vector<double> a = y, b = y;
        ref.axpy(0.37, x.data(), a.data(), n);
        act.axpy(0.37, x.data(), b.data(), n);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
        ref.axpby(0.3, x.data(), -1.7, y.data(), a.data(), n);
        act.axpby(0.3, x.data(), -1.7, y.data(), b.data(), n);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    r.check_at_most(std::string("kernels.") + std::string(kernels::backend_name(act.backend)) +
                        "_vs_scalar_max_error",
                    worst, 1e-12);
    return r;
}

Report diffusion_suite(std::uint64_t seed) {
    Report r;
    const NoiseSchedule sched = NoiseSchedule::linear(10, 0.1, 0.4);
    Rng rng(seed ^ 0x71);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z0(6), eps(6), noise(6);
    for (auto& v : z0) v = normal(rng);
    for (auto& v : eps) v = normal(rng);
    for (auto& v : noise) v = normal(rng);

    bool exact = true;
    for (int t = 1; t <= 1; ++t) {
        const auto zt = corrupt_frame(z0, t, eps, sched);
        exact = exact && posterior_step(zt, z0, 1, noise, sched) == z0;
    }
    r.check("diffusion.posterior_step_t1_is_x0", exact);

    double commute = 0.0;
    for (int t = 1; t <= 10; ++t) {
        const auto zt = corrupt_frame(z0, t, eps, sched);
        for (int tp = 0; tp < t; ++tp) {
            const auto got = ddim_step(zt, z0, t, tp, sched);
            const auto want = corrupt_frame(z0, tp, eps, sched);
            for (std::size_t i = 0; i < got.size(); ++i) commute = std::max(commute, std::abs(got[i] - want[i]));
        }
    }
    r.check_at_most("diffusion.ddim_corrupt_commutation_T10", commute, 1e-6);

    const NoiseSchedule big = NoiseSchedule::linear(1000, 0.0001, 0.002);
    std::vector<double> z = noise;
    for (int t = 1000; t >= 20; t -= 20) {
        z = ddim_step(z, z0, t, t - 20, big);
    }
    double chain = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) chain = std::max(chain, std::abs(z[i] - z0[i]));
    r.check_at_most("diffusion.ddim_oracle_chain_error", chain, 1e-5);
    return r;
}

Report denoiser_suite(std::uint64_t seed) {
    Report r;
    DenoiserConfig cfg;
    cfg.frames = 3;
    cfg.tokens = 2;
    cfg.dim = 2;
    cfg.timesteps = 10;
    cfg.d_model = 8;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.mlp_hidden = 8;
    cfg.x0_clamp = 2.0;
    const NoiseSchedule sched = NoiseSchedule::linear(10, 0.05, 0.3);
    DenoiserParams params = DenoiserParams::initialize(cfg, seed + 7);
    Rng rng(seed ^ 0x81);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (double& v : params.tensor("out_proj.weight")) v = u(rng);
    for (double& v : params.tensor("out_proj.bias")) v = u(rng);

    std::normal_distribution<double> normal(0.0, 1.0);
    LatentVideo z0(3, 2, 2), eps(3, 2, 2);
    for (double& v : z0.data()) v = 0.5 * normal(rng);
    for (double& v : eps.data()) v = normal(rng);
    const std::vector<TrainingSample> batch{TrainingSample{z0, TimestepComposition({2, 5, 9}, 10), eps}};

    const LossAndGrad lg = loss_and_grad(params, cfg, batch, sched);
    const DenoiserGrads fd = finite_diff_grads(params, cfg, batch, sched, 1e-4);
    double worst = 0.0;
    for (const TensorSpec& s : params.tensors()) {
        worst = std::max(worst, relative_error(lg.grads.tensor(s), fd.tensor(s)));
    }
    r.check_at_most("denoiser.gradient_vs_finite_difference_max_relative_error", worst, 1e-3);

    // Perturbing frame j changes nothing for frames before j.
    bool causal = true;
    const TimestepComposition comp({1, 4, 8}, 10);
    const LatentVideo base = forward(params, cfg, z0, comp, sched);
    for (int j = 0; j < cfg.frames; ++j) {
        LatentVideo probe = z0;
        for (double& v : probe.frame(j)) v += 0.5;
        const LatentVideo out = forward(params, cfg, probe, comp, sched);
        for (int f = 0; f < j; ++f) {
            causal = causal && std::equal(out.frame(f).begin(), out.frame(f).end(), base.frame(f).begin());
        }
    }
    r.check("denoiser.frame_causality_exact", causal);
    return r;
}

Report sampling_suite(std::uint64_t seed) {
    Report r;
    const NoiseSchedule sched = NoiseSchedule::linear(1000, 0.0001, 0.002);
    LatentVideo target(16, 1, 2);
    Rng rng(seed ^ 0x91);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : target.data()) v = 0.5 * normal(rng);
    const X0Predictor oracle = [&](const LatentVideo&, const TimestepComposition&) { return target; };

    SampleConfig sc;
    sc.frames = 16;
    sc.grid_steps = 50;
    sc.scale_factor = 0.5;
    for (int s : {0, 5, 50}) {
        sc.difference = s;
        GenerationTrace trace;
        Rng g(seed + static_cast<std::uint64_t>(s));
        const LatentVideo out = generate(oracle, 1, 2, sched, sc, g, &trace);
        double err = 0.0;
        for (std::size_t i = 0; i < out.data().size(); ++i) {
            err = std::max(err, std::abs(out.data()[i] - target.data()[i] / sc.scale_factor));
        }
        const auto expected_calls = static_cast<std::size_t>(plan_length(16, 50, s));
        r.check("sampling.model_calls_s" + std::to_string(s), trace.model_calls == expected_calls,
                static_cast<double>(trace.model_calls), static_cast<double>(expected_calls));
        r.check_at_most("sampling.oracle_recovery_error_s" + std::to_string(s), err, 1e-5);
    }
    return r;
}

}  // namespace

std::vector<std::string> suite_names() { return {"counts", "scheduler", "kernels", "diffusion", "denoiser", "sampling", "all"}; }

Report run_suite(const std::string& name, std::uint64_t seed) {
    if (name == "counts") return counts_suite();
    if (name == "scheduler") return scheduler_suite(seed);
    if (name == "kernels") return kernels_suite(seed);
    if (name == "diffusion") return diffusion_suite(seed);
    if (name == "denoiser") return denoiser_suite(seed);
    if (name == "sampling") return sampling_suite(seed);
    if (name == "all") {
        Report all;
        for (const std::string& s : suite_names()) {
            if (s != "all") all.append(run_suite(s, seed));
        }
        return all;
    }
    throw std::invalid_argument("unknown verification suite '" + name + "'");
}

}  // namespace ardiff::verify
