// Exit gate: one PASS/FAIL line per acceptance criterion.
//   acceptance [--criterion N] [--cli PATH] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "ardiff/ad_scheduler.hpp"
#include "ardiff/denoiser.hpp"
#include "ardiff/lattice.hpp"
#include "ardiff/sampling.hpp"
#include "ardiff/training.hpp"
#include "ardiff/verification.hpp"

namespace fs = std::filesystem;
using namespace ardiff;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

std::string cli_path;
fs::path work_dir;

std::vector<int> vec(const TimestepComposition& c) { return {c.values().begin(), c.values().end()}; }

double three_sigma(double p, double n) { return 3.0 * std::sqrt(n * p * (1.0 - p)); }

void search_space_counts(Outcome& o) {
    const auto eq = verify::enumerate_compositions(3, 3, verify::Constraint::Equal);
    const auto ind = verify::enumerate_compositions(3, 3, verify::Constraint::Independent);
    const auto nd = verify::enumerate_compositions(3, 3, verify::Constraint::NonDecreasing);
    o.require(eq.count == 3 && ind.count == 27 && nd.count == 10, "F=3,T=3 enumeration 3/27/10");

    const auto start = std::chrono::steady_clock::now();
    const CountTables tables = CountTables::build(16, 1000);
    const BigCount closed = binomial(1015, 16);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    BigCount independent = 1;
    for (int f = 0; f < 16; ++f) independent *= 1000;
    o.require(tables.total() == closed, "DP total equals binomial(1015,16)");
    o.require(count_compositions(16, 1000) == closed, "count_compositions equals the closed form");
    o.require(independent == BigCount("1000000000000000000000000000000000000000000000000"), "T^F = 1e48");
    const double approx = closed.convert_to<double>();
    o.require(approx >= 5.35e34 && approx < 5.45e34, "approximately 5.4e34");
    o.require(secs < 1.0, "runtime < 1 s");
    o.detail << "equal=1000 independent=1e48 non-decreasing=" << closed.str() << " (" << approx << "), DP "
             << secs << " s";
}

void naive_bias(Outcome& o) {
    constexpr int F = 16;
    constexpr int T = 1000;
    constexpr int kDraws = 1'000'000;
    Rng rng(2024);
    long long all_t = 0;
    for (int i = 0; i < kDraws; ++i) {
        const auto c = naive_sequential_sample(F, T, rng);
        all_t += std::all_of(c.values().begin(), c.values().end(), [](int v) { return v == T; }) ? 1 : 0;
    }
    const double p = 1.0 / T;
    const double dev = std::abs(static_cast<double>(all_t) - kDraws * p);
    o.require(dev <= three_sigma(p, kDraws), "naive P(all-T) = 1/T within 3 sigma");

    const CountTables tables = CountTables::build(F, T);
    BigCount n_min = tables.through(0, 1);
    for (int f = 0; f < F; ++f) {
        for (int t = 1; t <= T; ++t) n_min = std::min(n_min, tables.through(f, t));
    }
    const double fopp = std::exp(composition_log_probability(TimestepComposition(std::vector<int>(F, T), T), tables));
    // exact value: (1/(F T)) * sum_f 1 / binomial(T + f - 1, f), f = 0..F-1
    double exact = 0.0;
    for (int f = 0; f < F; ++f) exact += 1.0 / binomial(T + f - 1, f).convert_to<double>();
    exact /= static_cast<double>(F) * T;
    const double bound = static_cast<double>(F) / (static_cast<double>(F) * T * n_min.convert_to<double>());
    o.require(std::abs(fopp - exact) <= 1e-12 * exact, "FoPP probability matches the exact sum");
    o.require(fopp <= bound, "FoPP probability <= F/(F T N_min)");
    o.require(fopp <= 0.1 * p, "FoPP probability an order of magnitude below the naive 1/T");
    o.detail << "naive " << all_t << "/" << kDraws << " (expected 1000 +/- " << three_sigma(p, kDraws)
             << "); FoPP P(all-T) = " << fopp << ", bound F/(F*T*N_min) = " << bound << " with N_min = "
             << n_min.str() << ", naive/FoPP = " << p / fopp;
}

void fopp_uniformity(Outcome& o) {
    {
        const CountTables tables = CountTables::build(3, 4);
        const auto all = verify::enumerate_compositions(3, 4, verify::Constraint::NonDecreasing);
        Rng rng(31);
        double worst = 0.0;
        for (int f = 0; f < 3; ++f) {
            for (int tau = 1; tau <= 4; ++tau) {
                std::map<std::vector<int>, std::int64_t> hist;
                for (const auto& c : all.compositions) {
                    if (c[f] == tau) hist[c] = 0;
                }
                bool in_support = true;
                for (int i = 0; i < 100'000; ++i) {
                    const auto it = hist.find(vec(fopp_sample_from_anchor(tables, f, tau, rng)));
                    if (it == hist.end()) in_support = false;
                    else ++it->second;
                }
                o.require(in_support, "draws stay on the anchored support");
                std::vector<std::int64_t> obs;
                for (const auto& [c, n] : hist) obs.push_back(n);
                const std::vector<double> expected(obs.size(), 1.0 / static_cast<double>(obs.size()));
                const auto chi = verify::chi_square_uniformity(obs, expected);
                o.require(!chi.reject, "chi-square at anchor (" + std::to_string(f + 1) + "," +
                                           std::to_string(tau) + ")");
                if (chi.dof > 0) worst = std::max(worst, chi.statistic / chi.critical);
            }
        }
        o.detail << "F=3,T=4 worst chi2/critical = " << worst << "; ";
    }
    {
        const CountTables tables = CountTables::build(3, 3);
        const auto all = verify::enumerate_compositions(3, 3, verify::Constraint::NonDecreasing);
        Rng rng(32);
        constexpr int kDraws = 1'000'000;
        std::map<std::vector<int>, std::int64_t> hist;
        for (int i = 0; i < kDraws; ++i) ++hist[vec(fopp_sample(tables, rng))];
        double worst = 0.0;
        for (const auto& c : all.compositions) {
            const double p = std::exp(composition_log_probability(TimestepComposition(c, 3), tables));
            worst = std::max(worst, std::abs(static_cast<double>(hist[c]) - kDraws * p) / three_sigma(p, kDraws));
        }
        o.require(hist.size() == 10, "only valid compositions drawn");
        o.require(worst <= 1.0, "mixture law within 3 sigma");
        o.detail << "F=3,T=3 worst |dev|/3sigma = " << worst;
    }
}

void step_count_law(Outcome& o) {
    bool law = true;
    for (int F = 1; F <= 8; ++F) {
        for (int N = 1; N <= 20; ++N) {
            for (int s = 0; s <= N + 2; ++s) {
                law = law && static_cast<long long>(plan_trajectory(F, N, s).size()) ==
                                 N + static_cast<long long>(F - 1) * std::min(s, N);
            }
        }
    }
    o.require(law, "N + (F-1) min(s,N) for F<=8, N<=20, s<=N+2");
    const auto c0 = plan_trajectory(16, 50, 0).size();
    const auto c5 = plan_trajectory(16, 50, 5).size();
    const auto c50 = plan_trajectory(16, 50, 50).size();
    o.require(c0 == 50 && c5 == 125 && c50 == 800, "F=16,N=50 calls 50/125/800");
    bool increasing = true;
    for (int s = 0; s < 50; ++s) increasing = increasing && plan_length(16, 50, s) < plan_length(16, 50, s + 1);
    o.require(increasing, "calls strictly increasing for s in [0, N]");
    o.detail << "F=16,N=50: s=0 -> " << c0 << ", s=5 -> " << c5 << ", s=50 -> " << c50;
}

void limiting_cases(Outcome& o) {
    int compared = 0;
    for (int F = 1; F <= 8; ++F) {
        for (int N = 1; N <= 20; ++N) {
            const TrajectoryPlan sync = synchronous_plan(F, N);
            const TrajectoryPlan ar = autoregressive_plan(F, N);
            o.require(plan_trajectory(F, N, 0).steps == sync.steps, "s=0 equals synchronous");
            o.require(plan_trajectory(F, N, N).steps == ar.steps, "s=N equals autoregressive");
            compared += 2;
        }
    }
    // The reference plans themselves, spelled out for one case.
    const TrajectoryPlan ar = autoregressive_plan(2, 3);
    std::vector<std::vector<int>> levels;
    for (const auto& s : ar.steps) levels.push_back(vec(s.composition));
    o.require(levels == std::vector<std::vector<int>>{{2, 3}, {1, 3}, {0, 3}, {0, 2}, {0, 1}, {0, 0}},
              "autoregressive reference for F=2,N=3");
    o.detail << compared << " plans compared element-wise";
}

void kernel_correctness(Outcome& o) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> normal(0.0, 1.0);
    bool exact = true;
    for (const NoiseSchedule& s : {NoiseSchedule::linear(4, 0.1, 0.4), NoiseSchedule::linear(1000, 1e-4, 2e-3)}) {
        for (int i = 0; i < 1000; ++i) {
            std::vector<double> z(5), x0(5), n(5);
            for (auto* v : {&z, &x0, &n}) {
                for (double& e : *v) e = 3.0 * normal(rng);
            }
            exact = exact && posterior_step(z, x0, 1, n, s) == x0;
        }
    }
    o.require(exact, "posterior_step(t=1) == x0_hat");

    const NoiseSchedule big = NoiseSchedule::linear(1000, 1e-4, 2e-3);
    LatentVideo target(8, 2, 2);
    for (double& v : target.data()) v = 0.5 * normal(rng);
    const X0Predictor oracle = [&](const LatentVideo&, const TimestepComposition&) { return target; };
    double chain = 0.0;
    for (int s : {0, 5, 50}) {
        SampleConfig cfg;
        cfg.frames = 8;
        cfg.grid_steps = 50;
        cfg.difference = s;
        cfg.scale_factor = 1.0;
        Rng g(s);
        const LatentVideo out = generate(oracle, 2, 2, big, cfg, g);
        for (std::size_t i = 0; i < out.data().size(); ++i) {
            chain = std::max(chain, std::abs(out.data()[i] - target.data()[i]));
        }
    }
    o.require(chain <= 1e-5, "DDIM oracle chain within 1e-5");

    const NoiseSchedule ten = NoiseSchedule::linear(10, 0.05, 0.3);
    double commute = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> z0(4), eps(4);
        for (double& v : z0) v = normal(rng);
        for (double& v : eps) v = normal(rng);
        for (int t = 1; t <= 10; ++t) {
            const auto zt = corrupt_frame(z0, t, eps, ten);
            for (int tp = 0; tp < t; ++tp) {
                const auto a = ddim_step(zt, z0, t, tp, ten);
                const auto b = corrupt_frame(z0, tp, eps, ten);
                for (int i = 0; i < 4; ++i) commute = std::max(commute, std::abs(a[i] - b[i]));
            }
        }
    }
    o.require(commute <= 1e-6, "corrupt/ddim commutation within 1e-6");
    o.detail << "oracle chain max error " << chain << ", commutation max error " << commute;
}

DenoiserParams toy_params(const DenoiserConfig& cfg) {
    DenoiserParams p = DenoiserParams::initialize(cfg, 99);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (double& v : p.tensor("out_proj.weight")) v = u(rng);
    for (double& v : p.tensor("out_proj.bias")) v = u(rng);
    return p;
}

LatentVideo random_video(const DenoiserConfig& cfg, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    LatentVideo v(cfg.frames, cfg.tokens, cfg.dim);
    for (double& x : v.data()) x = scale * n(rng);
    return v;
}

void gradient_validity(Outcome& o) {
    const DenoiserConfig cfg;
    const NoiseSchedule sched = NoiseSchedule::linear(cfg.timesteps, 1e-4, 2e-3);
    const DenoiserParams params = toy_params(cfg);
    const std::vector<TrainingSample> batch{{random_video(cfg, 1, 0.5),
                                             TimestepComposition({3, 3, 17, 40, 41, 77, 90, 100}, 100),
                                             random_video(cfg, 2, 1.0)}};
    const auto start = std::chrono::steady_clock::now();
    const LossAndGrad lg = loss_and_grad(params, cfg, batch, sched);
    const DenoiserGrads fd = verify::finite_diff_grads(params, cfg, batch, sched, 1e-4);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    double worst = 0.0;
    std::string worst_name;
    for (const TensorSpec& s : params.tensors()) {
        const double e = verify::relative_error(lg.grads.tensor(s), fd.tensor(s));
        o.require(e < 1e-3, s.name);
        if (e >= worst) {
            worst = e;
            worst_name = s.name;
        }
    }
    o.require(secs < 60.0, "runtime < 60 s");
    o.detail << params.tensors().size() << " tensors, " << params.values().size() << " scalars, worst relative error "
             << worst << " (" << worst_name << "), " << secs << " s";
}

void causality(Outcome& o) {
    const DenoiserConfig cfg;
    const NoiseSchedule sched = NoiseSchedule::linear(cfg.timesteps, 1e-4, 2e-3);
    const DenoiserParams params = toy_params(cfg);
    const LatentVideo z = random_video(cfg, 3, 1.0);
    const TimestepComposition comp({0, 0, 10, 20, 30, 50, 80, 100}, 100);
    const LatentVideo base = forward(params, cfg, z, comp, sched);
    int probes = 0;
    for (int j = 0; j < cfg.frames; ++j) {
        LatentVideo probe = z;
        for (double& v : probe.frame(j)) v += 1.0;
        const LatentVideo out = forward(params, cfg, probe, comp, sched);
        for (int f = 0; f < j; ++f) {
            o.require(std::equal(out.frame(f).begin(), out.frame(f).end(), base.frame(f).begin()),
                      "frame " + std::to_string(j) + " leaks into frame " + std::to_string(f));
            ++probes;
        }
        o.require(!std::equal(out.frame(j).begin(), out.frame(j).end(), base.frame(j).begin()),
                  "frame " + std::to_string(j) + " responds to its own input");
    }
    o.detail << probes << " earlier-frame outputs bit-identical under perturbation";
}

void training_smoke(Outcome& o) {
    const TrainConfig tc;
    const SyntheticDatasetSpec ds;
    const DenoiserConfig model;
    const NoiseSchedule sched = NoiseSchedule::linear(model.timesteps, 1e-4, 2e-3);
    const auto data = make_synthetic_dataset(ds);
    const auto start = std::chrono::steady_clock::now();
    const TrainResult a = train(tc, data, model, sched);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const TrainResult b = train(tc, data, model, sched);
    double head = 0.0;
    double tail = 0.0;
    const std::size_t n = a.log.size();
    for (std::size_t i = 0; i < 100; ++i) {
        head += a.log[i].loss / 100.0;
        tail += a.log[n - 100 + i].loss / 100.0;
    }
    o.require(tail <= 0.2 * head, "trailing-100 mean <= 0.2 x initial-100 mean");
    o.require(a.log == b.log && a.params == b.params && a.ema == b.ema, "bit-reproducible from seed");
    o.require(secs < 300.0, "runtime < 5 min");
    o.detail << "steps " << n << ", initial-100 mean " << head << ", trailing-100 mean " << tail << ", ratio "
             << tail / head << ", " << secs << " s per run";
}

int run(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    return rc;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void end_to_end(Outcome& o) {
    if (cli_path.empty()) {
        o.require(false, "no --cli path given");
        return;
    }
    const fs::path root = work_dir.empty() ? fs::temp_directory_path() / "ardiff_acceptance" : work_dir;
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path config = root / "config.json";
    std::ofstream(config) << R"({
  "frames": 8,
  "schedule": {"timesteps": 100},
  "dataset": {"n_sequences": 128, "seed": 4},
  "train": {"steps": 300, "seed": 12},
  "sample": {"grid_steps": 50, "seed": 5}
})";
    std::vector<std::string> names;
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path out = root / ("run" + std::to_string(rep));
        const std::string base = "\"" + cli_path + "\" --output-dir \"" + out.string() + "\" ";
        o.require(run(base + "train -c \"" + config.string() + "\" > /dev/null") == 0, "train exits 0");
        for (const char* mode : {"recorrupt_deterministic", "recorrupt_stochastic", "posterior"}) {
            const int n = std::string(mode) == "posterior" ? 100 : 50;
            for (int s : {0, 5, n}) {
                const std::string cmd = base + "generate -c \"" + config.string() + "\" --mode " + mode +
                                        " --steps " + std::to_string(n) + " --s " + std::to_string(s) + " > /dev/null";
                o.require(run(cmd) == 0, std::string("generate ") + mode + " s=" + std::to_string(s));
            }
        }
    }
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(root / "run0")) {
        const fs::path other = root / "run1" / entry.path().filename();
        o.require(fs::exists(other) && slurp(entry.path()) == slurp(other),
                  entry.path().filename().string() + " byte-identical");
        ++files;
    }
    o.require(files == 4 + 2 * 9, "every output present");
    const std::string s0 = slurp(root / "run0" / "sample_recorrupt_deterministic_s0.ardt");
    const std::string s5 = slurp(root / "run0" / "sample_recorrupt_deterministic_s5.ardt");
    o.require(!s0.empty() && s0 != s5, "s=0 and s=5 outputs differ");
    o.detail << files << " files byte-identical across two seeded pipelines (3 modes x s in {0, 5, N})";
}

struct Criterion {
    int id;
    const char* title;
    std::function<void(Outcome&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--criterion") only = std::atoi(argv[i + 1]);
        else if (flag == "--cli") cli_path = argv[i + 1];
        else if (flag == "--work") work_dir = argv[i + 1];
        else {
            std::cerr << "unknown flag " << flag << "\n";
            return 2;
        }
    }
    const std::vector<Criterion> criteria{
        {1, "search-space counts", search_space_counts},
        {2, "naive-scheduler bias", naive_bias},
        {3, "FoPP conditional uniformity", fopp_uniformity},
        {4, "AD step-count law", step_count_law},
        {5, "limiting-case equivalence", limiting_cases},
        {6, "diffusion-kernel correctness", kernel_correctness},
        {7, "gradient validity", gradient_validity},
        {8, "causality", causality},
        {9, "training smoke", training_smoke},
        {10, "end-to-end determinism", end_to_end},
    };
    bool all = true;
    for (const Criterion& c : criteria) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.fn(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %d (%s): %s  %s [%.2f s]\n", c.id, c.title, o.pass ? "PASS" : "FAIL",
                    o.detail.str().c_str(), secs);
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
