#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ardiff/ad_scheduler.hpp"
#include "ardiff/config.hpp"
#include "ardiff/kernels.hpp"
#include "ardiff/lattice.hpp"
#include "ardiff/sampling.hpp"
#include "ardiff/tensor_io.hpp"
#include "ardiff/training.hpp"
#include "ardiff/verification.hpp"

namespace fs = std::filesystem;
using namespace ardiff;

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// "5.4e34" from the decimal digits, so it works past the double range.
std::string approx(const BigCount& n) {
    const std::string digits = n.str();
    if (digits.size() <= 1) return digits;
    const int exponent = static_cast<int>(digits.size()) - 1;
    long long lead = std::stoll(digits.substr(0, std::min<std::size_t>(digits.size(), 3)));
    if (digits.size() < 3) lead *= 10;
    lead = (lead + 5) / 10;  // two significant figures
    int e = exponent;
    if (lead == 100) {
        lead = 10;
        ++e;
    }
    return std::to_string(lead / 10) + "." + std::to_string(lead % 10) + "e" + std::to_string(e);
}

fs::path output_dir(const std::string& flag, const std::string& from_config) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("ARDIFF_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
    return from_config.empty() ? fs::path("out") : fs::path(from_config);
}

fs::path under(const fs::path& dir, const std::string& file) {
    const fs::path p(file);
    return p.is_absolute() ? p : dir / p;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

RunConfig config_from(const std::string& path) {
    if (!path.empty()) return load_config(path);
    RunConfig c;
    c.synchronize();
    return c;
}

std::vector<LatentVideo> dataset_for(const RunConfig& cfg, const fs::path& dir) {
    if (cfg.paths.dataset_cache.empty()) return make_synthetic_dataset(cfg.dataset);
    const fs::path cache = under(dir, cfg.paths.dataset_cache);
    if (fs::exists(cache)) {
        std::vector<LatentVideo> data = read_dataset(cache.string());
        if (static_cast<int>(data.size()) != cfg.dataset.n_sequences || data.empty() ||
            data.front().frames() != cfg.frames || data.front().tokens() != cfg.tokens ||
            data.front().dim() != cfg.dim) {
            throw ConfigError("dataset cache " + cache.string() + " does not match the config");
        }
        return data;
    }
    std::vector<LatentVideo> data = make_synthetic_dataset(cfg.dataset);
    ensure_dir(cache.parent_path().empty() ? fs::path(".") : cache.parent_path());
    write_dataset(cache.string(), data, 1.0);
    return data;
}

int cmd_count(int frames, int timesteps) {
    if (frames < 1 || timesteps < 1) throw UsageError("count: --frames and --timesteps must be >= 1");
    const BigCount nd = count_compositions(frames, timesteps);
    BigCount independent = 1;
    for (int f = 0; f < frames; ++f) independent *= timesteps;
    std::cout << "frames " << frames << " timesteps " << timesteps << "\n";
    std::cout << "non-decreasing " << nd.str() << " (~" << approx(nd) << ")\n";
    std::cout << "order of magnitude " << nd.str().size() - 1 << "\n";
    std::cout << "equal " << timesteps << "\n";
    std::cout << "independent " << independent.str() << " (~" << approx(independent) << ")\n";
    return 0;
}

int cmd_plan(int frames, int steps, int s, const std::string& out_flag, const std::string& output) {
    if (s < 0) throw UsageError("plan: --s must be non-negative");
    if (frames < 1 || steps < 1) throw UsageError("plan: --frames and --steps must be >= 1");
    const TrajectoryPlan plan = plan_trajectory(frames, steps, s);
    const fs::path dir = output_dir(out_flag, "");
    const fs::path path = under(dir, output.empty() ? "plan.jsonl" : output);
    ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    write_plan_jsonl(os, plan);
    std::cout << "steps " << plan.size() << "\n";
    std::cout << "model_calls " << plan.size() << "\n";
    std::cout << "written " << path.string() << "\n";
    return 0;
}

CountTables tables_for(int frames, int timesteps, const std::string& cache) {
    if (!cache.empty() && fs::exists(cache)) {
        CountTables t = CountTables::load(cache);
        if (t.frames() != frames || t.timesteps() != timesteps) {
            throw UsageError("count table cache " + cache + " holds F=" + std::to_string(t.frames()) +
                             ", T=" + std::to_string(t.timesteps()));
        }
        return t;
    }
    CountTables t = CountTables::build(frames, timesteps);
    if (!cache.empty()) t.save(cache);
    return t;
}

int cmd_sample_composition(int frames, int timesteps, long long n, std::uint64_t seed, const std::string& cache,
                           const std::string& out_flag, const std::string& listing) {
    if (frames < 1 || timesteps < 1) throw UsageError("sample-composition: --frames and --timesteps must be >= 1");
    if (n < 1) throw UsageError("sample-composition: --n must be >= 1");
    const CountTables tables = tables_for(frames, timesteps, cache);
    Rng rng(seed);
    std::map<std::vector<int>, long long> hist;
    std::ofstream list_os;
    if (!listing.empty()) {
        const fs::path path = under(output_dir(out_flag, ""), listing);
        ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
        list_os.open(path, std::ios::binary);
        if (!list_os) throw std::runtime_error("cannot open " + path.string());
    }
    for (long long i = 0; i < n; ++i) {
        const TimestepComposition c = fopp_sample(tables, rng);
        if (list_os.is_open()) list_os << c << "\n";
        ++hist[{c.values().begin(), c.values().end()}];
    }

    std::cout << "composition\tcount\tempirical\texpected\tsigma3\tverdict\n";
    long long within = 0;
    char buf[160];
    for (const auto& [values, count] : hist) {
        const double p = std::exp(composition_log_probability(TimestepComposition(values, timesteps), tables));
        const double expected = static_cast<double>(n) * p;
        const double bound = 3.0 * std::sqrt(static_cast<double>(n) * p * (1.0 - p));
        const bool ok = std::abs(static_cast<double>(count) - expected) <= bound;
        within += ok ? 1 : 0;
        std::ostringstream name;
        name << TimestepComposition(values, timesteps);
        std::snprintf(buf, sizeof buf, "\t%lld\t%.6f\t%.6f\t%.1f\t%s\n", count,
                      static_cast<double>(count) / static_cast<double>(n), p, bound, ok ? "ok" : "outside");
        std::cout << name.str() << buf;
    }
    std::cout << "distinct " << hist.size() << " of " << tables.total().str() << "; within 3 sigma " << within
              << "/" << hist.size() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<int> steps,
              const std::string& out_flag) {
    RunConfig cfg = config_from(config_path);
    if (seed) cfg.train.seed = *seed;
    if (steps) cfg.train.steps = *steps;
    cfg.validate();
    const fs::path dir = output_dir(out_flag, cfg.paths.output_dir);
    ensure_dir(dir);

    const std::vector<LatentVideo> data = dataset_for(cfg, dir);
    const NoiseSchedule sched = cfg.schedule.build();
    const TrainResult result = train(cfg.train, data, cfg.denoiser, sched);

    const fs::path ckpt = under(dir, cfg.paths.checkpoint);
    result.params.save(ckpt.string());
    result.ema.save(ckpt.string() + ".ema");
    std::ofstream loss(dir / "loss.csv", std::ios::binary);
    write_loss_csv(loss, result.log);
    std::ofstream(dir / "config.json", std::ios::binary) << dump_config(cfg);

    if (!result.log.empty()) {
        std::cout << "first loss " << result.log.front().loss << "\nlast loss " << result.log.back().loss << "\n";
    }
    std::cout << "checkpoint " << ckpt.string() << "\n";
    return 0;
}

int cmd_generate(const std::string& config_path, std::string checkpoint, std::optional<int> s,
                 std::optional<int> steps, std::optional<std::string> mode, std::optional<std::uint64_t> seed,
                 const std::string& weights, const std::string& output, const std::string& out_flag) {
    RunConfig cfg = config_from(config_path);
    if (s) cfg.sample.difference = *s;
    if (steps) cfg.sample.grid_steps = *steps;
    if (mode) {
        try {
            cfg.sample.mode = parse_mode(*mode);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (seed) cfg.sample.seed = *seed;
    cfg.validate();
    const fs::path dir = output_dir(out_flag, cfg.paths.output_dir);
    ensure_dir(dir);

    if (checkpoint.empty()) checkpoint = under(dir, cfg.paths.checkpoint).string();
    if (weights == "ema") checkpoint += ".ema";
    const DenoiserParams params = DenoiserParams::load(checkpoint);
    if (!(params.config() == cfg.denoiser)) {
        throw ConfigError("checkpoint " + checkpoint + " was trained with a different denoiser config");
    }

    const NoiseSchedule sched = cfg.schedule.build();
    Rng rng(cfg.sample.seed);
    GenerationTrace trace;
    const LatentVideo video = generate(params, cfg.denoiser, sched, cfg.sample, rng, &trace);

    const std::string name = output.empty() ? "sample_" + std::string(mode_name(cfg.sample.mode)) + "_s" +
                                                  std::to_string(cfg.sample.difference)
                                            : output;
    const fs::path tensor_path = under(dir, name + ".ardt");
    write_latent(tensor_path.string(), video, cfg.sample.scale_factor);
    std::ofstream csv(under(dir, name + ".csv"), std::ios::binary);
    write_latent_csv(csv, video);
    std::cout << "model_calls " << trace.model_calls << "\n";
    std::cout << "written " << tensor_path.string() << "\n";
    return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& report_path) {
    const auto names = verify::suite_names();
    if (std::find(names.begin(), names.end(), suite) == names.end()) {
        throw UsageError("verify: unknown suite '" + suite + "'");
    }
    const verify::Report report = verify::run_suite(suite, seed);
    report.write(std::cout);
    if (!report_path.empty()) {
        std::ofstream os(report_path, std::ios::binary);
        report.write(os);
    }
    const auto failed = report.failures();
    std::cout << (failed == 0 ? "ALL PASS" : "FAILURES " + std::to_string(failed)) << " (" << report.entries().size()
              << " checks, kernels " << kernels::backend_name(kernels::active().backend) << ")\n";
    return failed == 0 ? 0 : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Asynchronous autoregressive diffusion toolkit"};
    app.require_subcommand(1);
    std::string out_dir;
    app.add_option("--output-dir", out_dir, "Output directory (overrides ARDIFF_OUTPUT_DIR and the config)");

    int frames = 0;
    int timesteps = 0;
    std::uint64_t seed = 0;

    auto* count = app.add_subcommand("count", "Count timestep compositions under each constraint");
    count->add_option("--frames,-F", frames)->required();
    count->add_option("--timesteps,-T", timesteps)->required();
    count->add_option("--seed", seed, "Accepted for uniformity; counting is deterministic");

    int grid_steps = 0;
    int difference = 0;
    std::string plan_out;
    auto* plan = app.add_subcommand("plan", "Write the AD trajectory for (F, N, s) as JSON lines");
    plan->add_option("--frames,-F", frames)->required();
    plan->add_option("--steps,-N", grid_steps)->required();
    plan->add_option("--s", difference)->required();
    plan->add_option("--output,-o", plan_out, "Plan file (default plan.jsonl in the output directory)");
    plan->add_option("--seed", seed, "Accepted for uniformity; planning is deterministic");

    long long n = 0;
    std::string table_cache;
    std::string listing;
    auto* sample = app.add_subcommand("sample-composition", "Draw FoPP compositions and print their histogram");
    sample->add_option("--frames,-F", frames)->required();
    sample->add_option("--timesteps,-T", timesteps)->required();
    sample->add_option("--n", n)->required();
    sample->add_option("--seed", seed);
    sample->add_option("--table-cache", table_cache, "Count table file, built and saved when missing");
    sample->add_option("--listing", listing, "Write every draw, one per line, to this file");

    std::string config_path;
    std::optional<std::uint64_t> opt_seed;
    std::optional<int> opt_steps;
    auto* train_cmd = app.add_subcommand("train", "Train the toy denoiser");
    train_cmd->add_option("--config,-c", config_path);
    train_cmd->add_option("--seed", opt_seed);
    train_cmd->add_option("--steps", opt_steps, "Training iterations");

    std::string checkpoint;
    std::optional<int> opt_s;
    std::optional<std::string> opt_mode;
    std::string weights = "ema";
    std::string gen_out;
    auto* gen = app.add_subcommand("generate", "Sample a latent video from a checkpoint");
    gen->add_option("--config,-c", config_path);
    gen->add_option("--checkpoint", checkpoint, "Defaults to paths.checkpoint in the output directory");
    gen->add_option("--s", opt_s);
    gen->add_option("--steps,-N", opt_steps, "Sampler grid steps");
    gen->add_option("--mode", opt_mode)->check(CLI::IsMember({"recorrupt_deterministic", "recorrupt_stochastic", "posterior"}));
    gen->add_option("--seed", opt_seed);
    gen->add_option("--weights", weights)->check(CLI::IsMember({"ema", "params"}));
    gen->add_option("--output,-o", gen_out, "Base name of the output files");

    std::string suite;
    std::string report;
    auto* ver = app.add_subcommand("verify", "Run a verification suite");
    ver->add_option("suite", suite)->required()->check(CLI::IsMember(verify::suite_names()));
    ver->add_option("--seed", seed);
    ver->add_option("--report", report, "Also write the report to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (count->parsed()) return cmd_count(frames, timesteps);
        if (plan->parsed()) return cmd_plan(frames, grid_steps, difference, out_dir, plan_out);
        if (sample->parsed()) return cmd_sample_composition(frames, timesteps, n, seed, table_cache, out_dir, listing);
        if (train_cmd->parsed()) return cmd_train(config_path, opt_seed, opt_steps, out_dir);
        if (gen->parsed()) {
            return cmd_generate(config_path, checkpoint, opt_s, opt_steps, opt_mode, opt_seed, weights, gen_out,
                                out_dir);
        }
        if (ver->parsed()) return cmd_verify(suite, seed, report);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
