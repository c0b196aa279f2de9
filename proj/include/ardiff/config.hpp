#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "ardiff/denoiser.hpp"
#include "ardiff/sampling.hpp"
#include "ardiff/schedule.hpp"
#include "ardiff/training.hpp"

namespace ardiff {

struct ScheduleConfig {
    int timesteps = 100;
    double beta_start = 0.0001;
    double beta_end = 0.002;

    NoiseSchedule build() const { return NoiseSchedule::linear(timesteps, beta_start, beta_end); }
};

struct PathConfig {
    std::string checkpoint = "checkpoint.ardp";
    std::string dataset_cache;  // empty: regenerate the dataset every run
    std::string output_dir = "out";
};

/// Everything a CLI run needs. The shape fields (frames, tokens, dim), the
/// timestep count and scale_factor live once at the top and are copied into
/// the per-module configs by synchronize().
struct RunConfig {
    int frames = 8;
    int tokens = 1;
    int dim = 2;
    double scale_factor = 0.5;
    ScheduleConfig schedule;
    DenoiserConfig denoiser;
    SyntheticDatasetSpec dataset;
    TrainConfig train;
    SampleConfig sample;
    PathConfig paths;

    void synchronize();
    /// Cross-field checks plus every module's own validation.
    void validate() const;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses a JSON config. Missing keys keep their defaults, unknown keys are
/// rejected. Errors name the offending field or the line of a syntax error.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// The effective configuration, pretty-printed with sorted keys.
std::string dump_config(const RunConfig& config);

}  // namespace ardiff
