#pragma once

// Independent oracles and statistics used by the test suites and by the
// `verify` command.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ardiff/denoiser.hpp"
#include "ardiff/lattice.hpp"

namespace ardiff::verify {

enum class Constraint {
    Equal,          // t_1 = ... = t_F
    NonDecreasing,  // t_1 <= ... <= t_F
    Independent,    // no constraint
};

struct EnumerationResult {
    std::vector<std::vector<int>> compositions;  // lexicographic, duplicate-free
    BigCount count;
};

class EnumerationTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exhaustive listing over [1, T]^F. Refuses (throws) rather than truncating
/// when the result would exceed `cap` compositions.
EnumerationResult enumerate_compositions(int frames, int timesteps, Constraint constraint,
                                         std::size_t cap = 10'000'000);

/// Baseline samplers for comparison with FoPP.
std::vector<int> equal_sample(int frames, int timesteps, Rng& rng);
std::vector<int> independent_sample(int frames, int timesteps, Rng& rng);

/// Upper 0.1% point of the chi-square distribution, tabulated for dof 1..200.
double chi_square_critical_999(int dof);

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double critical = 0.0;
    bool reject = false;
};

/// Pearson goodness of fit. `expected` must sum to 1 (within 1e-9) and every
/// cell must expect at least 5 observations. A single-cell test has zero
/// degrees of freedom and never rejects.
ChiSquareResult chi_square_uniformity(std::span<const std::int64_t> observed, std::span<const double> expected);

/// Central differences of `f` at `x`, one coordinate at a time.
std::vector<double> finite_diff_grads(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> x, double step);

/// Central differences of the denoiser loss with respect to every parameter.
DenoiserGrads finite_diff_grads(const DenoiserParams& params, const DenoiserConfig& config,
                                std::span<const TrainingSample> batch, const NoiseSchedule& sched, double step);

/// max |a - b| / max(max |b|, floor) over one tensor.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

struct ReportEntry {
    std::string name;
    double statistic = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

class Report {
public:
    /// Passes when statistic <= threshold.
    void check_at_most(std::string name, double statistic, double threshold);
    /// Passes when statistic >= threshold.
    void check_at_least(std::string name, double statistic, double threshold);
    void check(std::string name, bool ok, double statistic = 0.0, double threshold = 0.0);

    const std::vector<ReportEntry>& entries() const { return entries_; }
    bool all_passed() const;
    std::size_t failures() const;

    /// One tab-separated line per entry: name, statistic, threshold, PASS|FAIL.
    void write(std::ostream& os) const;

    void append(const Report& other);

private:
    std::vector<ReportEntry> entries_;
};

std::vector<std::string> suite_names();

/// Runs a named suite ("counts", "scheduler", "kernels", "diffusion",
/// "denoiser", "sampling", or "all"). Throws std::invalid_argument for an
/// unknown name.
Report run_suite(const std::string& name, std::uint64_t seed = 0);

}  // namespace ardiff::verify
