#pragma once

// Timestep compositions under the non-decreasing constraint
// t_1 <= t_2 <= ... <= t_F, exact counting of them, and the samplers that
// draw them during training.
//
// Indexing convention: frames are 0-based (0..F-1); timesteps are the actual
// diffusion timestep values (training uses 1..T, inference also uses 0).

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ardiff {

using BigCount = boost::multiprecision::cpp_int;
using Count128 = unsigned __int128;
using Rng = std::mt19937_64;

std::string to_string(Count128 value);

class TimestepComposition {
public:
    /// Throws std::invalid_argument unless every entry is in [0, max_timestep]
    /// and the sequence is non-decreasing.
    TimestepComposition(std::vector<int> timesteps, int max_timestep);

    int frames() const { return static_cast<int>(t_.size()); }
    int max_timestep() const { return max_t_; }
    int operator[](int frame) const { return t_[static_cast<std::size_t>(frame)]; }
    std::span<const int> values() const { return t_; }

    friend bool operator==(const TimestepComposition&, const TimestepComposition&) = default;
    friend auto operator<=>(const TimestepComposition& a, const TimestepComposition& b) { return a.t_ <=> b.t_; }

private:
    std::vector<int> t_;
    int max_t_;
};

std::ostream& operator<<(std::ostream& os, const TimestepComposition& c);

bool is_non_decreasing(std::span<const int> timesteps);

/// binomial(n, k) as an exact integer.
BigCount binomial(unsigned n, unsigned k);

/// Number of non-decreasing length-F sequences over [1, T]. Computed by the
/// count-table recurrences and by binomial(T+F-1, F); throws std::logic_error
/// if the two ever disagree.
BigCount count_compositions(int frames, int timesteps);

/// Exact count tables for (F, T).
///   start(i, j): non-decreasing suffixes <t_i = j, ..., t_F>
///   end(i, j):   non-decreasing prefixes <t_1, ..., t_i = j>
/// along with running sums used by the samplers:
///   start_suffix(i, j) = sum_{k >= j} start(i, k)
///   end_prefix(i, j)   = sum_{k <= j} end(i, k)
class CountTables {
public:
    static CountTables build(int frames, int timesteps);

    /// Forces the arbitrary-width representation regardless of magnitude.
    static CountTables build_wide(int frames, int timesteps);

    int frames() const { return frames_; }
    int timesteps() const { return timesteps_; }

    /// True when 128-bit accumulation overflowed and the tables are held as
    /// arbitrary-width integers.
    bool overflowed() const { return overflowed_; }
    bool is_wide() const { return std::holds_alternative<Wide>(store_); }

    BigCount start(int frame, int t) const;
    BigCount end(int frame, int t) const;
    BigCount start_suffix(int frame, int t) const;
    BigCount end_prefix(int frame, int t) const;

    /// Number of compositions with t_frame = t.
    BigCount through(int frame, int t) const;

    /// Total number of compositions, sum_j start(0, j).
    BigCount total() const;

    double start_as_double(int frame, int t) const;
    double end_as_double(int frame, int t) const;

    // Binary cache format. Header: 8-byte magic "ARDCOUNT", then u32 version,
    // u32 F, u32 T, u32 integer width in bits (128, or 0 for variable-length
    // entries). Body: start table then end table, row-major by frame.
    void save(std::ostream& os) const;
    static CountTables load(std::istream& is);
    void save(const std::string& path) const;
    static CountTables load(const std::string& path);

    friend bool operator==(const CountTables& a, const CountTables& b);

private:
    template <class Int>
    struct Tables {
        std::vector<Int> start, end, start_suffix, end_prefix;
    };
    using Narrow = Tables<Count128>;
    using Wide = Tables<BigCount>;

    CountTables() = default;
    std::size_t index(int frame, int t) const;

    int frames_ = 0;
    int timesteps_ = 0;
    bool overflowed_ = false;
    std::variant<Narrow, Wide> store_;

    friend TimestepComposition fopp_sample_from_anchor(const CountTables&, int, int, Rng&);
    friend class CountTablesIo;
};

/// Uniform integer in [0, bound) from 64-bit words of `rng` by rejection.
Count128 uniform_below(Rng& rng, Count128 bound);
BigCount uniform_below(Rng& rng, const BigCount& bound);

struct FoppDraw {
    int anchor_frame;
    int anchor_timestep;
    TimestepComposition composition;
};

/// Frame-oriented probability propagation: draw an anchor frame and anchor
/// timestep uniformly, then fill earlier and later frames one at a time in
/// proportion to the number of compositions that remain reachable.
FoppDraw fopp_draw(const CountTables& tables, Rng& rng);
TimestepComposition fopp_sample(const CountTables& tables, Rng& rng);

/// Completes a composition around a fixed anchor. The result is uniform over
/// all compositions with t_anchor_frame = anchor_timestep.
TimestepComposition fopp_sample_from_anchor(const CountTables& tables, int anchor_frame, int anchor_timestep,
                                            Rng& rng);

/// log P(c) under the FoPP mixture:
///   P(c) = 1/(F T) * sum_f 1 / through(f, c_f)
double composition_log_probability(const TimestepComposition& c, const CountTables& tables);

/// The biased baseline: t_1 ~ U[1, T], then t_i ~ U[t_{i-1}, T].
TimestepComposition naive_sequential_sample(int frames, int timesteps, Rng& rng);

/// Options that adjust the training-time sampler output.
struct FoppOptions {
    /// With probability 1/2, map the leading run of t = 1 entries to t = 0.
    bool remap_one_to_clean = false;
};

TimestepComposition sample_training_composition(const CountTables& tables, const FoppOptions& options, Rng& rng);

}  // namespace ardiff
