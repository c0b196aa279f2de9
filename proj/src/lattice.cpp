#include "ardiff/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace ardiff {

namespace {

bool checked_add(Count128 a, Count128 b, Count128& out) { return !__builtin_add_overflow(a, b, &out); }
bool checked_add(const BigCount& a, const BigCount& b, BigCount& out) {
    out = a + b;
    return true;
}

BigCount widen(Count128 v) {
    BigCount r = static_cast<std::uint64_t>(v >> 64);
    r <<= 64;
    r += static_cast<std::uint64_t>(v);
    return r;
}
const BigCount& widen(const BigCount& v) { return v; }

double log_big(const BigCount& v) {
    const auto msb = static_cast<long>(boost::multiprecision::msb(v));
    if (msb < 1000) {
        return std::log(v.convert_to<double>());
    }
    const long shift = msb - 60;
    const BigCount head = v >> shift;
    return std::log(head.convert_to<double>()) + static_cast<double>(shift) * std::log(2.0);
}

void require_dims(int frames, int timesteps) {
    if (frames < 1 || timesteps < 1) {
        throw std::invalid_argument("count tables: F and T must be >= 1");
    }
}

}  // namespace

std::string to_string(Count128 value) {
    if (value == 0) {
        return "0";
    }
    std::string digits;
    while (value != 0) {
        digits.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
        value /= 10;
    }
    std::reverse(digits.begin(), digits.end());
    return digits;
}

TimestepComposition::TimestepComposition(std::vector<int> timesteps, int max_timestep)
    : t_(std::move(timesteps)), max_t_(max_timestep) {
    if (t_.empty()) {
        throw std::invalid_argument("TimestepComposition: no frames");
    }
    if (max_t_ < 1) {
        throw std::invalid_argument("TimestepComposition: max timestep must be >= 1");
    }
    for (int v : t_) {
        if (v < 0 || v > max_t_) {
            throw std::invalid_argument("TimestepComposition: entry " + std::to_string(v) + " outside [0, " +
                                        std::to_string(max_t_) + "]");
        }
    }
    if (!is_non_decreasing(t_)) {
        throw std::invalid_argument("TimestepComposition: entries must be non-decreasing across frames");
    }
}

std::ostream& operator<<(std::ostream& os, const TimestepComposition& c) {
    os << '<';
    for (int i = 0; i < c.frames(); ++i) {
        os << (i ? "," : "") << c[i];
    }
    return os << '>';
}

bool is_non_decreasing(std::span<const int> timesteps) {
    return std::is_sorted(timesteps.begin(), timesteps.end());
}

BigCount binomial(unsigned n, unsigned k) {
    if (k > n) {
        return 0;
    }
    k = std::min(k, n - k);
    BigCount r = 1;
    for (unsigned i = 1; i <= k; ++i) {
        r *= n - k + i;
        r /= i;  // exact: r holds binomial(n - k + i, i)
    }
    return r;
}

BigCount count_compositions(int frames, int timesteps) {
    require_dims(frames, timesteps);
    const BigCount by_tables = CountTables::build(frames, timesteps).total();
    const BigCount closed = binomial(static_cast<unsigned>(timesteps + frames - 1), static_cast<unsigned>(frames));
    if (by_tables != closed) {
        throw std::logic_error("count_compositions: recurrence and closed form disagree");
    }
    return closed;
}

// ---------------------------------------------------------------------------
// Table construction

namespace {

template <class Int>
struct Built {
    std::vector<Int> start, end, start_suffix, end_prefix;
};

// Returns false on overflow of Int.
template <class Int>
bool fill_tables(int frames, int timesteps, Built<Int>& b) {
    const auto F = static_cast<std::size_t>(frames);
    const auto T = static_cast<std::size_t>(timesteps);
    b.start.assign(F * T, Int{0});
    b.end.assign(F * T, Int{0});
    b.start_suffix.assign(F * T, Int{0});
    b.end_prefix.assign(F * T, Int{0});
    auto at = [T](std::size_t i, std::size_t j) { return i * T + j; };  // j is t - 1

    // Suffix counts: a single trailing frame admits exactly one suffix.
    for (std::size_t i = F; i-- > 0;) {
        for (std::size_t j = T; j-- > 0;) {
            b.start[at(i, j)] = (i + 1 == F) ? Int{1} : b.start_suffix[at(i + 1, j)];
            const Int next = (j + 1 < T) ? b.start_suffix[at(i, j + 1)] : Int{0};
            if (!checked_add(b.start[at(i, j)], next, b.start_suffix[at(i, j)])) {
                return false;
            }
        }
    }
    // Prefix counts: a single leading frame admits exactly one prefix.
    for (std::size_t i = 0; i < F; ++i) {
        for (std::size_t j = 0; j < T; ++j) {
            b.end[at(i, j)] = (i == 0) ? Int{1} : b.end_prefix[at(i - 1, j)];
            const Int prev = (j > 0) ? b.end_prefix[at(i, j - 1)] : Int{0};
            if (!checked_add(b.end[at(i, j)], prev, b.end_prefix[at(i, j)])) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

CountTables CountTables::build(int frames, int timesteps) {
    require_dims(frames, timesteps);
    CountTables ct;
    ct.frames_ = frames;
    ct.timesteps_ = timesteps;
    Built<Count128> narrow;
    if (fill_tables(frames, timesteps, narrow)) {
        ct.store_ = Narrow{std::move(narrow.start), std::move(narrow.end), std::move(narrow.start_suffix),
                           std::move(narrow.end_prefix)};
        return ct;
    }
    ct.overflowed_ = true;
    Built<BigCount> wide;
    fill_tables(frames, timesteps, wide);
    ct.store_ = Wide{std::move(wide.start), std::move(wide.end), std::move(wide.start_suffix),
                     std::move(wide.end_prefix)};
    return ct;
}

CountTables CountTables::build_wide(int frames, int timesteps) {
    require_dims(frames, timesteps);
    CountTables ct;
    ct.frames_ = frames;
    ct.timesteps_ = timesteps;
    Built<BigCount> wide;
    fill_tables(frames, timesteps, wide);
    ct.store_ = Wide{std::move(wide.start), std::move(wide.end), std::move(wide.start_suffix),
                     std::move(wide.end_prefix)};
    return ct;
}

std::size_t CountTables::index(int frame, int t) const {
    if (frame < 0 || frame >= frames_ || t < 1 || t > timesteps_) {
        throw std::out_of_range("CountTables: (frame " + std::to_string(frame) + ", t " + std::to_string(t) +
                                ") outside the table");
    }
    return static_cast<std::size_t>(frame) * static_cast<std::size_t>(timesteps_) + static_cast<std::size_t>(t - 1);
}

BigCount CountTables::start(int frame, int t) const {
    const auto i = index(frame, t);
    return std::visit([i](const auto& s) { return BigCount(widen(s.start[i])); }, store_);
}

BigCount CountTables::end(int frame, int t) const {
    const auto i = index(frame, t);
    return std::visit([i](const auto& s) { return BigCount(widen(s.end[i])); }, store_);
}

BigCount CountTables::start_suffix(int frame, int t) const {
    const auto i = index(frame, t);
    return std::visit([i](const auto& s) { return BigCount(widen(s.start_suffix[i])); }, store_);
}

BigCount CountTables::end_prefix(int frame, int t) const {
    const auto i = index(frame, t);
    return std::visit([i](const auto& s) { return BigCount(widen(s.end_prefix[i])); }, store_);
}

BigCount CountTables::through(int frame, int t) const { return end(frame, t) * start(frame, t); }

BigCount CountTables::total() const { return start_suffix(0, 1); }

double CountTables::start_as_double(int frame, int t) const { return start(frame, t).convert_to<double>(); }
double CountTables::end_as_double(int frame, int t) const { return end(frame, t).convert_to<double>(); }

bool operator==(const CountTables& a, const CountTables& b) {
    if (a.frames_ != b.frames_ || a.timesteps_ != b.timesteps_) {
        return false;
    }
    for (int i = 0; i < a.frames_; ++i) {
        for (int t = 1; t <= a.timesteps_; ++t) {
            if (a.start(i, t) != b.start(i, t) || a.end(i, t) != b.end(i, t)) {
                return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Random draws

namespace {

int bit_length(Count128 v) {
    const auto hi = static_cast<std::uint64_t>(v >> 64);
    if (hi != 0) {
        return 128 - std::countl_zero(hi);
    }
    return 64 - std::countl_zero(static_cast<std::uint64_t>(v));
}

}  // namespace

// Both overloads consume the generator identically for equal bounds, so
// narrow and wide tables yield the same samples from the same seed.
Count128 uniform_below(Rng& rng, Count128 bound) {
    if (bound == 0) {
        throw std::invalid_argument("uniform_below: empty range");
    }
    if (bound == 1) {
        return 0;
    }
    const int bits = bit_length(bound - 1);
    const int words = (bits + 63) / 64;
    const Count128 mask = bits == 128 ? ~Count128{0} : ((Count128{1} << bits) - 1);
    for (;;) {
        Count128 x = 0;
        for (int w = 0; w < words; ++w) {
            x |= static_cast<Count128>(rng()) << (64 * w);
        }
        x &= mask;
        if (x < bound) {
            return x;
        }
    }
}

BigCount uniform_below(Rng& rng, const BigCount& bound) {
    if (bound <= 0) {
        throw std::invalid_argument("uniform_below: empty range");
    }
    if (bound == 1) {
        return 0;
    }
    const BigCount top = bound - 1;
    const auto bits = static_cast<unsigned>(boost::multiprecision::msb(top)) + 1;
    const unsigned words = (bits + 63) / 64;
    const BigCount mask = (BigCount(1) << bits) - 1;
    for (;;) {
        BigCount x = 0;
        for (unsigned w = 0; w < words; ++w) {
            x |= BigCount(static_cast<std::uint64_t>(rng())) << (64 * w);
        }
        x &= mask;
        if (x < bound) {
            return x;
        }
    }
}

namespace {

int uniform_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(uniform_below(rng, static_cast<Count128>(hi - lo + 1)));
}

}  // namespace

// ---------------------------------------------------------------------------
// FoPP

TimestepComposition fopp_sample_from_anchor(const CountTables& tables, int anchor_frame, int anchor_timestep,
                                            Rng& rng) {
    const int F = tables.frames_;
    const int T = tables.timesteps_;
    if (anchor_frame < 0 || anchor_frame >= F || anchor_timestep < 1 || anchor_timestep > T) {
        throw std::out_of_range("fopp_sample_from_anchor: anchor outside the table");
    }
    std::vector<int> t(static_cast<std::size_t>(F));
    t[static_cast<std::size_t>(anchor_frame)] = anchor_timestep;

    std::visit(
        [&](const auto& s) {
            using Int = std::decay_t<decltype(s.start[0])>;
            auto row = [T](int i) { return static_cast<std::size_t>(i) * static_cast<std::size_t>(T); };

            // Earlier frames: k in [1, K] with weight end(i, k). The running
            // prefix sums are the inverse-CDF table.
            for (int i = anchor_frame - 1; i >= 0; --i) {
                const int K = t[static_cast<std::size_t>(i + 1)];
                const auto first = s.end_prefix.begin() + static_cast<std::ptrdiff_t>(row(i));
                const Int total = first[K - 1];
                const Int u = uniform_below(rng, total);
                // smallest k with end_prefix(i, k) > u
                const auto it = std::upper_bound(first, first + K, u);
                t[static_cast<std::size_t>(i)] = static_cast<int>(it - first) + 1;
            }

            // Later frames: k in [K, T] with weight start(i, k). With
            // v = total - u in [1, total], the draw is the smallest k whose
            // strict suffix start_suffix(i, k + 1) falls below v.
            for (int i = anchor_frame + 1; i < F; ++i) {
                const int K = t[static_cast<std::size_t>(i - 1)];
                const auto first = s.start_suffix.begin() + static_cast<std::ptrdiff_t>(row(i));
                const Int total = first[K - 1];
                const Int v = total - uniform_below(rng, total);
                int lo = K;
                int hi = T;
                while (lo < hi) {
                    const int mid = lo + (hi - lo) / 2;
                    const Int tail = (mid < T) ? Int(first[mid]) : Int{0};  // start_suffix(i, mid + 1)
                    if (tail < v) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                t[static_cast<std::size_t>(i)] = lo;
            }
        },
        tables.store_);

    return TimestepComposition(std::move(t), T);
}

FoppDraw fopp_draw(const CountTables& tables, Rng& rng) {
    const int f = uniform_int(rng, 0, tables.frames() - 1);
    const int tau = uniform_int(rng, 1, tables.timesteps());
    return FoppDraw{f, tau, fopp_sample_from_anchor(tables, f, tau, rng)};
}

TimestepComposition fopp_sample(const CountTables& tables, Rng& rng) { return fopp_draw(tables, rng).composition; }

double composition_log_probability(const TimestepComposition& c, const CountTables& tables) {
    if (c.frames() != tables.frames()) {
        throw std::invalid_argument("composition_log_probability: frame count mismatch");
    }
    const int T = tables.timesteps();
    std::vector<double> log_terms;
    log_terms.reserve(static_cast<std::size_t>(c.frames()));
    for (int f = 0; f < c.frames(); ++f) {
        if (c[f] < 1 || c[f] > T) {
            throw std::invalid_argument("composition_log_probability: entries must lie in [1, T]");
        }
        log_terms.push_back(-log_big(tables.through(f, c[f])));
    }
    const double peak = *std::max_element(log_terms.begin(), log_terms.end());
    double acc = 0.0;
    for (double v : log_terms) {
        acc += std::exp(v - peak);
    }
    return peak + std::log(acc) - std::log(static_cast<double>(c.frames())) - std::log(static_cast<double>(T));
}

TimestepComposition naive_sequential_sample(int frames, int timesteps, Rng& rng) {
    require_dims(frames, timesteps);
    std::vector<int> t(static_cast<std::size_t>(frames));
    int lo = 1;
    for (auto& v : t) {
        v = uniform_int(rng, lo, timesteps);
        lo = v;
    }
    return TimestepComposition(std::move(t), timesteps);
}

TimestepComposition sample_training_composition(const CountTables& tables, const FoppOptions& options, Rng& rng) {
    TimestepComposition c = fopp_sample(tables, rng);
    if (!options.remap_one_to_clean || c[0] != 1) {
        return c;
    }
    if (uniform_below(rng, Count128{2}) == 0) {
        return c;
    }
    std::vector<int> t(c.values().begin(), c.values().end());
    for (auto& v : t) {
        if (v != 1) {
            break;
        }
        v = 0;
    }
    return TimestepComposition(std::move(t), c.max_timestep());
}

}  // namespace ardiff
