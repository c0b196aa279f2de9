#include "ardiff/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace ardiff::verify {

namespace {

// chi2.ppf(0.999, dof) for dof = 1..200.
constexpr double kChiSquare999[200] = {
    10.8276, 13.8155, 16.2662, 18.4668, 20.5150,
    22.4577, 24.3219, 26.1245, 27.8772, 29.5883,
    31.2641, 32.9095, 34.5282, 36.1233, 37.6973,
    39.2524, 40.7902, 42.3124, 43.8202, 45.3147,
    46.7970, 48.2679, 49.7282, 51.1786, 52.6197,
    54.0520, 55.4760, 56.8923, 58.3012, 59.7031,
    61.0983, 62.4872, 63.8701, 65.2472, 66.6188,
    67.9852, 69.3465, 70.7029, 72.0547, 73.4020,
    74.7449, 76.0838, 77.4186, 78.7495, 80.0767,
    81.4003, 82.7204, 84.0371, 85.3506, 86.6608,
    87.9680, 89.2722, 90.5734, 91.8718, 93.1675,
    94.4605, 95.7510, 97.0388, 98.3242, 99.6072,
    100.8879, 102.1662, 103.4424, 104.7163, 105.9881,
    107.2579, 108.5256, 109.7913, 111.0551, 112.3169,
    113.5769, 114.8351, 116.0915, 117.3462, 118.5991,
    119.8503, 121.1000, 122.3480, 123.5944, 124.8392,
    126.0826, 127.3244, 128.5648, 129.8037, 131.0412,
    132.2773, 133.5121, 134.7455, 135.9776, 137.2084,
    138.4379, 139.6661, 140.8931, 142.1189, 143.3435,
    144.5670, 145.7892, 147.0104, 148.2304, 149.4493,
    150.6671, 151.8838, 153.0995, 154.3141, 155.5277,
    156.7403, 157.9518, 159.1624, 160.3721, 161.5807,
    162.7885, 163.9953, 165.2011, 166.4061, 167.6102,
    168.8133, 170.0156, 171.2171, 172.4177, 173.6174,
    174.8164, 176.0145, 177.2118, 178.4083, 179.6040,
    180.7989, 181.9930, 183.1864, 184.3791, 185.5710,
    186.7621, 187.9526, 189.1423, 190.3313, 191.5196,
    192.7072, 193.8941, 195.0803, 196.2659, 197.4508,
    198.6350, 199.8186, 201.0015, 202.1838, 203.3655,
    204.5465, 205.7270, 206.9068, 208.0860, 209.2646,
    210.4426, 211.6200, 212.7969, 213.9732, 215.1489,
    216.3240, 217.4986, 218.6726, 219.8460, 221.0190,
    222.1914, 223.3632, 224.5345, 225.7053, 226.8756,
    228.0454, 229.2146, 230.3834, 231.5516, 232.7194,
    233.8866, 235.0534, 236.2197, 237.3855, 238.5508,
    239.7157, 240.8801, 242.0440, 243.2075, 244.3705,
    245.5330, 246.6951, 247.8568, 249.0180, 250.1788,
    251.3392, 252.4991, 253.6586, 254.8177, 255.9763,
    257.1346, 258.2924, 259.4498, 260.6068, 261.7634,
    262.9197, 264.0755, 265.2309, 266.3859, 267.5405,
};

int uniform_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(uniform_below(rng, static_cast<Count128>(hi - lo + 1)));
}

}  // namespace

EnumerationResult enumerate_compositions(int frames, int timesteps, Constraint constraint, std::size_t cap) {
    if (frames < 1 || timesteps < 1) {
        throw std::invalid_argument("enumerate_compositions: F and T must be >= 1");
    }
    BigCount expected;
    switch (constraint) {
        case Constraint::Equal:
            expected = timesteps;
            break;
        case Constraint::Independent:
            expected = boost::multiprecision::pow(BigCount(timesteps), static_cast<unsigned>(frames));
            break;
        case Constraint::NonDecreasing:
            expected = binomial(static_cast<unsigned>(timesteps + frames - 1), static_cast<unsigned>(frames));
            break;
    }
    if (expected > cap) {
        throw EnumerationTooLarge("enumerate_compositions: " + expected.str() + " compositions exceed the cap of " +
                                  std::to_string(cap));
    }

    EnumerationResult r;
    // Odometer over [1, T]^F in lexicographic order, filtered by the constraint.
    std::vector<int> t(static_cast<std::size_t>(frames), 1);
    for (;;) {
        bool keep = true;
        for (std::size_t i = 1; i < t.size() && keep; ++i) {
            if (constraint == Constraint::Equal) keep = t[i] == t[0];
            if (constraint == Constraint::NonDecreasing) keep = t[i] >= t[i - 1];
        }
        if (keep) {
            r.compositions.push_back(t);
        }
        int i = frames - 1;
        while (i >= 0 && t[static_cast<std::size_t>(i)] == timesteps) {
            t[static_cast<std::size_t>(i)] = 1;
            --i;
        }
        if (i < 0) {
            break;
        }
        ++t[static_cast<std::size_t>(i)];
    }
    r.count = r.compositions.size();
    return r;
}

std::vector<int> equal_sample(int frames, int timesteps, Rng& rng) {
    return std::vector<int>(static_cast<std::size_t>(frames), uniform_int(rng, 1, timesteps));
}

std::vector<int> independent_sample(int frames, int timesteps, Rng& rng) {
    std::vector<int> t(static_cast<std::size_t>(frames));
    for (int& v : t) {
        v = uniform_int(rng, 1, timesteps);
    }
    return t;
}

double chi_square_critical_999(int dof) {
    if (dof < 1 || dof > 200) {
        throw std::out_of_range("chi_square_critical_999: dof outside the table (1..200)");
    }
    return kChiSquare999[dof - 1];
}

ChiSquareResult chi_square_uniformity(std::span<const std::int64_t> observed, std::span<const double> expected) {
    if (observed.size() != expected.size() || observed.empty()) {
        throw std::invalid_argument("chi_square: observed and expected must be non-empty and equally long");
    }
    double total_p = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (observed[i] < 0 || expected[i] < 0.0) {
            throw std::invalid_argument("chi_square: negative count or probability");
        }
        total_p += expected[i];
        n += observed[i];
    }
    if (std::abs(total_p - 1.0) > 1e-9) {
        throw std::invalid_argument("chi_square: expected probabilities do not sum to 1");
    }
    ChiSquareResult r;
    r.dof = static_cast<int>(observed.size()) - 1;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = expected[i] * static_cast<double>(n);
        if (e < 5.0) {
            throw std::invalid_argument("chi_square: cell " + std::to_string(i) +
                                        " expects fewer than 5 observations");
        }
        const double diff = static_cast<double>(observed[i]) - e;
        r.statistic += diff * diff / e;
    }
    if (r.dof == 0) {
        return r;
    }
    r.critical = chi_square_critical_999(r.dof);
    r.reject = r.statistic > r.critical;
    return r;
}

std::vector<double> finite_diff_grads(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> x, double step) {
    if (!(step > 0.0)) {
        throw std::invalid_argument("finite_diff_grads: step must be positive");
    }
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + step;
        const double up = f(probe);
        probe[i] = orig - step;
        const double down = f(probe);
        probe[i] = orig;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

DenoiserGrads finite_diff_grads(const DenoiserParams& params, const DenoiserConfig& config,
                                std::span<const TrainingSample> batch, const NoiseSchedule& sched, double step) {
    DenoiserParams probe = params;
    auto loss = [&](std::span<const double> x) {
        std::copy(x.begin(), x.end(), probe.values().begin());
        return loss_only(probe, config, batch, sched);
    };
    const std::vector<double> g = finite_diff_grads(loss, params.values(), step);
    DenoiserGrads out = DenoiserGrads::zeros(config);
    std::copy(g.begin(), g.end(), out.values().begin());
    return out;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("relative_error: length mismatch");
    }
    double diff = 0.0;
    double scale = floor;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / scale;
}

void Report::check_at_most(std::string name, double statistic, double threshold) {
    entries_.push_back(ReportEntry{std::move(name), statistic, threshold, statistic <= threshold});
}

void Report::check_at_least(std::string name, double statistic, double threshold) {
    entries_.push_back(ReportEntry{std::move(name), statistic, threshold, statistic >= threshold});
}

void Report::check(std::string name, bool ok, double statistic, double threshold) {
    entries_.push_back(ReportEntry{std::move(name), statistic, threshold, ok});
}

bool Report::all_passed() const { return failures() == 0; }

std::size_t Report::failures() const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [](const ReportEntry& e) { return !e.passed; }));
}

void Report::write(std::ostream& os) const {
    char buf[64];
    for (const ReportEntry& e : entries_) {
        os << e.name << '\t';
        std::snprintf(buf, sizeof buf, "%.6g", e.statistic);
        os << buf << '\t';
        std::snprintf(buf, sizeof buf, "%.6g", e.threshold);
        os << buf << '\t' << (e.passed ? "PASS" : "FAIL") << '\n';
    }
}

void Report::append(const Report& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

}  // namespace ardiff::verify
