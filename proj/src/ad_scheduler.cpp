#include "ardiff/ad_scheduler.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace ardiff {

namespace {

void require_plan_args(int frames, int grid_steps, int difference) {
    if (frames < 1 || grid_steps < 1) {
        throw std::invalid_argument("plan: frames and grid steps must be >= 1");
    }
    if (difference < 0) {
        throw std::invalid_argument("plan: timestep difference s must be >= 0");
    }
}

TrajectoryStep make_step(const std::vector<int>& prev, std::vector<int> next, int grid_steps) {
    std::vector<bool> mask(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) {
        mask[i] = prev[i] != next[i];
    }
    return TrajectoryStep{TimestepComposition(std::move(next), grid_steps), std::move(mask)};
}

TrajectoryPlan empty_plan(int frames, int grid_steps, int difference) {
    return TrajectoryPlan{frames, grid_steps, difference,
                          TimestepComposition(std::vector<int>(static_cast<std::size_t>(frames), grid_steps),
                                              grid_steps),
                          {}};
}

}  // namespace

long long plan_length(int frames, int grid_steps, int difference) {
    require_plan_args(frames, grid_steps, difference);
    return grid_steps + static_cast<long long>(frames - 1) * std::min(difference, grid_steps);
}

TrajectoryPlan plan_trajectory(int frames, int grid_steps, int difference) {
    require_plan_args(frames, grid_steps, difference);
    TrajectoryPlan plan = empty_plan(frames, grid_steps, difference);
    plan.steps.reserve(static_cast<std::size_t>(plan_length(frames, grid_steps, difference)));

    std::vector<int> cur(static_cast<std::size_t>(frames), grid_steps);
    while (std::any_of(cur.begin(), cur.end(), [](int v) { return v > 0; })) {
        std::vector<int> next(cur.size());
        for (std::size_t i = 0; i < cur.size(); ++i) {
            if (i == 0 || cur[i - 1] == 0) {
                next[i] = std::max(cur[i] - 1, 0);
            } else {
                next[i] = std::min(next[i - 1] + difference, grid_steps);
            }
        }
        plan.steps.push_back(make_step(cur, next, grid_steps));
        cur = std::move(next);
    }
    return plan;
}

TrajectoryPlan synchronous_plan(int frames, int grid_steps) {
    require_plan_args(frames, grid_steps, 0);
    TrajectoryPlan plan = empty_plan(frames, grid_steps, 0);
    std::vector<int> cur(static_cast<std::size_t>(frames), grid_steps);
    for (int level = grid_steps - 1; level >= 0; --level) {
        std::vector<int> next(cur.size(), level);
        plan.steps.push_back(make_step(cur, next, grid_steps));
        cur = std::move(next);
    }
    return plan;
}

TrajectoryPlan autoregressive_plan(int frames, int grid_steps) {
    require_plan_args(frames, grid_steps, 0);
    TrajectoryPlan plan = empty_plan(frames, grid_steps, grid_steps);
    std::vector<int> cur(static_cast<std::size_t>(frames), grid_steps);
    for (std::size_t f = 0; f < cur.size(); ++f) {
        for (int level = grid_steps - 1; level >= 0; --level) {
            std::vector<int> next = cur;
            next[f] = level;
            plan.steps.push_back(make_step(cur, next, grid_steps));
            cur = std::move(next);
        }
    }
    return plan;
}

int grid_to_timestep(int grid_index, int grid_steps, int timesteps) {
    if (grid_steps < 1 || grid_steps > timesteps) {
        throw std::invalid_argument("grid_to_timestep: require 1 <= N <= T");
    }
    if (grid_index < 0 || grid_index > grid_steps) {
        throw std::out_of_range("grid_to_timestep: grid index outside [0, N]");
    }
    // round(g * T / N), halves rounded up
    const long long num = static_cast<long long>(grid_index) * timesteps;
    return static_cast<int>((2 * num + grid_steps) / (2LL * grid_steps));
}

std::vector<int> grid_map(int grid_steps, int timesteps) {
    std::vector<int> map(static_cast<std::size_t>(grid_steps) + 1);
    for (int g = 0; g <= grid_steps; ++g) {
        map[static_cast<std::size_t>(g)] = grid_to_timestep(g, grid_steps, timesteps);
    }
    return map;
}

void write_plan_jsonl(std::ostream& os, const TrajectoryPlan& plan) {
    using nlohmann::json;
    os << json{{"frames", plan.frames}, {"grid_steps", plan.grid_steps}, {"s", plan.difference},
               {"steps", plan.steps.size()}}
              .dump()
       << '\n';
    auto record = [&os](std::size_t k, const TimestepComposition& c, const std::vector<bool>& mask) {
        json j;
        j["step"] = k;
        j["composition"] = std::vector<int>(c.values().begin(), c.values().end());
        j["mask"] = mask;
        os << j.dump() << '\n';
    };
    record(0, plan.initial, std::vector<bool>(static_cast<std::size_t>(plan.frames), false));
    for (std::size_t k = 0; k < plan.steps.size(); ++k) {
        record(k + 1, plan.steps[k].composition, plan.steps[k].update_mask);
    }
}

TrajectoryPlan read_plan_jsonl(std::istream& is) {
    using nlohmann::json;
    std::string line;
    if (!std::getline(is, line)) {
        throw std::runtime_error("plan file: missing header");
    }
    const json header = json::parse(line);
    const int frames = header.at("frames").get<int>();
    const int grid_steps = header.at("grid_steps").get<int>();
    const auto count = header.at("steps").get<std::size_t>();
    TrajectoryPlan plan = empty_plan(frames, grid_steps, header.at("s").get<int>());
    for (std::size_t k = 0; k <= count; ++k) {
        if (!std::getline(is, line)) {
            throw std::runtime_error("plan file: truncated at record " + std::to_string(k));
        }
        const json j = json::parse(line);
        if (j.at("step").get<std::size_t>() != k) {
            throw std::runtime_error("plan file: records out of order at " + std::to_string(k));
        }
        TimestepComposition c(j.at("composition").get<std::vector<int>>(), grid_steps);
        auto mask = j.at("mask").get<std::vector<bool>>();
        if (c.frames() != frames || mask.size() != static_cast<std::size_t>(frames)) {
            throw std::runtime_error("plan file: record " + std::to_string(k) + " has the wrong frame count");
        }
        if (k == 0) {
            plan.initial = std::move(c);
        } else {
            plan.steps.push_back(TrajectoryStep{std::move(c), std::move(mask)});
        }
    }
    return plan;
}

}  // namespace ardiff
