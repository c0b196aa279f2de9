#pragma once

// Inference-time trajectories: the sequence of per-frame grid levels visited
// while a video goes from pure noise (level N everywhere) to clean (level 0
// everywhere), parameterized by the inter-frame level difference s.

#include <iosfwd>
#include <string>
#include <vector>

#include "ardiff/lattice.hpp"

namespace ardiff {

struct TrajectoryStep {
    TimestepComposition composition;  // grid levels after this step
    std::vector<bool> update_mask;    // frames whose level changed in this step

    friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct TrajectoryPlan {
    int frames = 0;
    int grid_steps = 0;  // N
    int difference = 0;  // s, in grid units
    TimestepComposition initial;  // all frames at level N
    std::vector<TrajectoryStep> steps;

    /// Level of `frame` before step `k` runs (the levels the denoiser sees).
    const TimestepComposition& before(std::size_t k) const { return k == 0 ? initial : steps[k - 1].composition; }

    std::size_t size() const { return steps.size(); }
};

/// Builds the plan for (F, N, s). Each step updates frames in order:
///   frame 1 drops one level while above 0;
///   frame i > 1 follows min(t_{i-1} + s, N) using frame i-1's updated level,
///   as long as frame i-1 had not already reached 0 before this step;
///   otherwise it drops one level on its own.
/// The plan has N + (F-1) * min(s, N) steps.
TrajectoryPlan plan_trajectory(int frames, int grid_steps, int difference);

/// Closed-form plan length.
long long plan_length(int frames, int grid_steps, int difference);

/// Synchronous baseline: every frame drops one level per step.
TrajectoryPlan synchronous_plan(int frames, int grid_steps);

/// Frame-by-frame auto-regressive baseline: frame i only starts once frame
/// i-1 is clean.
TrajectoryPlan autoregressive_plan(int frames, int grid_steps);

/// Evenly spaced map from grid level 0..N onto diffusion timesteps 0..T.
int grid_to_timestep(int grid_index, int grid_steps, int timesteps);
std::vector<int> grid_map(int grid_steps, int timesteps);

/// Line-delimited JSON. The first line is a header
///   {"frames":F,"grid_steps":N,"s":s,"steps":K}
/// followed by one record per state, starting with the initial one:
///   {"step":k,"composition":[...],"mask":[...]}
/// Record 0 is the initial composition with an all-false mask.
void write_plan_jsonl(std::ostream& os, const TrajectoryPlan& plan);
TrajectoryPlan read_plan_jsonl(std::istream& is);

}  // namespace ardiff
