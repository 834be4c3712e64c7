#pragma once

#include <array>
#include <string_view>

#include "grpoctrl/codec.hpp"
#include "grpoctrl/cost.hpp"
#include "grpoctrl/dynamics.hpp"

namespace grpoctrl {

enum class SchedulePhase { kEarly, kMid, kLate };

std::string_view to_string(SchedulePhase phase);

/// Multipliers for {lqr, terminal, constraint, format, auxiliary}.
struct RewardWeights {
  double lqr = 1.0;
  double terminal = 1.0;
  double constraint = 1.0;
  double format = 1.0;
  double auxiliary = 0.5;
  SchedulePhase phase = SchedulePhase::kMid;
};

/// Curriculum: Early for steps [0, 200), Mid for [200, 400), Late afterwards.
RewardWeights schedule_weights(int step);

/// Shaping constants. None of these are published values; they are
/// calibrated so double-integrator expert rollouts score roughly 10-12 under
/// the late-phase weights.
struct RewardConfig {
  CostWeights cost;                 // empty matrices mean CostWeights::defaults
  double terminal_sigma = 0.1;
  double terminal_scale = 5.0;
  std::array<double, 3> bonus_thresholds{0.1, 0.05, 0.01};
  std::array<double, 3> bonus_values{1.0, 1.0, 1.0};
  double violation_penalty = 1.0;
  double validity_bonus = 1.0;
  double format_bonus = 1.0;
  double clip_penalty = 0.1;        // per clipped scalar
  double length_error_penalty = -1.0;
  double numeric_error_penalty = -1.5;
  double format_error_penalty = -2.0;
  double divergence_penalty = 10.0; // constraint component when simulation blows up
  double near_target_radius = 0.1;
  double convergence_bonus = 1.0;
};

struct RewardBreakdown {
  double lqr = 0.0;
  double terminal = 0.0;
  double constraint = 0.0;
  double format = 0.0;
  double auxiliary = 0.0;
  double total = 0.0;
  RewardWeights weights;

  /// sum_i w_i * component_i
  double recompute_total() const;
};

struct Metrics {
  double final_error = 0.0;
  double cost = 0.0;
  double effort = 0.0;
  double violation_rate = 0.0;
  double convergence_quality = 0.0;
};

/// Fraction of consecutive state pairs whose distance to target does not grow.
double convergence_quality(const Trajectory& traj);

Metrics compute_metrics(const Trajectory& traj, const CostWeights& weights);
Metrics compute_metrics(const Trajectory& traj);

/// `traj` must be non-null iff outcome.ok(). Pass `diverged = true` when an Ok
/// parse could not be simulated (blowup); that yields a constraint penalty.
RewardBreakdown compute_reward(const ParseOutcome& outcome, const Trajectory* traj,
                               const RewardWeights& weights, const RewardConfig& config = {},
                               bool diverged = false);

RewardBreakdown compute_reward(const ParseOutcome& outcome, const Trajectory* traj, int step,
                               const RewardConfig& config = {});

/// Format component only (used both for scoring and for gating checks).
double format_component(const ParseOutcome& outcome, const RewardConfig& config);

}  // namespace grpoctrl
