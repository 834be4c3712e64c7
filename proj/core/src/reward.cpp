#include "grpoctrl/reward.hpp"

#include <cmath>

#include "grpoctrl/errors.hpp"

namespace grpoctrl {
namespace {

const CostWeights& resolve(const RewardConfig& config, const Trajectory& traj,
                           CostWeights& storage) {
  if (config.cost.Q.size() > 0) return config.cost;
  storage = CostWeights::defaults(static_cast<int>(traj.target.size()),
                                  static_cast<int>(traj.controls.front().size()));
  return storage;
}

double terminal_component(double final_error, const RewardConfig& config) {
  double value = config.terminal_scale * std::exp(-final_error / config.terminal_sigma);
  for (std::size_t i = 0; i < config.bonus_thresholds.size(); ++i)
    if (final_error < config.bonus_thresholds[i]) value += config.bonus_values[i];
  return value;
}

double auxiliary_component(const Trajectory& traj, const RewardConfig& config) {
  // control persistence: mean ||a_t||^2 over the steps that start near target
  double effort = 0.0;
  int near = 0;
  for (int t = 0; t < traj.num_steps(); ++t) {
    if ((traj.states[t] - traj.target).norm() < config.near_target_radius) {
      effort += traj.controls[t].squaredNorm();
      ++near;
    }
  }
  const double persistence = near > 0 ? effort / near : 0.0;
  return -persistence + config.convergence_bonus * convergence_quality(traj);
}

}  // namespace

std::string_view to_string(SchedulePhase phase) {
  switch (phase) {
    case SchedulePhase::kEarly: return "early";
    case SchedulePhase::kMid: return "mid";
    case SchedulePhase::kLate: return "late";
  }
  return "unknown";
}

RewardWeights schedule_weights(int step) {
  if (step < 0) throw Error(ErrorCode::kInvalidArgument, "step must be >= 0");
  if (step < 200) return {0.5, 0.5, 1.0, 2.0, 0.25, SchedulePhase::kEarly};
  if (step < 400) return {1.0, 1.0, 1.0, 1.0, 0.5, SchedulePhase::kMid};
  return {2.0, 2.0, 1.0, 0.25, 0.5, SchedulePhase::kLate};
}

double RewardBreakdown::recompute_total() const {
  return weights.lqr * lqr + weights.terminal * terminal + weights.constraint * constraint +
         weights.format * format + weights.auxiliary * auxiliary;
}

double convergence_quality(const Trajectory& traj) {
  const int n = static_cast<int>(traj.states.size());
  if (n < 2) return 1.0;
  int good = 0;
  double prev = (traj.states[0] - traj.target).norm();
  for (int t = 1; t < n; ++t) {
    const double cur = (traj.states[t] - traj.target).norm();
    if (cur <= prev) ++good;
    prev = cur;
  }
  return static_cast<double>(good) / (n - 1);
}

Metrics compute_metrics(const Trajectory& traj, const CostWeights& weights) {
  Metrics m;
  m.final_error = (traj.states.back() - traj.target).norm();
  m.cost = trajectory_cost(traj, weights);
  for (const auto& a : traj.controls) m.effort += a.squaredNorm();
  std::vector<bool> flagged(traj.states.size(), false);
  for (const auto& v : traj.violations)
    if (v.step >= 0 && v.step < static_cast<int>(flagged.size())) flagged[v.step] = true;
  int count = 0;
  for (bool f : flagged) count += f ? 1 : 0;
  m.violation_rate = flagged.empty() ? 0.0 : static_cast<double>(count) / flagged.size();
  m.convergence_quality = convergence_quality(traj);
  return m;
}

Metrics compute_metrics(const Trajectory& traj) {
  return compute_metrics(traj, CostWeights::defaults(static_cast<int>(traj.target.size()),
                                                     static_cast<int>(traj.controls.front().size())));
}

double format_component(const ParseOutcome& outcome, const RewardConfig& config) {
  switch (outcome.status) {
    case ParseStatus::kOk:
      return config.format_bonus - config.clip_penalty * outcome.clip_events;
    case ParseStatus::kLengthError: return config.length_error_penalty;
    case ParseStatus::kNumericError: return config.numeric_error_penalty;
    case ParseStatus::kFormatError: return config.format_error_penalty;
  }
  return config.format_error_penalty;
}

RewardBreakdown compute_reward(const ParseOutcome& outcome, const Trajectory* traj,
                               const RewardWeights& weights, const RewardConfig& config,
                               bool diverged) {
  RewardBreakdown r;
  r.weights = weights;
  r.format = format_component(outcome, config);
  if (!outcome.ok()) {
    r.total = r.recompute_total();
    return r;
  }
  if (diverged || traj == nullptr) {
    r.constraint = -config.divergence_penalty;
    r.total = r.recompute_total();
    return r;
  }
  CostWeights storage;
  const CostWeights& cost = resolve(config, *traj, storage);
  r.lqr = -trajectory_cost(*traj, cost);
  r.terminal = terminal_component((traj->states.back() - traj->target).norm(), config);
  const int violations = static_cast<int>(traj->violations.size());
  r.constraint = -config.violation_penalty * violations +
                 (violations == 0 ? config.validity_bonus : 0.0);
  r.auxiliary = auxiliary_component(*traj, config);
  r.total = r.recompute_total();
  return r;
}

RewardBreakdown compute_reward(const ParseOutcome& outcome, const Trajectory* traj, int step,
                               const RewardConfig& config) {
  return compute_reward(outcome, traj, schedule_weights(step), config);
}

}  // namespace grpoctrl
