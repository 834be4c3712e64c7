#pragma once

#include "grpoctrl/system.hpp"

namespace grpoctrl {

struct Trajectory;

/// Quadratic cost weights. Q and Qf are symmetric PSD, R symmetric PD.
struct CostWeights {
  Mat Q;
  Mat R;
  Mat Qf;

  /// Q = I, R = 0.1 I, Qf = 10 I.
  static CostWeights defaults(int state_dim, int control_dim);
  static CostWeights defaults(const SystemSpec& spec) {
    return defaults(spec.state_dim, spec.control_dim);
  }

  void validate() const;
};

/// ||x||^2_W
double weighted_norm_sq(const Vec& x, const Mat& w);

/// J = ||s_T - s*||^2_Qf + sum_t (||s_t - s*||^2_Q + ||a_t||^2_R), deviations
/// measured from the trajectory's target state.
double trajectory_cost(const Trajectory& traj, const CostWeights& weights);

/// Refills traj.step_costs / traj.terminal_cost from the given weights.
void assign_costs(Trajectory& traj, const CostWeights& weights);

}  // namespace grpoctrl
