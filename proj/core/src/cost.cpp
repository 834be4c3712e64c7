#include "grpoctrl/cost.hpp"

#include "grpoctrl/dynamics.hpp"
#include "grpoctrl/errors.hpp"

namespace grpoctrl {
namespace {

bool is_psd(const Mat& m, bool strict) {
  if (m.rows() != m.cols()) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::SelfAdjointEigenSolver<Mat> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  return strict ? lo > 0.0 : lo >= -1e-12;
}

}  // namespace

CostWeights CostWeights::defaults(int state_dim, int control_dim) {
  CostWeights w;
  w.Q = Mat::Identity(state_dim, state_dim);
  w.R = 0.1 * Mat::Identity(control_dim, control_dim);
  w.Qf = 10.0 * Mat::Identity(state_dim, state_dim);
  return w;
}

void CostWeights::validate() const {
  if (!is_psd(Q, false)) throw Error(ErrorCode::kInvalidArgument, "Q must be symmetric PSD");
  if (!is_psd(Qf, false)) throw Error(ErrorCode::kInvalidArgument, "Qf must be symmetric PSD");
  if (!is_psd(R, true)) throw Error(ErrorCode::kInvalidArgument, "R must be symmetric PD");
  if (Q.rows() != Qf.rows()) throw Error(ErrorCode::kDimensionMismatch, "Q/Qf size mismatch");
}

double weighted_norm_sq(const Vec& x, const Mat& w) { return x.dot(w * x); }

void assign_costs(Trajectory& traj, const CostWeights& weights) {
  const int n = traj.num_steps();
  traj.step_costs.resize(n);
  for (int t = 0; t < n; ++t) {
    traj.step_costs[t] = weighted_norm_sq(traj.states[t] - traj.target, weights.Q) +
                         weighted_norm_sq(traj.controls[t], weights.R);
  }
  traj.terminal_cost = weighted_norm_sq(traj.states[n] - traj.target, weights.Qf);
}

double trajectory_cost(const Trajectory& traj, const CostWeights& weights) {
  const int n = traj.num_steps();
  double j = weighted_norm_sq(traj.states[n] - traj.target, weights.Qf);
  for (int t = 0; t < n; ++t) {
    j += weighted_norm_sq(traj.states[t] - traj.target, weights.Q) +
         weighted_norm_sq(traj.controls[t], weights.R);
  }
  return j;
}

}  // namespace grpoctrl
