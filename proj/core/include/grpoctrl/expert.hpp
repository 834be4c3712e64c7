#pragma once

#include <cstdint>
#include <vector>

#include "grpoctrl/cost.hpp"
#include "grpoctrl/dynamics.hpp"

namespace grpoctrl {

struct LqrSolution {
  std::vector<Control> controls;
  std::vector<Mat> gains;  // K_t, u_t = -K_t s_t before clipping
  int clip_count = 0;
};

/// Finite-horizon discrete LQR on the exactly discretized double integrator
/// (A = [[1, h], [0, 1]], B = [h^2/2, h]). Controls are rolled forward through
/// the same discrete model and clipped to the actuator bounds.
LqrSolution solve_lqr(const SystemSpec& spec, const State& s0, const CostWeights& weights);

struct ShootingOptions {
  int restarts = 8;
  int max_iterations = 500;
  double fd_step = 1e-6;
  double gradient_tolerance = 1e-7;
  // The objective is differentiated by finite differences, so the integrator
  // runs much tighter than the rollout defaults.
  Rk45Options integrator{1e-10, 1e-12, 1e6};
  std::uint64_t seed = 0;
};

struct ShootingResult {
  std::vector<Control> controls;
  double objective = 0.0;
  double baseline = 0.0;       // objective of the all-zero (fallback) sequence
  std::vector<double> history; // best-so-far objective after every iterate
  int iterations = 0;
  bool converged = false;
};

/// Direct single shooting over the flattened control sequence: projected
/// BFGS with finite-difference gradients and multi-start. Throws
/// Error(kSolverFailed) when no restart beats the zero-control baseline and
/// every restart hits the iteration cap.
ShootingResult solve_shooting(const SystemSpec& spec, const State& s0,
                              const CostWeights& weights, const ShootingOptions& options = {});

/// Weights the expert solvers use for a system. Detumbling gets Qf = 1000 I:
/// with Qf = 10 I its optimum leaves ~0.2 rad/s of residual rate.
CostWeights expert_weights(const SystemSpec& spec);

}  // namespace grpoctrl
