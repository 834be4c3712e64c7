#include "grpoctrl/expert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "grpoctrl/errors.hpp"

namespace grpoctrl {
namespace {

constexpr double kFailedObjective = 1e12;

std::vector<Control> unflatten(const Vec& x, int steps, int dim) {
  std::vector<Control> out;
  out.reserve(steps);
  for (int k = 0; k < steps; ++k) out.emplace_back(x.segment(k * dim, dim));
  return out;
}

class ShootingProblem {
 public:
  ShootingProblem(const SystemSpec& spec, const State& s0, const CostWeights& weights,
                  const ShootingOptions& options)
      : spec_(spec), s0_(s0), weights_(weights), options_(options) {
    const int n = spec.num_steps * spec.control_dim;
    lower_.resize(n);
    upper_.resize(n);
    for (int k = 0; k < spec.num_steps; ++k) {
      lower_.segment(k * spec.control_dim, spec.control_dim) = spec.control_lower;
      upper_.segment(k * spec.control_dim, spec.control_dim) = spec.control_upper;
    }
  }

  int size() const { return static_cast<int>(lower_.size()); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

  Vec project(const Vec& x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

  double objective(const Vec& x) const {
    const auto controls = unflatten(x, spec_.num_steps, spec_.control_dim);
    try {
      const Trajectory traj = integrate_rk45(spec_, s0_, controls, options_.integrator);
      return trajectory_cost(traj, weights_);
    } catch (const Error&) {
      return kFailedObjective;
    }
  }

  // Forward differences, stepping inward at the upper bound.
  Vec gradient(const Vec& x, double fx) const {
    Vec g(size());
    Vec probe = x;
    for (int i = 0; i < size(); ++i) {
      double h = options_.fd_step * (1.0 + std::abs(x[i]));
      if (x[i] + h > upper_[i]) h = -h;
      probe[i] = x[i] + h;
      g[i] = (objective(probe) - fx) / h;
      probe[i] = x[i];
    }
    return g;
  }

  Vec projected_gradient(const Vec& x, const Vec& g) const {
    Vec pg = g;
    for (int i = 0; i < size(); ++i) {
      const double tol = 1e-12 * (upper_[i] - lower_[i]);
      if ((x[i] <= lower_[i] + tol && g[i] > 0.0) || (x[i] >= upper_[i] - tol && g[i] < 0.0))
        pg[i] = 0.0;
    }
    return pg;
  }

 private:
  const SystemSpec& spec_;
  const State& s0_;
  const CostWeights& weights_;
  const ShootingOptions& options_;
  Vec lower_;
  Vec upper_;
};

struct RunResult {
  Vec x;
  double f = 0.0;
  int iterations = 0;
  bool hit_cap = false;
};

// Projected BFGS with Armijo backtracking along the projection arc.
RunResult minimize(const ShootingProblem& problem, Vec x, const ShootingOptions& options,
                   std::vector<double>& history, double& best) {
  const int n = problem.size();
  x = problem.project(x);
  double f = problem.objective(x);
  Vec g = problem.gradient(x, f);
  Mat h_inv = Mat::Identity(n, n);
  bool scaled = false;
  const double span = (problem.upper() - problem.lower()).maxCoeff();
  int stall = 0;

  RunResult out;
  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    const Vec pg = problem.projected_gradient(x, g);
    const double pg_norm = pg.lpNorm<Eigen::Infinity>();
    if (pg_norm <= options.gradient_tolerance * (1.0 + std::abs(f))) break;

    Vec d = -(h_inv * pg);
    for (int i = 0; i < n; ++i)
      if (pg[i] == 0.0) d[i] = 0.0;
    if (d.dot(pg) >= 0.0) {
      h_inv.setIdentity();
      scaled = false;
      d = -pg;
    }
    if (!scaled) {
      // first step moves at most a quarter of the control range
      const double dmax = d.lpNorm<Eigen::Infinity>();
      if (dmax > 0.25 * span) d *= 0.25 * span / dmax;
    }

    double alpha = 1.0;
    Vec x_new = x;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = problem.project(x + alpha * d);
      f_new = problem.objective(x_new);
      if (f_new <= f + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || (x_new - x).lpNorm<Eigen::Infinity>() == 0.0) break;

    const Vec g_new = problem.gradient(x_new, f_new);
    const Vec s = x_new - x;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv = Mat::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Mat left = Mat::Identity(n, n) - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }
    const double decrease = f - f_new;
    x = x_new;
    f = f_new;
    g = g_new;
    best = std::min(best, f);
    history.push_back(best);

    stall = decrease <= 1e-13 * (1.0 + std::abs(f)) ? stall + 1 : 0;
    if (stall >= 3) break;
    if (it + 1 == options.max_iterations) out.hit_cap = true;
  }
  out.x = std::move(x);
  out.f = f;
  return out;
}

}  // namespace

LqrSolution solve_lqr(const SystemSpec& spec, const State& s0, const CostWeights& weights) {
  if (spec.kind != SystemKind::kDoubleIntegrator)
    throw Error(ErrorCode::kInvalidArgument, "solve_lqr applies to the double integrator only");
  if (s0.size() != spec.state_dim)
    throw Error(ErrorCode::kDimensionMismatch, "initial state dimension mismatch");
  const double h = spec.step_duration();
  Mat a(2, 2);
  a << 1.0, h, 0.0, 1.0;
  Mat b(2, 1);
  b << 0.5 * h * h, h;

  const int n = spec.num_steps;
  LqrSolution sol;
  sol.gains.resize(n);
  Mat p = weights.Qf;
  for (int t = n - 1; t >= 0; --t) {
    const Mat bt_p = b.transpose() * p;
    const Mat k = (weights.R + bt_p * b).ldlt().solve(bt_p * a);
    sol.gains[t] = k;
    p = weights.Q + a.transpose() * p * (a - b * k);
    p = 0.5 * (p + p.transpose());
  }
  State s = s0;
  sol.controls.reserve(n);
  for (int t = 0; t < n; ++t) {
    Control u = -(sol.gains[t] * s);
    const Control clipped = clip_to_bounds(u, spec.control_lower, spec.control_upper);
    if (!clipped.isApprox(u, 0.0)) ++sol.clip_count;
    s = a * s + b * clipped;
    sol.controls.push_back(clipped);
  }
  return sol;
}

ShootingResult solve_shooting(const SystemSpec& spec, const State& s0,
                              const CostWeights& weights, const ShootingOptions& options) {
  if (options.restarts < 1 || options.max_iterations < 1)
    throw Error(ErrorCode::kInvalidArgument, "restarts and max_iterations must be >= 1");
  ShootingProblem problem(spec, s0, weights, options);
  const int n = problem.size();

  ShootingResult result;
  const Vec zero = problem.project(Vec::Zero(n));
  result.baseline = problem.objective(zero);
  double best = result.baseline;
  Vec best_x = zero;

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Vec center = 0.5 * (problem.lower() + problem.upper());
  const Vec half = 0.5 * (problem.upper() - problem.lower());

  bool all_capped = true;
  double best_f = result.baseline;
  for (int r = 0; r < options.restarts; ++r) {
    Vec start = zero;
    if (r > 0) {
      for (int i = 0; i < n; ++i) start[i] = center[i] + 0.5 * half[i] * unit(rng);
    }
    const RunResult run = minimize(problem, start, options, result.history, best);
    result.iterations += run.iterations;
    if (!run.hit_cap) all_capped = false;
    if (run.f < best_f) {
      best_f = run.f;
      best_x = run.x;
    }
  }
  result.objective = best_f;
  result.converged = !all_capped;
  if (all_capped && !(best_f < result.baseline) && result.baseline > 1e-12) {
    throw Error(ErrorCode::kSolverFailed,
                "all restarts hit the iteration cap without beating the zero-control baseline");
  }
  result.controls = unflatten(best_x, spec.num_steps, spec.control_dim);
  return result;
}

CostWeights expert_weights(const SystemSpec& spec) {
  CostWeights w = CostWeights::defaults(spec);
  if (spec.kind == SystemKind::kDetumbling) w.Qf = 1000.0 * Mat::Identity(3, 3);
  return w;
}

}  // namespace grpoctrl
