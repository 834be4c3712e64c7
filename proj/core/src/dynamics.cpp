#include "grpoctrl/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "grpoctrl/errors.hpp"

namespace grpoctrl {
namespace {

constexpr int kMaxDim = 3;
using Buf = std::array<double, kMaxDim>;

void check_dims(const SystemSpec& spec, const State& s, const Control& c) {
  if (s.size() != spec.state_dim || c.size() != spec.control_dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected state/control dims " + std::to_string(spec.state_dim) + "/" +
                    std::to_string(spec.control_dim) + ", got " + std::to_string(s.size()) +
                    "/" + std::to_string(c.size()));
  }
}

// Allocation-free right-hand side; the integrators call this in their inner loops.
void rhs(const SystemSpec& spec, double t, const double* s, const double* c, double* out) {
  const ParamSet& p = spec.params;
  switch (spec.kind) {
    case SystemKind::kDoubleIntegrator:
      out[0] = s[1];
      out[1] = c[0];
      return;
    case SystemKind::kVanDerPol:
      out[0] = s[1];
      out[1] = p.mu_vdp * (1.0 - s[0] * s[0]) * s[1] - s[0] + c[0];
      return;
    case SystemKind::kOrbitRaising: {
      const double r = s[0], u = s[1], v = s[2];
      if (!(r > 0.0)) throw Error(ErrorCode::kNonPositiveRadius, "orbit radius must be positive");
      const double m = p.m0 + p.m1 * t;
      if (!(m > 0.0)) throw Error(ErrorCode::kNonPositiveMass, "spacecraft mass must be positive");
      const double accel = p.thrust / m;
      out[0] = u;
      out[1] = v * v / r - p.mu_grav / (r * r) + accel * std::sin(c[0]);
      out[2] = -u * v / r + accel * std::cos(c[0]);
      return;
    }
    case SystemKind::kDetumbling: {
      const auto& j = p.inertia_diag;
      // J w_dot = -w x (J w) + u, J diagonal
      out[0] = ((j[1] - j[2]) * s[1] * s[2] + c[0]) / j[0];
      out[1] = ((j[2] - j[0]) * s[2] * s[0] + c[1]) / j[1];
      out[2] = ((j[0] - j[1]) * s[0] * s[1] + c[2]) / j[2];
      return;
    }
  }
}

Trajectory start_trajectory(const SystemSpec& spec, const State& s0,
                            std::span<const Control> controls) {
  if (static_cast<int>(controls.size()) != spec.num_steps) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(spec.num_steps) + " controls, got " +
                    std::to_string(controls.size()));
  }
  if (s0.size() != spec.state_dim)
    throw Error(ErrorCode::kDimensionMismatch, "initial state dimension mismatch");
  if (!s0.allFinite()) throw Error(ErrorCode::kInvalidArgument, "initial state must be finite");
  for (const auto& c : controls) {
    if (c.size() != spec.control_dim)
      throw Error(ErrorCode::kDimensionMismatch, "control dimension mismatch");
    if (!c.allFinite()) throw Error(ErrorCode::kInvalidArgument, "controls must be finite");
  }
  Trajectory traj;
  traj.target = target_state(spec);
  traj.times.reserve(spec.num_steps + 1);
  traj.states.reserve(spec.num_steps + 1);
  traj.controls.reserve(spec.num_steps);
  traj.times.push_back(0.0);
  traj.states.push_back(s0);
  return traj;
}

void record_state_violation(const SystemSpec& spec, Trajectory& traj, int index) {
  const State& s = traj.states[index];
  double margin = 0.0;
  for (int i = 0; i < spec.state_dim; ++i) {
    margin = std::max(margin, spec.state_lower[i] - s[i]);
    margin = std::max(margin, s[i] - spec.state_upper[i]);
  }
  if (margin > 0.0) traj.violations.push_back({index, ViolationKind::kStateBound, margin});
}

Control apply_control_bounds(const SystemSpec& spec, Trajectory& traj, int step,
                             const Control& c) {
  double margin = 0.0;
  for (int i = 0; i < spec.control_dim; ++i) {
    margin = std::max(margin, spec.control_lower[i] - c[i]);
    margin = std::max(margin, c[i] - spec.control_upper[i]);
  }
  if (margin > 0.0) traj.violations.push_back({step, ViolationKind::kControlBound, margin});
  return clip_to_bounds(c, spec.control_lower, spec.control_upper);
}

void check_blowup(const double* s, int n, double ceiling, double t) {
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(s[i]) || std::abs(s[i]) > ceiling) {
      throw Error(ErrorCode::kNumericalBlowup,
                  "state magnitude exceeded " + std::to_string(ceiling) + " at t=" +
                      std::to_string(t));
    }
  }
}

void finish(const SystemSpec& spec, Trajectory& traj) {
  std::stable_sort(traj.violations.begin(), traj.violations.end(),
                   [](const Violation& a, const Violation& b) { return a.step < b.step; });
  assign_costs(traj, CostWeights::defaults(spec));
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

int Trajectory::count(ViolationKind kind) const {
  return static_cast<int>(std::count_if(violations.begin(), violations.end(),
                                        [kind](const Violation& v) { return v.kind == kind; }));
}

std::string_view to_string(Integrator integrator) {
  return integrator == Integrator::kEuler ? "euler" : "rk45";
}

Integrator parse_integrator(std::string_view name) {
  if (name == "euler") return Integrator::kEuler;
  if (name == "rk45") return Integrator::kRk45;
  throw Error(ErrorCode::kInvalidArgument, "unknown integrator '" + std::string(name) + "'");
}

Integrator default_integrator(SystemKind kind) {
  return kind == SystemKind::kDoubleIntegrator ? Integrator::kEuler : Integrator::kRk45;
}

State derivative(const SystemSpec& spec, double t, const State& s, const Control& c) {
  check_dims(spec, s, c);
  State out(spec.state_dim);
  rhs(spec, t, s.data(), c.data(), out.data());
  return out;
}

Trajectory integrate_euler(const SystemSpec& spec, const State& s0,
                           std::span<const Control> controls, double blowup_ceiling) {
  Trajectory traj = start_trajectory(spec, s0, controls);
  const int n = spec.state_dim;
  const double h = spec.step_duration();
  record_state_violation(spec, traj, 0);
  Buf s{}, ds{};
  std::copy(s0.data(), s0.data() + n, s.begin());
  for (int k = 0; k < spec.num_steps; ++k) {
    const double t = k * h;
    Control c = apply_control_bounds(spec, traj, k, controls[k]);
    rhs(spec, t, s.data(), c.data(), ds.data());
    for (int i = 0; i < n; ++i) s[i] += h * ds[i];
    check_blowup(s.data(), n, blowup_ceiling, t + h);
    traj.controls.push_back(std::move(c));
    traj.times.push_back((k + 1) * h);
    traj.states.push_back(Eigen::Map<const Vec>(s.data(), n));
    record_state_violation(spec, traj, k + 1);
  }
  finish(spec, traj);
  return traj;
}

Trajectory integrate_rk45(const SystemSpec& spec, const State& s0,
                          std::span<const Control> controls, const Rk45Options& options) {
  if (!(options.rtol > 0.0) || !(options.atol > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "rtol and atol must be positive");
  Trajectory traj = start_trajectory(spec, s0, controls);
  const int n = spec.state_dim;
  const double interval = spec.step_duration();
  const double h_min = 1e-12 * spec.horizon;
  record_state_violation(spec, traj, 0);

  Buf y{}, y_new{}, k1{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, tmp{};
  std::copy(s0.data(), s0.data() + n, y.begin());
  double h = interval / 4.0;

  for (int k = 0; k < spec.num_steps; ++k) {
    Control c = apply_control_bounds(spec, traj, k, controls[k]);
    const double t_start = k * interval;
    const double t_end = (k + 1) * interval;
    double t = t_start;
    // FSAL is reset at every interval because the control changes there.
    rhs(spec, t, y.data(), c.data(), k1.data());
    while (t < t_end) {
      if (h < h_min) {
        throw Error(ErrorCode::kStepSizeUnderflow,
                    "adaptive step fell below 1e-12 * horizon at t=" + std::to_string(t));
      }
      bool last = false;
      double step = h;
      if (t + step >= t_end - 2.0 * h_min) {
        step = t_end - t;
        last = true;
      }
      auto stage = [&](std::initializer_list<std::pair<const Buf*, double>> terms, double ct,
                       Buf& out) {
        for (int i = 0; i < n; ++i) {
          double acc = y[i];
          for (const auto& [kv, a] : terms) acc += step * a * (*kv)[i];
          tmp[i] = acc;
        }
        rhs(spec, t + ct * step, tmp.data(), c.data(), out.data());
      };
      stage({{&k1, a21}}, c2, k2);
      stage({{&k1, a31}, {&k2, a32}}, c3, k3);
      stage({{&k1, a41}, {&k2, a42}, {&k3, a43}}, c4, k4);
      stage({{&k1, a51}, {&k2, a52}, {&k3, a53}, {&k4, a54}}, c5, k5);
      stage({{&k1, a61}, {&k2, a62}, {&k3, a63}, {&k4, a64}, {&k5, a65}}, 1.0, k6);
      for (int i = 0; i < n; ++i) {
        y_new[i] = y[i] + step * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                                  b6 * k6[i]);
      }
      rhs(spec, t + step, y_new.data(), c.data(), k7.data());
      double err_sq = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                 e6 * k6[i] + e7 * k7[i]);
        const double scale =
            options.atol + options.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
        err_sq += (e / scale) * (e / scale);
      }
      const double err = std::sqrt(err_sq / n);
      if (!std::isfinite(err)) {
        check_blowup(y_new.data(), n, options.blowup_ceiling, t + step);
        h = step * 0.2;
        continue;
      }
      if (err <= 1.0) {
        t = last ? t_end : t + step;
        y = y_new;
        k1 = k7;
        check_blowup(y.data(), n, options.blowup_ceiling, t);
        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        // a truncated final step says nothing about the natural step size
        if (!last || step * fac < h) h = step * fac;
      } else {
        h = step * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
      }
    }
    traj.controls.push_back(std::move(c));
    traj.times.push_back(t_end);
    traj.states.push_back(Eigen::Map<const Vec>(y.data(), n));
    record_state_violation(spec, traj, k + 1);
  }
  finish(spec, traj);
  return traj;
}

Trajectory simulate(const SystemSpec& spec, const State& s0, std::span<const Control> controls,
                    Integrator integrator) {
  return integrator == Integrator::kEuler ? integrate_euler(spec, s0, controls)
                                          : integrate_rk45(spec, s0, controls);
}

}  // namespace grpoctrl
