#include "grpoctrl/reasoning.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "grpoctrl/codec.hpp"

namespace grpoctrl {
namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string f3(double v) { return format_fixed3(v); }
std::string f4(double v) {
  std::string s = fmt("%.4f", v);
  return s == "-0.0000" ? "0.0000" : s;
}

std::string strategy_label(Strategy s) {
  switch (s) {
    case Strategy::kOptimal: return "optimal";
    case Strategy::kAltEnergy: return "energy-efficient";
    case Strategy::kAltTime: return "time-optimal";
    case Strategy::kSuboptimal: return "practical";
    case Strategy::kRecovery: return "recovery";
  }
  return "optimal";
}

std::string strategy_rationale(Strategy s) {
  switch (s) {
    case Strategy::kOptimal:
      return "The sequence minimizes the quadratic cost on state error and control effort, "
             "with a heavy terminal weight pulling the final state onto the target.";
    case Strategy::kAltEnergy:
      return "This energy-efficient variant weights control effort ten times more heavily, "
             "accepting slower convergence in exchange for lower actuator usage.";
    case Strategy::kAltTime:
      return "This time-optimal variant weights the terminal state ten times more heavily, "
             "pushing the state onto the target as fast as the actuator bounds allow.";
    case Strategy::kSuboptimal:
      return "This is a practical sequence that follows the optimal profile with small "
             "deviations; it stays feasible but gives up a little performance.";
    case Strategy::kRecovery:
      return "The initial state sits near the edge of the operating envelope, so the first "
             "steps recover margin before the fine convergence phase.";
  }
  return {};
}

double peak_control(const Trajectory& traj) {
  double peak = 0.0;
  for (const auto& a : traj.controls) peak = std::max(peak, a.cwiseAbs().maxCoeff());
  return peak;
}

// First grid time after which the error stays below `radius`, or -1.
double settle_time(const Trajectory& traj, double radius) {
  double settle = -1.0;
  for (int t = static_cast<int>(traj.states.size()) - 1; t >= 0; --t) {
    if ((traj.states[t] - traj.target).norm() >= radius) break;
    settle = traj.times[t];
  }
  return settle;
}

std::string outcome_lines(const ReasoningInputs& in, std::string_view error_unit) {
  const Annotations& a = in.annotations;
  std::string out = "Predicted outcome:\n";
  out += "- Final state error: " + f3(a.final_error) + std::string(error_unit) + "\n";
  out += "- Trajectory cost: " + f3(a.cost) + "\n";
  out += "- Control effort: " + f3(a.control_effort) + ", peak magnitude " +
         f3(peak_control(in.trajectory)) + "\n";
  const double settle = settle_time(in.trajectory, 0.1);
  if (settle >= 0.0) {
    out += "- Error stays below 0.1 from t = " + fmt("%.1f", settle) + "s onward\n";
  } else {
    out += "- Error remains above 0.1 at the final time; the horizon is the limiting factor\n";
  }
  out += "- State-bound violations: " + std::to_string(a.violation_count) + "\n";
  return out;
}

std::string plan_lines(const SystemSpec& spec, std::string_view item, std::string_view target,
                       std::string_view constraints, Strategy strategy) {
  std::string out = "Strategy: " + strategy_label(strategy) + "\n";
  out += "- Apply " + std::string(item) + " over " + std::to_string(spec.num_steps) + " steps\n";
  out += "- Each step duration: " + fmt("%g", spec.step_duration()) + "s\n";
  out += "- Target: " + std::string(target) + "\n";
  out += "- Constraints: " + std::string(constraints) + "\n";
  return out;
}

std::string bound_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string linear_like(const ReasoningInputs& in) {
  const SystemSpec& spec = in.spec;
  const bool vdp = spec.kind == SystemKind::kVanDerPol;
  const double x = in.s0[0], v = in.s0[1];
  const double dist = in.s0.norm();
  const double u_max = spec.control_upper[0];
  std::ostringstream os;
  os << "For this " << (vdp ? "Van der Pol oscillator" : "double integrator")
     << " starting at [x=" << f3(x) << ", x_dot=" << f3(v) << "], I'm using "
     << (vdp ? "nonlinear direct shooting" : "finite-horizon LQR")
     << " to drive the state to the origin in " << fmt("%.2f", spec.horizon) << " seconds.\n\n";
  if (vdp) {
    os << "The dynamics follow x_ddot = mu*(1 - x^2)*x_dot - x + u with mu = "
       << f3(spec.params.mu_vdp)
       << ". Inside |x| < 1 the damping term injects energy, so without control the state is "
          "pushed onto the limit cycle; the controller has to remove that energy.\n\n";
  } else {
    os << "The dynamics follow x_ddot = u, so the control directly sets the acceleration and "
          "the position responds through the velocity.\n\n";
  }
  os << "Analysis:\n";
  os << "- Distance from target: " << f3(dist) << "\n";
  const bool toward = x * v < 0.0;
  os << "- Velocity direction: "
     << (std::abs(v) < 1e-3 ? "at rest" : (toward ? "moving toward the origin" : "moving away from the origin"))
     << "\n";
  os << "- Kinetic energy: " << f3(0.5 * v * v) << ", stopping distance at full braking: "
     << f3(v * v / (2.0 * u_max)) << "\n";
  if (vdp) {
    os << "- Damping regime: "
       << (std::abs(x) < 1.0 ? "negative damping (|x| < 1), energy grows if uncontrolled"
                             : "positive damping (|x| >= 1), natural dissipation helps")
       << "\n";
  }
  os << "\n";
  if (std::abs(v) > 0.5) {
    os << "The velocity is high, so the plan brakes aggressively early to prevent overshoot, "
          "then eases off as the state approaches the origin.\n\n";
  } else if (dist < 0.3) {
    os << "The state is already close to the target with little energy, so gentle convergence "
          "with minimal effort is enough.\n\n";
  } else {
    os << "The offset is moderate, so the plan uses a firm initial push followed by a smooth "
          "decay of the control.\n\n";
  }
  os << plan_lines(spec, "control sequence", "origin (x = 0, x_dot = 0)",
                   "|x| <= " + bound_text(spec.state_upper[0]) + ", |x_dot| <= " +
                       bound_text(spec.state_upper[1]) + ", |u| <= " + bound_text(u_max) + " N",
                   in.strategy);
  os << "\n" << strategy_rationale(in.strategy) << "\n\n";
  os << outcome_lines(in, "");
  os << "\nThis approach balances convergence speed against control effort while respecting the "
        "actuator limits.";
  return os.str();
}

std::string orbit(const ReasoningInputs& in) {
  const SystemSpec& spec = in.spec;
  const ParamSet& p = spec.params;
  const double r = in.s0[0], u = in.s0[1], v = in.s0[2];
  const double kinetic = 0.5 * (u * u + v * v);
  const double potential = -p.mu_grav / r;
  const double eps0 = kinetic + potential;
  const double eps_target = -p.mu_grav / (2.0 * p.r_target);
  const double delta = eps_target - eps0;
  std::ostringstream os;
  os << "Energy-Based Orbit Raising Analysis\n\n";
  os << "Current Orbital Energy: epsilon_0 = " << f4(eps0) << "\n";
  os << "- Kinetic energy component: (u^2+v^2)/2 = " << f4(kinetic) << "\n";
  os << "- Potential energy component: -mu/r = " << f4(potential) << "\n";
  os << "- Total specific energy: " << f4(eps0) << "\n\n";
  os << "Target Orbital Energy: epsilon_target = -mu/(2*r_target) = " << f4(eps_target) << "\n";
  os << "- Required energy increase: Delta_epsilon = " << f4(delta) << "\n\n";
  os << "Energy Transfer Strategy:\n";
  if (delta > 0.0) {
    os << "Must add " << f4(delta) << " units of specific energy through thrust work\n\n";
  } else {
    os << "Must remove " << f4(-delta) << " units of specific energy, so part of the thrust "
          "opposes the velocity\n\n";
  }
  os << "Optimal Thrust Direction:\n";
  os << "- Tangential thrust component: Directly changes orbital energy (most efficient)\n";
  os << "- Radial thrust component: "
     << (std::abs(u) > 0.1 ? "Needed to cancel the current radial velocity"
                           : "Minimal, maintain near-circular shape")
     << "\n\n";
  os << "Physical Constraints:\n";
  os << "- Gravitational acceleration at current radius: g = mu/r^2 = " << f4(p.mu_grav / (r * r))
     << "\n";
  os << "- Centrifugal effect: v^2/r = " << f4(v * v / r) << "\n";
  os << "- Net acceleration balance determines thrust requirements\n";
  os << "- Thrust acceleration grows from " << f4(p.thrust / p.m0) << " to "
     << f4(p.thrust / (p.m0 + p.m1 * spec.horizon)) << " as propellant is spent\n\n";
  os << plan_lines(spec, "thrust angle sequence",
                   "circular orbit at r = " + f3(p.r_target) + " (v = " +
                       f3(std::sqrt(p.mu_grav / p.r_target)) + ")",
                   "0 <= phi <= 2*pi rad", in.strategy);
  os << "\n" << strategy_rationale(in.strategy) << "\n\n";
  os << outcome_lines(in, "");
  os << "\nTrajectory Evolution: Over " << fmt("%.1f", spec.horizon) << "s, the "
     << spec.num_steps
     << " thrust pulses will incrementally change the orbital energy while keeping the shape near "
        "circular, progressively moving the orbit toward the target radius.";
  return os.str();
}

std::string detumbling(const ReasoningInputs& in) {
  const SystemSpec& spec = in.spec;
  const auto& j = spec.params.inertia_diag;
  const State& w = in.s0;
  int dominant = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(w[i]) > std::abs(w[dominant])) dominant = i;
  static constexpr const char* kAxis[] = {"X", "Y", "Z"};
  const double k1 = (j[1] - j[2]) / j[0];
  const double k2 = (j[2] - j[0]) / j[1];
  const double k3 = (j[0] - j[1]) / j[2];
  Vec jw(3);
  jw << j[0] * w[0], j[1] * w[1], j[2] * w[2];

  std::ostringstream os;
  os << "For this spacecraft detumbling maneuver starting with angular velocities [omega_1="
     << f3(w[0]) << ", omega_2=" << f3(w[1]) << ", omega_3=" << f3(w[2])
     << "] rad/s, I'm using BVP optimal control to bring the spacecraft to rest in "
     << fmt("%.2f", spec.horizon) << " seconds.\n\n";
  os << "The spacecraft dynamics follow Euler's rotational equations:\n";
  os << "omega_dot = -J^(-1)(omega x J*omega) + J^(-1)*u\n";
  os << "with inertia matrix J = diag([" << fmt("%.1f", j[0]) << ", " << fmt("%.1f", j[1])
     << ", " << fmt("%.1f", j[2]) << "]) kg*m^2.\n\n";
  os << "Analysis:\n";
  os << "- Initial angular momentum magnitude: " << f3(w.norm()) << " rad/s\n";
  os << "- Body angular momentum |J*omega|: " << f3(jw.norm()) << " kg*m^2/s\n";
  os << "- Dominant tumbling axis: " << kAxis[dominant] << " (omega_" << dominant + 1 << ")\n";
  os << "- Coupling constants: K_1=" << f3(k1) << ", K_2=" << f3(k2) << ", K_3=" << f3(k3)
     << "\n";
  os << "- Rotational kinetic energy: " << f3(0.5 * w.dot(jw)) << " J\n\n";
  std::string torque = fmt("%.1f", spec.control_upper[0]);
  os << plan_lines(spec, "3D torque sequence", "Zero angular velocity (detumbled state)",
                   "|omega_i| <= " + bound_text(spec.state_upper[0]) + " rad/s, |u_i| <= " +
                       torque + " N*m",
                   in.strategy);
  os << "\n" << strategy_rationale(in.strategy) << "\n\n";
  os << outcome_lines(in, " rad/s");
  os << "\nThis approach exploits the nonlinear coupling between axes while minimizing control "
        "effort and respecting physical constraints.";
  return os.str();
}

}  // namespace

int word_count(std::string_view text) {
  int count = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

std::string generate_reasoning(const ReasoningInputs& in) {
  switch (in.spec.kind) {
    case SystemKind::kDoubleIntegrator:
    case SystemKind::kVanDerPol: return linear_like(in);
    case SystemKind::kOrbitRaising: return orbit(in);
    case SystemKind::kDetumbling: return detumbling(in);
  }
  return {};
}

}  // namespace grpoctrl
