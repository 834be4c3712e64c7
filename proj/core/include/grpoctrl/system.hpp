#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <string_view>

namespace grpoctrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class SystemKind { kDoubleIntegrator, kVanDerPol, kOrbitRaising, kDetumbling };

std::string_view to_string(SystemKind kind);
/// Accepts "double-integrator", "double_integrator", "DoubleIntegrator", ...
SystemKind parse_system_kind(std::string_view name);

struct ParamSet {
  double mu_vdp = 1.0;
  double mu_grav = 1.0;
  double thrust = 0.1405;
  double m0 = 1.0;
  double m1 = -0.075;
  std::array<double, 3> inertia_diag{14.0, 10.0, 8.0};
  // Orbit raising target radius; the target state is the circular orbit there.
  double r_target = 1.5;
};

struct SystemSpec {
  SystemKind kind = SystemKind::kDoubleIntegrator;
  int state_dim = 2;
  int control_dim = 1;
  Vec state_lower;
  Vec state_upper;
  Vec control_lower;
  Vec control_upper;
  double horizon = 5.0;
  int num_steps = 10;
  ParamSet params;

  double step_duration() const { return horizon / num_steps; }

  /// Throws Error(kInvalidArgument) when an invariant does not hold.
  void validate() const;
};

/// Table-of-record defaults: 10 steps, 5 s horizons (4 s for orbit raising).
SystemSpec make_system(SystemKind kind);

Vec target_state(const SystemSpec& spec);

Vec clip_to_bounds(const Vec& v, const Vec& lower, const Vec& upper);

}  // namespace grpoctrl
