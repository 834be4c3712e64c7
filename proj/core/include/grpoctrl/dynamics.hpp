#pragma once

#include <span>
#include <vector>

#include "grpoctrl/cost.hpp"
#include "grpoctrl/system.hpp"

namespace grpoctrl {

using State = Vec;
using Control = Vec;

enum class ViolationKind { kStateBound, kControlBound };

struct Violation {
  int step = 0;
  ViolationKind kind = ViolationKind::kStateBound;
  double margin = 0.0;  // largest exceedance beyond the violated bound

  bool operator==(const Violation&) const = default;
};

struct Trajectory {
  std::vector<double> times;     // num_steps + 1
  std::vector<State> states;     // num_steps + 1
  std::vector<Control> controls; // num_steps, as applied (post-clip)
  std::vector<double> step_costs;
  double terminal_cost = 0.0;
  std::vector<Violation> violations;
  State target;

  int num_steps() const { return static_cast<int>(controls.size()); }
  int count(ViolationKind kind) const;
};

enum class Integrator { kEuler, kRk45 };

std::string_view to_string(Integrator integrator);
Integrator parse_integrator(std::string_view name);

/// Euler for the double integrator, RK45 for the nonlinear systems.
Integrator default_integrator(SystemKind kind);

struct Rk45Options {
  double rtol = 1e-9;
  double atol = 1e-12;
  double blowup_ceiling = 1e6;
};

/// ds/dt for the governing equations of `spec.kind`.
State derivative(const SystemSpec& spec, double t, const State& s, const Control& c);

Trajectory integrate_euler(const SystemSpec& spec, const State& s0,
                           std::span<const Control> controls,
                           double blowup_ceiling = 1e6);

/// Dormand-Prince 5(4) with adaptive substeps inside each zero-order-hold
/// interval; states are reported exactly on the control grid.
Trajectory integrate_rk45(const SystemSpec& spec, const State& s0,
                          std::span<const Control> controls,
                          const Rk45Options& options = {});

Trajectory simulate(const SystemSpec& spec, const State& s0,
                    std::span<const Control> controls, Integrator integrator);

}  // namespace grpoctrl
