#pragma once

// Shared test helpers.

#include <random>
#include <string>
#include <vector>

#include "grpoctrl/codec.hpp"
#include "grpoctrl/dynamics.hpp"
#include "grpoctrl/system.hpp"

namespace grpoctrl {

inline State random_state(const SystemSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  State s(spec.state_dim);
  for (int i = 0; i < spec.state_dim; ++i)
    s[i] = spec.state_lower[i] + unit(rng) * (spec.state_upper[i] - spec.state_lower[i]);
  return s;
}

inline std::vector<Control> random_controls(const SystemSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Control> out;
  for (int t = 0; t < spec.num_steps; ++t) {
    Control c(spec.control_dim);
    for (int i = 0; i < spec.control_dim; ++i)
      c[i] = spec.control_lower[i] + unit(rng) * (spec.control_upper[i] - spec.control_lower[i]);
    out.push_back(c);
  }
  return out;
}

// Values already on the 3-decimal grid, so rendering is lossless.
inline std::vector<Control> random_grid_controls(const SystemSpec& spec, std::mt19937_64& rng) {
  auto out = random_controls(spec, rng);
  for (auto& c : out)
    for (int i = 0; i < c.size(); ++i) {
      c[i] = std::round(c[i] * 1000.0) / 1000.0;
      c[i] = std::clamp(c[i], spec.control_lower[i], spec.control_upper[i]);
    }
  return out;
}

inline std::vector<Control> fallback_controls_of(const SystemSpec& spec) {
  return fallback_controls(spec);
}

// Directory under the build tree's temp area, wiped on construction.
std::string scratch_dir(const std::string& name);

}  // namespace grpoctrl
