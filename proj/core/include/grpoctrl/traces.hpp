#pragma once

#include <string>
#include <vector>

#include "grpoctrl/dynamics.hpp"
#include "grpoctrl/evaluate.hpp"

namespace grpoctrl {

/// Column names for a system: t, the state components, the control components.
std::vector<std::string> trace_columns(const SystemSpec& spec);

/// One row per grid time; values at 9 significant digits. The final row has
/// empty control cells (no control is applied at the terminal time).
std::string trace_csv(const SystemSpec& spec, const Trajectory& traj);
void write_trace_csv(const std::string& path, const SystemSpec& spec, const Trajectory& traj);

/// Parses a trace back. Times, states and controls are restored; the target,
/// costs and violations are recomputed from `spec`.
Trajectory parse_trace_csv(const SystemSpec& spec, const std::string& text);
Trajectory read_trace_csv(const std::string& path, const SystemSpec& spec);

/// Writes episode_NNN.csv per episode, episodes.csv (one summary row each)
/// and metrics.json into `dir`. Returns the trace file paths.
std::vector<std::string> export_traces(const std::string& dir, const SystemSpec& spec,
                                       const EvalResult& result);

}  // namespace grpoctrl
