#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "grpoctrl/dynamics.hpp"
#include "grpoctrl/system.hpp"

namespace grpoctrl {

enum class Strategy { kOptimal, kAltEnergy, kAltTime, kSuboptimal, kRecovery };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view name);

struct Annotations {
  double cost = 0.0;           // quadratic trajectory cost with the default weights
  double final_error = 0.0;
  double control_effort = 0.0; // sum ||a_t||^2
  double smoothness = 0.0;     // sum ||a_{t+1} - a_t||^2
  int violation_count = 0;     // state-bound events only
  int clip_count = 0;          // solver outputs clipped to actuator bounds
};

/// One supervised example: prompt, reasoning, controls and how they perform.
struct DemonstrationRecord {
  SystemKind system = SystemKind::kDoubleIntegrator;
  State s0;
  std::string prompt;
  std::string reasoning;
  std::vector<Control> controls;
  Strategy strategy = Strategy::kOptimal;
  Annotations annotations;

  /// The response an ideal policy would emit for this record.
  std::string completion(const SystemSpec& spec) const;
};

/// Annotations for `controls` re-simulated from `s0` with the system's
/// default integrator.
Annotations annotate(const SystemSpec& spec, const State& s0, std::span<const Control> controls,
                     int clip_count = 0);

/// JSON-lines codec. Field names: system, s0, prompt, reasoning, controls,
/// strategy, annotations.
std::string to_json_line(const DemonstrationRecord& record);
DemonstrationRecord record_from_json(std::string_view line);

std::vector<DemonstrationRecord> read_records(const std::string& path);
void write_records(const std::string& path, std::span<const DemonstrationRecord> records);

}  // namespace grpoctrl
