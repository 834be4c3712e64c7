#pragma once

#include <string>

#include "grpoctrl/demonstration.hpp"

namespace grpoctrl {

struct ReasoningInputs {
  const SystemSpec& spec;
  const State& s0;
  Strategy strategy;
  const Trajectory& trajectory;  // simulated from s0 with the record's controls
  const Annotations& annotations;
};

/// State-dependent explanation text for a demonstration. Quantities are
/// computed from the inputs: distance to target, dominant axis, momentum
/// magnitude, coupling constants, orbital energy budget.
std::string generate_reasoning(const ReasoningInputs& in);

int word_count(std::string_view text);

}  // namespace grpoctrl
