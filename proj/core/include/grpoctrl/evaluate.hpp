#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grpoctrl/codec.hpp"
#include "grpoctrl/demonstration.hpp"
#include "grpoctrl/dynamics.hpp"
#include "grpoctrl/policy.hpp"
#include "grpoctrl/reward.hpp"

namespace grpoctrl {

struct EvalConfig {
  double temperature = 0.0;  // mean action for toy policies
  std::uint64_t seed = 0;
  std::optional<Integrator> integrator;  // default: the system's own
  RewardWeights weights = schedule_weights(400);
  RewardConfig reward;
};

struct Episode {
  State s0;
  ParseStatus status = ParseStatus::kFormatError;
  int clip_events = 0;
  bool diverged = false;
  bool used_fallback = false;
  Trajectory trajectory;  // from the parsed controls, or the fallback when parsing failed
  Metrics metrics;
  RewardBreakdown reward;
  double latency_ms = 0.0;
};

struct EvalResult {
  std::vector<Episode> episodes;
  Metrics mean;
  double mean_reward = 0.0;
  double format_compliance = 0.0;

  std::string metrics_json() const;
};

EvalResult evaluate(PolicyHandle& policy, const SystemSpec& spec,
                    std::span<const State> initial_states, const EvalConfig& config = {});

/// `n` initial states drawn uniformly in the state box.
std::vector<State> sample_initial_states(const SystemSpec& spec, int n, std::uint64_t seed);

std::vector<State> initial_states_of(std::span<const DemonstrationRecord> records);

}  // namespace grpoctrl
