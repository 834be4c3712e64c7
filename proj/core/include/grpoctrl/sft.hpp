#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "grpoctrl/demonstration.hpp"
#include "grpoctrl/policy.hpp"

namespace grpoctrl {

struct SftConfig {
  int steps = 200;
  int batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  // Loss on the full training set must fall by this fraction of its initial
  // magnitude within the first `check_fraction` of the steps.
  double min_relative_drop = 0.10;
  double check_fraction = 0.25;
};

struct SftReport {
  std::vector<double> batch_losses;  // mean NLL of each minibatch, before its update
  double initial_loss = 0.0;         // full training set
  double checkpoint_loss = 0.0;      // full training set after check_fraction of the steps
  double final_loss = 0.0;
  double format_compliance = 0.0;    // greedy completions on the eval split that parse Ok
  int eval_records = 0;
};

/// Mean -logprob(prompt, expert completion) over `records`.
double sft_loss(PolicyHandle& policy, const SystemSpec& spec,
                std::span<const DemonstrationRecord> records);

/// Behavior cloning by minibatch Adam on the NLL of expert completions.
/// Throws Error(kNonDecreasingLoss) when the loss does not drop enough early.
SftReport sft_fit(PolicyHandle& policy, const SystemSpec& spec,
                  std::span<const DemonstrationRecord> train,
                  std::span<const DemonstrationRecord> eval, const SftConfig& config);

/// Fraction of greedy (temperature 0) completions that parse Ok.
double format_compliance(PolicyHandle& policy, const SystemSpec& spec,
                         std::span<const DemonstrationRecord> records);

}  // namespace grpoctrl
