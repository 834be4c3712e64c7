#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grpoctrl/codec.hpp"
#include "grpoctrl/dynamics.hpp"
#include "grpoctrl/optim.hpp"
#include "grpoctrl/policy.hpp"
#include "grpoctrl/reward.hpp"

namespace grpoctrl {

struct GrpoConfig {
  int group_size = 8;
  double epsilon = 0.2;
  double kl_coeff = 0.05;
  double temperature = 1.0;
  double learning_rate = 1e-6;
  int total_steps = 200;
  std::uint64_t seed = 0;
  Integrator integrator = Integrator::kRk45;
  int inner_epochs = 1;       // >1 reuses each group for several updates against one snapshot
  int schedule_offset = 0;    // added to the step index before looking up reward weights
  double ratio_limit = 20.0;  // |logprob_new - logprob_old| beyond this is a RatioOverflow
  RewardConfig reward;
  std::optional<RewardWeights> weights_override;  // replaces the curriculum when set

  /// lr 1e-6, N 8, KL 0.05, clip 0.2, temperature 1.0.
  static GrpoConfig table1();
  /// lr 3e-6, N 4, KL 0.01, clip 0.2, temperature 1.0.
  static GrpoConfig body();
  /// `preset` with the learning rate rescaled for Adam on a toy policy; the
  /// preset rates are sized for LoRA updates of a 4B model and barely move a
  /// 33-parameter Gaussian in a few hundred steps.
  static GrpoConfig toy(const GrpoConfig& preset);

  void validate() const;
};

struct CandidateRecord {
  std::string text;
  ParseOutcome parse;
  bool diverged = false;
  double logprob_old = 0.0;
  double logprob_new = 0.0;
  RewardBreakdown reward;
  double advantage = 0.0;
  double latency_ms = 0.0;
  bool timed_out = false;
};

struct GroupSample {
  PromptBundle prompt;
  std::vector<CandidateRecord> completions;
};

/// A_j = R_j - mean_k R_k.
void compute_advantages(GroupSample& group);

struct LossResult {
  double loss = 0.0;
  double surrogate = 0.0;  // mean_j min(r A, clip(r) A)
  double kl = 0.0;         // mean_j (lo - ln + r - 1)
  double clip_fraction = 0.0;
  std::vector<double> ratios;
  std::vector<bool> clipped;          // the clipped branch is strictly the minimum
  std::vector<double> dloss_dlogprob; // dL / d logprob_new_j
};

/// Clipped surrogate with the nonnegative KL estimator. Throws
/// Error(kRatioOverflow) when any |logprob_new - logprob_old| exceeds
/// `ratio_limit`.
LossResult grpo_loss(const GroupSample& group, double epsilon, double kl_coeff,
                     double ratio_limit = 20.0);

/// d loss / d theta for a differentiable policy, holding logprob_old fixed.
Vec grpo_loss_gradient(PolicyHandle& policy, const GroupSample& group, const LossResult& loss);

struct StepReport {
  int step = 0;
  SchedulePhase phase = SchedulePhase::kEarly;
  State s0;
  double mean_reward = 0.0;
  double max_reward = 0.0;
  double min_reward = 0.0;
  double loss = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  double format_compliance = 0.0;
  double grad_norm = 0.0;
  double mean_latency_ms = 0.0;
  int timeouts = 0;
  std::vector<CandidateRecord> candidates;

  /// One JSON document, no trailing newline. Candidate texts are omitted;
  /// status, clip events, log-probabilities and reward breakdowns are kept.
  std::string to_json_line() const;
};

/// Draws initial states for GRPO steps: from `pool` when it is non-empty,
/// otherwise uniformly in the state box.
State training_state(const SystemSpec& spec, const std::vector<State>& pool,
                     std::uint64_t seed, int step);

/// Runs GRPO steps against one policy. Holds the optimizer state.
class GrpoTrainer {
 public:
  GrpoTrainer(PolicyHandle& policy, SystemSpec spec, GrpoConfig config,
              std::vector<State> initial_states = {});

  /// Snapshot theta_old, sample a state, N completions, score, one update.
  /// On RatioOverflow the policy is restored to theta_old before rethrowing.
  StepReport step(int step_index);

  /// Scores a group that has already been sampled (no update).
  GroupSample score(const PromptBundle& prompt, const std::vector<Completion>& completions,
                    int step_index) const;

  const GrpoConfig& config() const { return config_; }

 private:
  PolicyHandle& policy_;
  SystemSpec spec_;
  GrpoConfig config_;
  std::vector<State> initial_states_;
  Adam adam_;
};

}  // namespace grpoctrl
