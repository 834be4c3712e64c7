#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "grpoctrl/cost.hpp"
#include "grpoctrl/dataset.hpp"
#include "grpoctrl/dynamics.hpp"
#include "grpoctrl/grpo.hpp"
#include "grpoctrl/reward.hpp"
#include "grpoctrl/sft.hpp"
#include "grpoctrl/system.hpp"

namespace grpoctrl {

struct BridgeEndpoint {
  std::string address;         // "stdio:<command>" or "tcp:<host>:<port>"
  double timeout_s = 120.0;
  bool train = false;          // allow GRPO updates through the bridge
};

/// Everything a run needs. `seed` is the master seed; the dataset, SFT and
/// GRPO seeds are derived from it when the run resolves.
struct RunConfig {
  SystemSpec system = make_system(SystemKind::kDoubleIntegrator);
  std::optional<Integrator> integrator;      // rollout integrator; default per system
  std::optional<CostWeights> cost;           // reward cost weights; default Q=I, R=0.1I, Qf=10I
  std::optional<RewardWeights> reward_weights;  // fixed weights instead of the curriculum
  RewardConfig reward;
  GrpoConfig grpo = GrpoConfig::toy(GrpoConfig::table1());
  std::string preset = "table1";
  SftConfig sft;
  int dataset_count = 2000;
  std::string train_path;
  std::string eval_path;
  std::string output_dir = "runs/default";
  int eval_episodes = 50;
  std::uint64_t seed = 0;
  std::optional<BridgeEndpoint> bridge;

  /// Copies the master seed, weights and integrator into the nested configs.
  void resolve();
  void validate() const;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;
};

/// The shipped defaults for a system. Orbit raising uses the demo target
/// r_target = 1.8.
RunConfig default_run_config(SystemKind kind);

/// GRPOCTRL_SEED, when set to an unsigned integer, replaces config.seed.
/// Returns true when the override applied.
bool apply_seed_override(RunConfig& config);

/// "table1" or "body", adapted to the toy policy's learning rate scale.
GrpoConfig grpo_preset(const std::string& name);

std::string version_string();

}  // namespace grpoctrl
