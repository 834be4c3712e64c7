#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "grpoctrl/demonstration.hpp"
#include "grpoctrl/expert.hpp"

namespace grpoctrl {

inline constexpr std::array<Strategy, 5> kAllStrategies{
    Strategy::kOptimal, Strategy::kAltEnergy, Strategy::kAltTime, Strategy::kSuboptimal,
    Strategy::kRecovery};

struct DatasetOptions {
  int count = 2000;
  std::uint64_t seed = 0;
  int eval_count = -1;  // -1: 10% of count
  // Optimal 40%, alternatives 30% (split evenly between energy and time),
  // suboptimal 20%, recovery 10%.
  std::array<double, 4> mix{0.40, 0.30, 0.20, 0.10};
  double suboptimal_noise = 0.10;
  double recovery_shell = 0.20;  // outer fraction of the normalized state box
  int max_attempts = 8;          // per record, before the failure budget is charged
  int failure_budget = -1;       // total failed attempts tolerated; -1: count / 10 + 10
  int threads = 0;               // 0: hardware concurrency
  ShootingOptions shooting{2, 200, 1e-6, 1e-7, {1e-10, 1e-12, 1e6}, 0};
  /// Called once per resampled attempt (record index, reason). May be empty.
  std::function<void(int, const std::string&)> on_resample;
};

struct StrategyCounts {
  std::array<int, 5> by_strategy{};  // indexed like kAllStrategies

  int operator[](Strategy s) const { return by_strategy[static_cast<int>(s)]; }
  int total() const;
};

/// Exact per-strategy quotas for `count` records under `mix`.
StrategyCounts strategy_quotas(int count, const std::array<double, 4>& mix);

struct GeneratedDataset {
  std::vector<DemonstrationRecord> train;
  std::vector<DemonstrationRecord> eval;
  int resampled = 0;
};

/// Deterministic in (spec, options.count, options.seed) regardless of thread count.
/// Throws Error(kSolverFailed) when the failure budget is exhausted.
GeneratedDataset build_dataset(const SystemSpec& spec, const DatasetOptions& options);

/// Builds and solves one record. Exposed for tests and benchmarks.
DemonstrationRecord make_record(const SystemSpec& spec, const State& s0, Strategy strategy,
                                const ShootingOptions& shooting, double suboptimal_noise,
                                std::uint64_t noise_seed);

struct DatasetManifest {
  SystemKind system = SystemKind::kDoubleIntegrator;
  int count = 0;
  int train_count = 0;
  int eval_count = 0;
  std::array<double, 4> mix{0.40, 0.30, 0.20, 0.10};
  StrategyCounts realized;
  std::uint64_t seed = 0;
  int resampled = 0;
  std::string generated_at;  // UTC, ISO 8601
  std::string train_path;
  std::string eval_path;
  std::string records_hash;  // FNV-1a over both record files; stable across reruns

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
};

/// Writes <system>_train.jsonl, <system>_eval.jsonl and, last,
/// <system>_manifest.json into `out_dir` (created if missing).
DatasetManifest generate_dataset(const SystemSpec& spec, const DatasetOptions& options,
                                 const std::string& out_dir);

DatasetManifest read_manifest(const std::string& path);

/// 64-bit FNV-1a; pass a previous result as `hash` to continue a stream.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ull);

}  // namespace grpoctrl
