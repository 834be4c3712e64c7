// grpoctrl: dataset generation, SFT, GRPO training, evaluation and trace export.
//
// Exit codes: 0 ok, 1 usage/config/IO error, 2 solver failure budget exceeded,
// 3 SFT loss did not decrease, 4 persistent ratio overflow, 5 missing
// checkpoint, 6 bridge disconnected.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "grpoctrl/bridge.hpp"
#include "grpoctrl/config.hpp"
#include "grpoctrl/dataset.hpp"
#include "grpoctrl/errors.hpp"
#include "grpoctrl/evaluate.hpp"
#include "grpoctrl/expert.hpp"
#include "grpoctrl/grpo.hpp"
#include "grpoctrl/policy.hpp"
#include "grpoctrl/sft.hpp"
#include "grpoctrl/traces.hpp"

namespace fs = std::filesystem;
using namespace grpoctrl;

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kSolver = 2,
  kNonDecreasing = 3,
  kOverflow = 4,
  kMissingCheckpoint = 5,
  kDisconnected = 6,
};

constexpr int kMaxConsecutiveOverflows = 10;

struct Common {
  std::string config_path;
  std::string system;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Run config JSON (see `config init`)");
  cmd->add_option("--system", c.system,
                  "double-integrator | van-der-pol | orbit-raising | detumbling");
  cmd->add_option("--seed", c.seed, "Master seed (GRPOCTRL_SEED overrides)");
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) {
    cfg = RunConfig::load(c.config_path);
    if (!c.system.empty() && parse_system_kind(c.system) != cfg.system.kind)
      throw Error(ErrorCode::kInvalidArgument, "--system disagrees with the config file");
  } else {
    cfg = default_run_config(c.system.empty() ? SystemKind::kDoubleIntegrator
                                              : parse_system_kind(c.system));
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.resolve();
  apply_seed_override(cfg);
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

std::string data_file(const std::string& dir, const SystemSpec& spec, const char* split) {
  return (fs::path(dir) / (std::string(to_string(spec.kind)) + "_" + split + ".jsonl")).string();
}

// Evaluation rolls out with the same integrator GRPO trains against.
EvalConfig eval_config(const RunConfig& cfg) {
  EvalConfig ec;
  ec.seed = cfg.seed;
  ec.integrator = cfg.grpo.integrator;
  ec.reward = cfg.grpo.reward;
  if (cfg.reward_weights) ec.weights = *cfg.reward_weights;
  return ec;
}

std::vector<State> eval_states(const RunConfig& cfg, const std::string& data_dir, int episodes) {
  if (!data_dir.empty()) {
    const auto records = read_records(data_file(data_dir, cfg.system, "eval"));
    auto states = initial_states_of(records);
    if (episodes >= 0 && static_cast<int>(states.size()) > episodes) states.resize(episodes);
    return states;
  }
  return sample_initial_states(cfg.system, episodes >= 0 ? episodes : cfg.eval_episodes,
                               cfg.seed);
}

std::unique_ptr<PolicyHandle> open_policy(const RunConfig& cfg, const std::string& checkpoint,
                                          const std::string& bridge) {
  if (!bridge.empty()) {
    BridgeOptions opts;
    if (cfg.bridge) opts.timeout = std::chrono::milliseconds(
                        static_cast<long long>(cfg.bridge->timeout_s * 1000.0));
    return std::make_unique<BridgePolicy>(bridge, opts);
  }
  if (checkpoint.empty() || !fs::exists(checkpoint))
    throw Error(ErrorCode::kIo, "checkpoint not found: " +
                                    (checkpoint.empty() ? std::string("(none given)") : checkpoint));
  return std::make_unique<GaussianSequencePolicy>(GaussianSequencePolicy::load(checkpoint));
}

int cmd_config_init(const Common& c, const std::string& out) {
  const RunConfig cfg = resolve_config(c);
  if (out.empty()) {
    std::cout << cfg.to_json() << '\n';
  } else {
    cfg.save(out);
    std::cout << "wrote " << out << '\n';
  }
  return kOk;
}

int cmd_gen_data(const Common& c, int count, const std::string& out, int threads) {
  RunConfig cfg = resolve_config(c);
  DatasetOptions opts;
  opts.count = count > 0 ? count : cfg.dataset_count;
  opts.seed = cfg.seed;
  opts.threads = threads;
  opts.on_resample = [](int index, const std::string& why) {
    std::cout << "resampled record " << index << ": " << why << '\n';
  };
  try {
    const DatasetManifest m = generate_dataset(cfg.system, opts, out);
    std::cout << "system " << to_string(m.system) << ": " << m.train_count << " train, "
              << m.eval_count << " eval, resampled " << m.resampled << ", records hash "
              << m.records_hash << '\n';
    for (std::size_t s = 0; s < kAllStrategies.size(); ++s)
      std::cout << "  " << to_string(kAllStrategies[s]) << ": " << m.realized.by_strategy[s]
                << '\n';
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSolverFailed) {
      std::cerr << "gen-data: " << e.what() << '\n';
      return kSolver;
    }
    throw;
  }
  return kOk;
}

int cmd_sft(const Common& c, const std::string& data, const std::string& out, int steps,
            std::uint64_t init_seed_offset) {
  RunConfig cfg = resolve_config(c);
  if (steps > 0) cfg.sft.steps = steps;
  cfg.output_dir = out;
  cfg.train_path = data_file(data, cfg.system, "train");
  cfg.eval_path = data_file(data, cfg.system, "eval");
  const auto train = read_records(cfg.train_path);
  const auto eval = read_records(cfg.eval_path);
  fs::create_directories(out);
  cfg.save((fs::path(out) / "config.json").string());

  GaussianSequencePolicy policy(cfg.system, cfg.seed + init_seed_offset);
  SftReport report;
  try {
    report = sft_fit(policy, cfg.system, train, eval, cfg.sft);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNonDecreasingLoss) {
      std::cerr << "sft: " << e.what() << '\n';
      return kNonDecreasing;
    }
    throw;
  }
  const fs::path ckpt = fs::path(out) / "sft_checkpoint.json";
  policy.save(ckpt.string());
  char line[256];
  std::snprintf(line, sizeof line,
                "{\"initial_loss\": %.9g, \"checkpoint_loss\": %.9g, \"final_loss\": %.9g, "
                "\"format_compliance\": %.9g, \"eval_records\": %d}\n",
                report.initial_loss, report.checkpoint_loss, report.final_loss,
                report.format_compliance, report.eval_records);
  write_text(fs::path(out) / "sft_report.json", line);
  std::ofstream log(fs::path(out) / "sft_log.jsonl", std::ios::trunc);
  for (std::size_t i = 0; i < report.batch_losses.size(); ++i)
    log << "{\"step\": " << i << ", \"loss\": " << report.batch_losses[i] << "}\n";
  std::cout << "sft: loss " << report.initial_loss << " -> " << report.final_loss
            << ", eval format compliance " << report.format_compliance << ", checkpoint "
            << ckpt.string() << '\n';
  return kOk;
}

int cmd_grpo_train(const Common& c, const std::string& checkpoint, bool from_scratch,
                   const std::string& preset, int steps, const std::string& data,
                   const std::string& out, const std::string& bridge, bool bridge_train) {
  RunConfig cfg = resolve_config(c);
  if (!preset.empty()) {
    cfg.preset = preset;
    const GrpoConfig p = grpo_preset(preset);
    cfg.grpo.group_size = p.group_size;
    cfg.grpo.kl_coeff = p.kl_coeff;
    cfg.grpo.learning_rate = p.learning_rate;
    cfg.grpo.epsilon = p.epsilon;
    cfg.grpo.temperature = p.temperature;
  }
  if (steps >= 0) cfg.grpo.total_steps = steps;
  cfg.output_dir = out;
  if (!bridge.empty()) cfg.bridge = BridgeEndpoint{bridge, cfg.bridge ? cfg.bridge->timeout_s : 120.0,
                                                   bridge_train};
  cfg.resolve();
  cfg.validate();

  std::unique_ptr<PolicyHandle> policy;
  if (!bridge.empty()) {
    if (!bridge_train) {
      std::cerr << "grpo-train: training through a bridge needs --bridge-train\n";
      return kUsage;
    }
    policy = open_policy(cfg, "", bridge);
  } else if (!checkpoint.empty()) {
    if (!fs::exists(checkpoint)) {
      std::cerr << "grpo-train: checkpoint not found: " << checkpoint << '\n';
      return kMissingCheckpoint;
    }
    policy = open_policy(cfg, checkpoint, "");
  } else if (from_scratch) {
    policy = std::make_unique<GaussianSequencePolicy>(cfg.system, cfg.seed);
  } else {
    std::cerr << "grpo-train: refusing to start without an SFT checkpoint "
                 "(pass --checkpoint PATH, or --from-scratch to skip the SFT stage)\n";
    return kMissingCheckpoint;
  }

  std::vector<State> pool;
  if (!data.empty()) {
    cfg.train_path = data_file(data, cfg.system, "train");
    pool = initial_states_of(read_records(cfg.train_path));
  }
  fs::create_directories(out);
  cfg.save((fs::path(out) / "config.json").string());

  GrpoTrainer trainer(*policy, cfg.system, cfg.grpo, pool);
  std::ofstream log(fs::path(out) / "grpo_log.jsonl", std::ios::trunc);
  int consecutive = 0;
  for (int step = 0; step < cfg.grpo.total_steps; ++step) {
    try {
      const StepReport r = trainer.step(step);
      log << r.to_json_line() << '\n';
      consecutive = 0;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kRatioOverflow) throw;
      log << "{\"step\": " << step << ", \"event\": \"ratio_overflow\"}\n";
      if (++consecutive > kMaxConsecutiveOverflows) {
        std::cerr << "grpo-train: ratio overflow persisted for " << consecutive << " steps\n";
        return kOverflow;
      }
    }
  }
  log.flush();

  if (auto* gaussian = dynamic_cast<GaussianSequencePolicy*>(policy.get()))
    gaussian->save((fs::path(out) / "grpo_checkpoint.json").string());

  std::vector<State> states;
  if (!data.empty())
    states = initial_states_of(read_records(data_file(data, cfg.system, "eval")));
  else
    states = sample_initial_states(cfg.system, cfg.eval_episodes, cfg.seed);
  const EvalResult result = evaluate(*policy, cfg.system, states, eval_config(cfg));
  write_text(fs::path(out) / "eval_metrics.json", result.metrics_json() + "\n");
  std::cout << "grpo-train: " << cfg.grpo.total_steps << " steps, eval reward "
            << result.mean_reward << ", final error " << result.mean.final_error << '\n';
  return kOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& bridge,
             const std::string& data, int episodes, const std::string& out, bool traces) {
  RunConfig cfg = resolve_config(c);
  std::unique_ptr<PolicyHandle> policy;
  if (bridge.empty() && (checkpoint.empty() || !fs::exists(checkpoint))) {
    std::cerr << "eval: checkpoint not found: "
              << (checkpoint.empty() ? std::string("(none given)") : checkpoint) << '\n';
    return kMissingCheckpoint;
  }
  if (!checkpoint.empty() && bridge.empty()) {
    auto gaussian = GaussianSequencePolicy::load(checkpoint);
    cfg.system = gaussian.spec();
    policy = std::make_unique<GaussianSequencePolicy>(std::move(gaussian));
  } else {
    policy = open_policy(cfg, "", bridge);
  }
  const auto states = eval_states(cfg, data, episodes);
  const EvalResult result = evaluate(*policy, cfg.system, states, eval_config(cfg));
  fs::create_directories(out);
  if (traces) {
    export_traces(out, cfg.system, result);
  } else {
    write_text(fs::path(out) / "metrics.json", result.metrics_json() + "\n");
  }
  std::cout << "eval: " << result.episodes.size() << " episodes, reward " << result.mean_reward
            << ", final error " << result.mean.final_error << ", format compliance "
            << result.format_compliance << '\n';
  return kOk;
}

// Expert traces: solver output for the dataset's eval states, or for the
// system's demo state when no dataset is given.
int cmd_export_expert(const Common& c, const std::string& data, int episodes,
                      const std::string& out) {
  RunConfig cfg = resolve_config(c);
  std::vector<DemonstrationRecord> records;
  if (!data.empty()) {
    records = read_records(data_file(data, cfg.system, "eval"));
    if (episodes >= 0 && static_cast<int>(records.size()) > episodes) records.resize(episodes);
  } else {
    State s0(cfg.system.state_dim);
    switch (cfg.system.kind) {
      case SystemKind::kDoubleIntegrator: s0 << 0.5, 0.0; break;
      case SystemKind::kVanDerPol: s0 << 0.5, 0.3; break;
      case SystemKind::kOrbitRaising: s0 << 1.0, 0.0, 1.0; break;
      case SystemKind::kDetumbling: s0 << -0.507, -0.313, 0.040; break;
    }
    records.push_back(make_record(cfg.system, s0, Strategy::kOptimal, ShootingOptions{}, 0.0, 0));
  }
  ReplayPolicy replay(cfg.system, records);
  EvalConfig ec = eval_config(cfg);
  ec.integrator = default_integrator(cfg.system.kind);
  const EvalResult result = evaluate(replay, cfg.system, initial_states_of(records), ec);
  export_traces(out, cfg.system, result);
  std::cout << "export-traces: " << result.episodes.size() << " expert episodes to " << out
            << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grpoctrl: text-policy control training workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  Common common;

  auto* config = app.add_subcommand("config", "Configuration helpers");
  config->require_subcommand(1);
  auto* config_init = config->add_subcommand("init", "Print or write the full default config");
  std::string config_out;
  add_common(config_init, common);
  config_init->add_option("--out", config_out, "Write to this file instead of stdout");

  auto* gen = app.add_subcommand("gen-data", "Generate expert demonstrations");
  add_common(gen, common);
  int count = 0;
  int threads = 0;
  std::string gen_out = "data";
  gen->add_option("--count", count, "Records per system (default 2000)");
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");

  auto* sft = app.add_subcommand("sft", "Supervised fine-tuning of the toy policy");
  add_common(sft, common);
  std::string sft_data = "data", sft_out = "runs/sft";
  int sft_steps = 0;
  sft->add_option("--data", sft_data, "Directory holding <system>_train/_eval.jsonl");
  sft->add_option("--out", sft_out, "Run directory");
  sft->add_option("--steps", sft_steps, "SFT steps (default from config)");

  auto* grpo = app.add_subcommand("grpo-train", "GRPO training");
  add_common(grpo, common);
  std::string grpo_ckpt, grpo_preset_name, grpo_data, grpo_out = "runs/grpo", grpo_bridge;
  bool from_scratch = false, bridge_train = false;
  int grpo_steps = -1;
  grpo->add_option("--checkpoint", grpo_ckpt, "SFT checkpoint to start from");
  grpo->add_flag("--from-scratch", from_scratch, "Start from a randomly initialized policy");
  grpo->add_option("--preset", grpo_preset_name, "Hyperparameter preset: table1 | body")
      ->check(CLI::IsMember({"table1", "body"}));
  grpo->add_option("--steps", grpo_steps, "GRPO steps (default from config)");
  grpo->add_option("--data", grpo_data, "Dataset directory for initial states");
  grpo->add_option("--out", grpo_out, "Run directory");
  grpo->add_option("--bridge", grpo_bridge, "Policy bridge: stdio:<cmd> or tcp:<host>:<port>");
  grpo->add_flag("--bridge-train", bridge_train, "Send GRPO updates through the bridge");

  auto* eval = app.add_subcommand("eval", "Evaluate a policy and write aggregate metrics");
  auto* traces = app.add_subcommand("export-traces", "Evaluate and write per-episode CSV traces");
  std::string ev_ckpt, ev_bridge, ev_data, ev_out = "runs/eval";
  int episodes = -1;
  bool expert = false;
  for (auto* cmd : {eval, traces}) {
    add_common(cmd, common);
    cmd->add_option("--checkpoint", ev_ckpt, "Policy checkpoint");
    cmd->add_option("--bridge", ev_bridge, "Policy bridge instead of a checkpoint");
    cmd->add_option("--data", ev_data, "Dataset directory; uses the eval split's states");
    cmd->add_option("--episodes", episodes, "Number of episodes");
    cmd->add_option("--out", ev_out, "Output directory");
  }
  traces->add_flag("--expert", expert, "Export the expert solver's trajectories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (config_init->parsed()) return cmd_config_init(common, config_out);
    if (gen->parsed()) return cmd_gen_data(common, count, gen_out, threads);
    if (sft->parsed()) return cmd_sft(common, sft_data, sft_out, sft_steps, 0);
    if (grpo->parsed())
      return cmd_grpo_train(common, grpo_ckpt, from_scratch, grpo_preset_name, grpo_steps,
                            grpo_data, grpo_out, grpo_bridge, bridge_train);
    if (eval->parsed())
      return cmd_eval(common, ev_ckpt, ev_bridge, ev_data, episodes, ev_out, false);
    if (traces->parsed()) {
      if (expert) return cmd_export_expert(common, ev_data, episodes, ev_out);
      return cmd_eval(common, ev_ckpt, ev_bridge, ev_data, episodes, ev_out, true);
    }
  } catch (const Error& e) {
    std::cerr << "grpoctrl: " << e.what() << '\n';
    if (e.code() == ErrorCode::kSolverFailed) return kSolver;
    if (e.code() == ErrorCode::kBridgeDisconnected) return kDisconnected;
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "grpoctrl: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
