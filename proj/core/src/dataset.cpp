#include "grpoctrl/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "grpoctrl/codec.hpp"
#include "grpoctrl/errors.hpp"
#include "grpoctrl/reasoning.hpp"
#include "json.hpp"

namespace grpoctrl {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 5> kStrategyNames{"optimal", "alt-energy", "alt-time",
                                                         "suboptimal", "recovery"};

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// 3-decimal value that prints and parses back to itself.
double round3(double v) {
  const std::string s = format_fixed3(v);
  return std::strtod(s.c_str(), nullptr);
}

std::vector<Control> round_controls(const SystemSpec& spec, std::vector<Control> controls) {
  for (auto& c : controls) {
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = round3(c[i]);
    c = clip_to_bounds(c, spec.control_lower, spec.control_upper);
  }
  return controls;
}

CostWeights strategy_weights(const SystemSpec& spec, Strategy strategy) {
  CostWeights w = spec.kind == SystemKind::kDoubleIntegrator ? CostWeights::defaults(spec)
                                                             : expert_weights(spec);
  if (strategy == Strategy::kAltEnergy) w.R *= 10.0;
  if (strategy == Strategy::kAltTime) w.Qf *= 10.0;
  return w;
}

std::vector<Control> solve(const SystemSpec& spec, const State& s0, const CostWeights& w,
                           const ShootingOptions& shooting, int& clip_count) {
  if (spec.kind == SystemKind::kDoubleIntegrator) {
    LqrSolution sol = solve_lqr(spec, s0, w);
    clip_count = sol.clip_count;
    return std::move(sol.controls);
  }
  clip_count = 0;
  return solve_shooting(spec, s0, w, shooting).controls;
}

State sample_uniform(const SystemSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  State s(spec.state_dim);
  for (int i = 0; i < spec.state_dim; ++i)
    s[i] = spec.state_lower[i] + unit(rng) * (spec.state_upper[i] - spec.state_lower[i]);
  return s;
}

// Uniform over the part of the box whose normalized sup-norm is >= 1 - shell.
State sample_shell(const SystemSpec& spec, double shell, std::mt19937_64& rng) {
  for (;;) {
    State s = sample_uniform(spec, rng);
    double z = 0.0;
    for (int i = 0; i < spec.state_dim; ++i) {
      const double c = 0.5 * (spec.state_lower[i] + spec.state_upper[i]);
      const double hw = 0.5 * (spec.state_upper[i] - spec.state_lower[i]);
      z = std::max(z, std::abs(s[i] - c) / hw);
    }
    if (z >= 1.0 - shell) return s;
  }
}

std::string iso_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(Strategy strategy) {
  return kStrategyNames[static_cast<int>(strategy)];
}

Strategy parse_strategy(std::string_view name) {
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
    if (kStrategyNames[i] == name) return static_cast<Strategy>(i);
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy: " + std::string(name));
}

std::string DemonstrationRecord::completion(const SystemSpec& spec) const {
  return render_response(spec, reasoning, controls);
}

Annotations annotate(const SystemSpec& spec, const State& s0, std::span<const Control> controls,
                     int clip_count) {
  const Trajectory traj = simulate(spec, s0, controls, default_integrator(spec.kind));
  Annotations a;
  a.cost = trajectory_cost(traj, CostWeights::defaults(spec));
  a.final_error = (traj.states.back() - traj.target).norm();
  for (std::size_t t = 0; t < controls.size(); ++t) {
    a.control_effort += controls[t].squaredNorm();
    if (t + 1 < controls.size()) a.smoothness += (controls[t + 1] - controls[t]).squaredNorm();
  }
  a.violation_count = traj.count(ViolationKind::kStateBound);
  a.clip_count = clip_count;
  return a;
}

std::string to_json_line(const DemonstrationRecord& r) {
  json controls = json::array();
  for (const auto& c : r.controls) {
    if (c.size() == 1)
      controls.push_back(c[0]);
    else
      controls.push_back(vec_json(c));
  }
  json j = {
      {"system", std::string(to_string(r.system))},
      {"s0", vec_json(r.s0)},
      {"prompt", r.prompt},
      {"reasoning", r.reasoning},
      {"controls", controls},
      {"strategy", std::string(to_string(r.strategy))},
      {"annotations",
       {{"cost", r.annotations.cost},
        {"final_error", r.annotations.final_error},
        {"control_effort", r.annotations.control_effort},
        {"smoothness", r.annotations.smoothness},
        {"violation_count", r.annotations.violation_count},
        {"clip_count", r.annotations.clip_count}}},
  };
  return j.dump();
}

DemonstrationRecord record_from_json(std::string_view line) {
  DemonstrationRecord r;
  try {
    const json j = json::parse(line);
    r.system = parse_system_kind(j.at("system").get<std::string>());
    r.s0 = vec_from(j.at("s0"));
    r.prompt = j.at("prompt").get<std::string>();
    r.reasoning = j.at("reasoning").get<std::string>();
    for (const auto& c : j.at("controls")) {
      if (c.is_number()) {
        Control u(1);
        u[0] = c.get<double>();
        r.controls.push_back(u);
      } else {
        r.controls.push_back(vec_from(c));
      }
    }
    r.strategy = parse_strategy(j.at("strategy").get<std::string>());
    const json& a = j.at("annotations");
    r.annotations.cost = a.at("cost").get<double>();
    r.annotations.final_error = a.at("final_error").get<double>();
    r.annotations.control_effort = a.at("control_effort").get<double>();
    r.annotations.smoothness = a.at("smoothness").get<double>();
    r.annotations.violation_count = a.at("violation_count").get<int>();
    r.annotations.clip_count = a.value("clip_count", 0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed record: ") + e.what());
  }
  return r;
}

std::vector<DemonstrationRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<DemonstrationRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(record_from_json(line));
  return out;
}

void write_records(const std::string& path, std::span<const DemonstrationRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& r : records) out << to_json_line(r) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

int StrategyCounts::total() const {
  int n = 0;
  for (int c : by_strategy) n += c;
  return n;
}

StrategyCounts strategy_quotas(int count, const std::array<double, 4>& mix) {
  StrategyCounts q;
  const auto take = [&](double f) { return static_cast<int>(std::llround(f * count)); };
  const int optimal = take(mix[0]);
  const int alternative = take(mix[1]);
  const int suboptimal = take(mix[2]);
  q.by_strategy[0] = optimal;
  q.by_strategy[1] = alternative - alternative / 2;
  q.by_strategy[2] = alternative / 2;
  q.by_strategy[3] = suboptimal;
  q.by_strategy[4] = std::max(0, count - optimal - alternative - suboptimal);
  return q;
}

DemonstrationRecord make_record(const SystemSpec& spec, const State& s0, Strategy strategy,
                                const ShootingOptions& shooting, double suboptimal_noise,
                                std::uint64_t noise_seed) {
  int clip_count = 0;
  std::vector<Control> controls =
      solve(spec, s0, strategy_weights(spec, strategy), shooting, clip_count);
  if (strategy == Strategy::kSuboptimal) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, suboptimal_noise);
    for (auto& c : controls) {
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= 1.0 + noise(rng);
      const Control clipped = clip_to_bounds(c, spec.control_lower, spec.control_upper);
      if (!clipped.isApprox(c, 0.0)) ++clip_count;
      c = clipped;
    }
  }
  DemonstrationRecord r;
  r.system = spec.kind;
  r.s0 = s0;
  r.strategy = strategy;
  r.controls = round_controls(spec, std::move(controls));
  r.prompt = encode_prompt(spec, s0).text();
  r.annotations = annotate(spec, s0, r.controls, clip_count);
  const Trajectory traj = simulate(spec, s0, r.controls, default_integrator(spec.kind));
  r.reasoning = generate_reasoning({spec, s0, strategy, traj, r.annotations});
  return r;
}

GeneratedDataset build_dataset(const SystemSpec& spec, const DatasetOptions& options) {
  spec.validate();
  if (options.count < 1) throw Error(ErrorCode::kInvalidArgument, "count must be >= 1");
  const int count = options.count;
  const int eval_count = options.eval_count >= 0 ? options.eval_count : count / 10;
  if (eval_count > count) throw Error(ErrorCode::kInvalidArgument, "eval_count exceeds count");
  const int budget = options.failure_budget >= 0 ? options.failure_budget : count / 10 + 10;

  const StrategyCounts quotas = strategy_quotas(count, options.mix);
  std::vector<Strategy> assignment;
  assignment.reserve(count);
  for (std::size_t s = 0; s < kAllStrategies.size(); ++s)
    assignment.insert(assignment.end(), quotas.by_strategy[s], kAllStrategies[s]);
  std::mt19937_64 shuffle_rng(options.seed);
  std::shuffle(assignment.begin(), assignment.end(), shuffle_rng);

  std::vector<DemonstrationRecord> records(count);
  std::atomic<int> next{0};
  std::atomic<int> failures{0};
  std::atomic<bool> exhausted{false};
  std::mutex log_mutex;

  const auto work = [&] {
    for (int i = next++; i < count && !exhausted; i = next++) {
      for (int attempt = 0;; ++attempt) {
        std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                          static_cast<std::uint32_t>(options.seed >> 32),
                          static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(attempt)};
        std::mt19937_64 rng(seq);
        const Strategy strategy = assignment[i];
        const State s0 = strategy == Strategy::kRecovery
                             ? sample_shell(spec, options.recovery_shell, rng)
                             : sample_uniform(spec, rng);
        ShootingOptions shooting = options.shooting;
        shooting.seed = rng();
        const std::uint64_t noise_seed = rng();
        try {
          records[i] = make_record(spec, s0, strategy, shooting, options.suboptimal_noise,
                                   noise_seed);
          break;
        } catch (const Error& e) {
          const int failed = ++failures;
          if (options.on_resample) {
            std::lock_guard lock(log_mutex);
            options.on_resample(i, e.what());
          }
          if (failed > budget || attempt + 1 >= options.max_attempts) {
            exhausted = true;
            break;
          }
        }
      }
    }
  };

  int threads = options.threads > 0 ? options.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (exhausted)
    throw Error(ErrorCode::kSolverFailed, "dataset generation exceeded its solver failure budget");

  GeneratedDataset out;
  out.resampled = failures;
  const int train_count = count - eval_count;
  out.train.assign(std::make_move_iterator(records.begin()),
                   std::make_move_iterator(records.begin() + train_count));
  out.eval.assign(std::make_move_iterator(records.begin() + train_count),
                  std::make_move_iterator(records.end()));
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string DatasetManifest::to_json() const {
  json counts = json::object();
  json targets = json::object();
  for (std::size_t s = 0; s < kAllStrategies.size(); ++s)
    counts[std::string(kStrategyNames[s])] = realized.by_strategy[s];
  targets["optimal"] = mix[0];
  targets["alternative"] = mix[1];
  targets["suboptimal"] = mix[2];
  targets["recovery"] = mix[3];
  const json j = {
      {"system", std::string(to_string(system))},
      {"count", count},
      {"split", {{"train", train_count}, {"eval", eval_count}}},
      {"strategy_targets", targets},
      {"strategy_counts", counts},
      {"seed", seed},
      {"resampled", resampled},
      {"generated_at", generated_at},
      {"files", {{"train", train_path}, {"eval", eval_path}}},
      {"records_hash", records_hash},
  };
  return j.dump(2);
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.system = parse_system_kind(j.at("system").get<std::string>());
    m.count = j.at("count").get<int>();
    m.train_count = j.at("split").at("train").get<int>();
    m.eval_count = j.at("split").at("eval").get<int>();
    const json& t = j.at("strategy_targets");
    m.mix = {t.at("optimal").get<double>(), t.at("alternative").get<double>(),
             t.at("suboptimal").get<double>(), t.at("recovery").get<double>()};
    for (std::size_t s = 0; s < kAllStrategies.size(); ++s)
      m.realized.by_strategy[s] = j.at("strategy_counts").at(std::string(kStrategyNames[s]));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.resampled = j.value("resampled", 0);
    m.generated_at = j.value("generated_at", "");
    m.train_path = j.at("files").at("train").get<std::string>();
    m.eval_path = j.at("files").at("eval").get<std::string>();
    m.records_hash = j.value("records_hash", "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

DatasetManifest generate_dataset(const SystemSpec& spec, const DatasetOptions& options,
                                 const std::string& out_dir) {
  namespace fs = std::filesystem;
  const GeneratedDataset data = build_dataset(spec, options);
  fs::create_directories(out_dir);
  const std::string stem = std::string(to_string(spec.kind));
  const fs::path train_path = fs::path(out_dir) / (stem + "_train.jsonl");
  const fs::path eval_path = fs::path(out_dir) / (stem + "_eval.jsonl");
  const fs::path manifest_path = fs::path(out_dir) / (stem + "_manifest.json");
  // a stale manifest must never describe fresh record files
  fs::remove(manifest_path);
  write_records(train_path.string(), data.train);
  write_records(eval_path.string(), data.eval);

  DatasetManifest m;
  m.system = spec.kind;
  m.count = options.count;
  m.train_count = static_cast<int>(data.train.size());
  m.eval_count = static_cast<int>(data.eval.size());
  m.mix = options.mix;
  for (const auto* split : {&data.train, &data.eval})
    for (const auto& r : *split) ++m.realized.by_strategy[static_cast<int>(r.strategy)];
  m.seed = options.seed;
  m.resampled = data.resampled;
  m.generated_at = iso_utc_now();
  m.train_path = train_path.string();
  m.eval_path = eval_path.string();
  m.records_hash = hex64(fnv1a(slurp(m.eval_path), fnv1a(slurp(m.train_path))));

  const fs::path tmp = manifest_path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << m.to_json() << '\n';
  }
  fs::rename(tmp, manifest_path);
  return m;
}

DatasetManifest read_manifest(const std::string& path) {
  return DatasetManifest::from_json(slurp(path));
}

}  // namespace grpoctrl
