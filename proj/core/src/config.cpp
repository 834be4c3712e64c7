#include "grpoctrl/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "grpoctrl/errors.hpp"
#include "json.hpp"

namespace grpoctrl {

using nlohmann::json;

namespace {

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index m = n > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Mat out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m)
      throw Error(ErrorCode::kInvalidArgument, "ragged matrix in config");
    for (Eigen::Index k = 0; k < m; ++k) out(i, k) = rows[i][k];
  }
  return out;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json weights_json(const RewardWeights& w) {
  return {{"lqr", w.lqr},       {"terminal", w.terminal},   {"constraint", w.constraint},
          {"format", w.format}, {"auxiliary", w.auxiliary}, {"phase", std::string(to_string(w.phase))}};
}

RewardWeights weights_from(const json& j) {
  RewardWeights w;
  w.lqr = j.at("lqr").get<double>();
  w.terminal = j.at("terminal").get<double>();
  w.constraint = j.at("constraint").get<double>();
  w.format = j.at("format").get<double>();
  w.auxiliary = j.at("auxiliary").get<double>();
  const std::string phase = j.value("phase", "mid");
  w.phase = phase == "early" ? SchedulePhase::kEarly
            : phase == "late" ? SchedulePhase::kLate
                              : SchedulePhase::kMid;
  return w;
}

json reward_config_json(const RewardConfig& r) {
  return {{"terminal_sigma", r.terminal_sigma},
          {"terminal_scale", r.terminal_scale},
          {"bonus_thresholds", r.bonus_thresholds},
          {"bonus_values", r.bonus_values},
          {"violation_penalty", r.violation_penalty},
          {"validity_bonus", r.validity_bonus},
          {"format_bonus", r.format_bonus},
          {"clip_penalty", r.clip_penalty},
          {"length_error_penalty", r.length_error_penalty},
          {"numeric_error_penalty", r.numeric_error_penalty},
          {"format_error_penalty", r.format_error_penalty},
          {"divergence_penalty", r.divergence_penalty},
          {"near_target_radius", r.near_target_radius},
          {"convergence_bonus", r.convergence_bonus}};
}

RewardConfig reward_config_from(const json& j) {
  RewardConfig r;
  r.terminal_sigma = j.value("terminal_sigma", r.terminal_sigma);
  r.terminal_scale = j.value("terminal_scale", r.terminal_scale);
  r.bonus_thresholds = j.value("bonus_thresholds", r.bonus_thresholds);
  r.bonus_values = j.value("bonus_values", r.bonus_values);
  r.violation_penalty = j.value("violation_penalty", r.violation_penalty);
  r.validity_bonus = j.value("validity_bonus", r.validity_bonus);
  r.format_bonus = j.value("format_bonus", r.format_bonus);
  r.clip_penalty = j.value("clip_penalty", r.clip_penalty);
  r.length_error_penalty = j.value("length_error_penalty", r.length_error_penalty);
  r.numeric_error_penalty = j.value("numeric_error_penalty", r.numeric_error_penalty);
  r.format_error_penalty = j.value("format_error_penalty", r.format_error_penalty);
  r.divergence_penalty = j.value("divergence_penalty", r.divergence_penalty);
  r.near_target_radius = j.value("near_target_radius", r.near_target_radius);
  r.convergence_bonus = j.value("convergence_bonus", r.convergence_bonus);
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string version_string() {
#ifdef GRPOCTRL_VERSION
  return GRPOCTRL_VERSION;
#else
  return "unknown";
#endif
}

GrpoConfig grpo_preset(const std::string& name) {
  if (name == "table1") return GrpoConfig::toy(GrpoConfig::table1());
  if (name == "body") return GrpoConfig::toy(GrpoConfig::body());
  throw Error(ErrorCode::kInvalidArgument, "unknown preset: " + name + " (table1|body)");
}

RunConfig default_run_config(SystemKind kind) {
  RunConfig c;
  c.system = make_system(kind);
  if (kind == SystemKind::kOrbitRaising) c.system.params.r_target = 1.8;
  c.output_dir = "runs/" + std::string(to_string(kind));
  c.resolve();
  return c;
}

void RunConfig::resolve() {
  sft.seed = seed;
  grpo.seed = seed;
  if (integrator) grpo.integrator = *integrator;
  grpo.reward = reward;
  if (cost) grpo.reward.cost = *cost;
  grpo.weights_override = reward_weights;
}

void RunConfig::validate() const {
  system.validate();
  grpo.validate();
  if (cost) cost->validate();
  if (dataset_count < 1) throw Error(ErrorCode::kInvalidArgument, "dataset_count must be >= 1");
  if (eval_episodes < 0) throw Error(ErrorCode::kInvalidArgument, "eval_episodes must be >= 0");
  if (sft.steps < 1 || sft.batch_size < 1)
    throw Error(ErrorCode::kInvalidArgument, "sft steps and batch_size must be >= 1");
  if (bridge && !(bridge->timeout_s > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "bridge timeout must be positive");
}

std::string RunConfig::to_json() const {
  json sys = {{"kind", std::string(to_string(system.kind))},
              {"horizon", system.horizon},
              {"num_steps", system.num_steps},
              {"state_lower", vec_json(system.state_lower)},
              {"state_upper", vec_json(system.state_upper)},
              {"control_lower", vec_json(system.control_lower)},
              {"control_upper", vec_json(system.control_upper)},
              {"params",
               {{"mu_vdp", system.params.mu_vdp},
                {"mu_grav", system.params.mu_grav},
                {"thrust", system.params.thrust},
                {"m0", system.params.m0},
                {"m1", system.params.m1},
                {"inertia_diag", system.params.inertia_diag},
                {"r_target", system.params.r_target}}}};
  json j = {
      {"version", version_string()},
      {"system", sys},
      {"integrator", integrator ? json(std::string(to_string(*integrator))) : json(nullptr)},
      {"cost", cost ? json{{"Q", mat_json(cost->Q)}, {"R", mat_json(cost->R)},
                           {"Qf", mat_json(cost->Qf)}}
                    : json(nullptr)},
      {"reward_weights", reward_weights ? weights_json(*reward_weights) : json(nullptr)},
      {"reward", reward_config_json(reward)},
      {"preset", preset},
      {"grpo",
       {{"group_size", grpo.group_size},
        {"epsilon", grpo.epsilon},
        {"kl_coeff", grpo.kl_coeff},
        {"temperature", grpo.temperature},
        {"learning_rate", grpo.learning_rate},
        {"total_steps", grpo.total_steps},
        {"inner_epochs", grpo.inner_epochs},
        {"schedule_offset", grpo.schedule_offset},
        {"ratio_limit", grpo.ratio_limit}}},
      {"sft",
       {{"steps", sft.steps},
        {"batch_size", sft.batch_size},
        {"learning_rate", sft.learning_rate},
        {"min_relative_drop", sft.min_relative_drop},
        {"check_fraction", sft.check_fraction}}},
      {"dataset", {{"count", dataset_count}, {"train", train_path}, {"eval", eval_path}}},
      {"output_dir", output_dir},
      {"eval_episodes", eval_episodes},
      {"seed", seed},
      {"bridge", bridge ? json{{"address", bridge->address},
                               {"timeout_s", bridge->timeout_s},
                               {"train", bridge->train}}
                        : json(nullptr)},
  };
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    if (j.contains("system")) {
      const json& s = j.at("system");
      c.system = make_system(parse_system_kind(s.at("kind").get<std::string>()));
      c.system.horizon = s.value("horizon", c.system.horizon);
      c.system.num_steps = s.value("num_steps", c.system.num_steps);
      if (s.contains("state_lower")) c.system.state_lower = vec_from(s.at("state_lower"));
      if (s.contains("state_upper")) c.system.state_upper = vec_from(s.at("state_upper"));
      if (s.contains("control_lower")) c.system.control_lower = vec_from(s.at("control_lower"));
      if (s.contains("control_upper")) c.system.control_upper = vec_from(s.at("control_upper"));
      if (s.contains("params")) {
        const json& p = s.at("params");
        ParamSet& q = c.system.params;
        q.mu_vdp = p.value("mu_vdp", q.mu_vdp);
        q.mu_grav = p.value("mu_grav", q.mu_grav);
        q.thrust = p.value("thrust", q.thrust);
        q.m0 = p.value("m0", q.m0);
        q.m1 = p.value("m1", q.m1);
        q.inertia_diag = p.value("inertia_diag", q.inertia_diag);
        q.r_target = p.value("r_target", q.r_target);
      }
    }
    if (j.contains("integrator") && !j.at("integrator").is_null())
      c.integrator = parse_integrator(j.at("integrator").get<std::string>());
    if (j.contains("cost") && !j.at("cost").is_null()) {
      const json& w = j.at("cost");
      c.cost = CostWeights{mat_from(w.at("Q")), mat_from(w.at("R")), mat_from(w.at("Qf"))};
    }
    if (j.contains("reward_weights") && !j.at("reward_weights").is_null())
      c.reward_weights = weights_from(j.at("reward_weights"));
    if (j.contains("reward")) c.reward = reward_config_from(j.at("reward"));
    c.preset = j.value("preset", c.preset);
    c.grpo = grpo_preset(c.preset);
    if (j.contains("grpo")) {
      const json& g = j.at("grpo");
      c.grpo.group_size = g.value("group_size", c.grpo.group_size);
      c.grpo.epsilon = g.value("epsilon", c.grpo.epsilon);
      c.grpo.kl_coeff = g.value("kl_coeff", c.grpo.kl_coeff);
      c.grpo.temperature = g.value("temperature", c.grpo.temperature);
      c.grpo.learning_rate = g.value("learning_rate", c.grpo.learning_rate);
      c.grpo.total_steps = g.value("total_steps", c.grpo.total_steps);
      c.grpo.inner_epochs = g.value("inner_epochs", c.grpo.inner_epochs);
      c.grpo.schedule_offset = g.value("schedule_offset", c.grpo.schedule_offset);
      c.grpo.ratio_limit = g.value("ratio_limit", c.grpo.ratio_limit);
    }
    if (j.contains("sft")) {
      const json& s = j.at("sft");
      c.sft.steps = s.value("steps", c.sft.steps);
      c.sft.batch_size = s.value("batch_size", c.sft.batch_size);
      c.sft.learning_rate = s.value("learning_rate", c.sft.learning_rate);
      c.sft.min_relative_drop = s.value("min_relative_drop", c.sft.min_relative_drop);
      c.sft.check_fraction = s.value("check_fraction", c.sft.check_fraction);
    }
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      c.dataset_count = d.value("count", c.dataset_count);
      c.train_path = d.value("train", c.train_path);
      c.eval_path = d.value("eval", c.eval_path);
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.seed = j.value("seed", c.seed);
    if (j.contains("bridge") && !j.at("bridge").is_null()) {
      const json& b = j.at("bridge");
      BridgeEndpoint e;
      e.address = b.at("address").get<std::string>();
      e.timeout_s = b.value("timeout_s", e.timeout_s);
      e.train = b.value("train", e.train);
      c.bridge = e;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed config: ") + e.what());
  }
  c.resolve();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) { return from_json(slurp(path)); }

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << to_json() << '\n';
}

bool apply_seed_override(RunConfig& config) {
  const char* env = std::getenv("GRPOCTRL_SEED");
  if (env == nullptr || *env == '\0') return false;
  std::uint64_t seed = 0;
  const std::string_view text(env);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error(ErrorCode::kInvalidArgument, "GRPOCTRL_SEED must be an unsigned integer");
  config.seed = seed;
  config.resolve();
  return true;
}

}  // namespace grpoctrl
