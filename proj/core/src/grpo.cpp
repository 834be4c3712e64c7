#include "grpoctrl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "grpoctrl/errors.hpp"
#include "json.hpp"

namespace grpoctrl {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json reward_json(const RewardBreakdown& r) {
  return {{"lqr", r.lqr},           {"terminal", r.terminal},   {"constraint", r.constraint},
          {"format", r.format},     {"auxiliary", r.auxiliary}, {"total", r.total}};
}

}  // namespace

GrpoConfig GrpoConfig::table1() { return GrpoConfig{}; }

GrpoConfig GrpoConfig::body() {
  GrpoConfig c;
  c.learning_rate = 3e-6;
  c.group_size = 4;
  c.kl_coeff = 0.01;
  return c;
}

GrpoConfig GrpoConfig::toy(const GrpoConfig& preset) {
  GrpoConfig c = preset;
  c.learning_rate = preset.learning_rate * 300.0;
  return c;
}

void GrpoConfig::validate() const {
  if (group_size < 2) throw Error(ErrorCode::kInvalidArgument, "group size must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "epsilon must lie in (0, 1)");
  if (!(kl_coeff >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "KL coefficient must be >= 0");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  if (!(learning_rate >= 0.0))
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be >= 0");
  if (total_steps < 0) throw Error(ErrorCode::kInvalidArgument, "total_steps must be >= 0");
  if (inner_epochs < 1) throw Error(ErrorCode::kInvalidArgument, "inner_epochs must be >= 1");
  if (schedule_offset < 0) throw Error(ErrorCode::kInvalidArgument, "schedule_offset must be >= 0");
  if (!(ratio_limit > 0.0)) throw Error(ErrorCode::kInvalidArgument, "ratio_limit must be > 0");
}

void compute_advantages(GroupSample& group) {
  if (group.completions.empty()) return;
  double mean = 0.0;
  for (const auto& c : group.completions) mean += c.reward.total;
  mean /= static_cast<double>(group.completions.size());
  for (auto& c : group.completions) c.advantage = c.reward.total - mean;
}

LossResult grpo_loss(const GroupSample& group, double epsilon, double kl_coeff,
                     double ratio_limit) {
  const int n = static_cast<int>(group.completions.size());
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "a group needs at least 2 completions");
  LossResult out;
  out.ratios.resize(n);
  out.clipped.resize(n);
  out.dloss_dlogprob.resize(n);
  int clipped = 0;
  for (int j = 0; j < n; ++j) {
    const auto& c = group.completions[j];
    // identical values (including both -inf for unparseable text) mean ratio 1
    const double delta = c.logprob_new == c.logprob_old ? 0.0 : c.logprob_new - c.logprob_old;
    if (!(std::abs(delta) <= ratio_limit))
      throw Error(ErrorCode::kRatioOverflow, "log-probability ratio out of range");
    const double r = std::exp(delta);
    const double a = c.advantage;
    const double unclipped = r * a;
    const double clipped_term = std::clamp(r, 1.0 - epsilon, 1.0 + epsilon) * a;
    const bool clip_active = clipped_term < unclipped;
    out.ratios[j] = r;
    out.clipped[j] = clip_active;
    clipped += clip_active;
    out.surrogate += std::min(unclipped, clipped_term);
    out.kl += -delta + r - 1.0;
    out.dloss_dlogprob[j] = ((clip_active ? 0.0 : -a * r) + kl_coeff * (r - 1.0)) / n;
  }
  out.surrogate /= n;
  out.kl /= n;
  out.loss = -out.surrogate + kl_coeff * out.kl;
  out.clip_fraction = static_cast<double>(clipped) / n;
  return out;
}

Vec grpo_loss_gradient(PolicyHandle& policy, const GroupSample& group, const LossResult& loss) {
  Vec grad;
  for (std::size_t j = 0; j < group.completions.size(); ++j) {
    if (loss.dloss_dlogprob[j] == 0.0) continue;
    const Vec g = policy.logprob_gradient(group.prompt, group.completions[j].text);
    if (grad.size() == 0) grad = Vec::Zero(g.size());
    grad += loss.dloss_dlogprob[j] * g;
  }
  if (grad.size() == 0) grad = Vec::Zero(policy.parameters().size());
  return grad;
}

std::string StepReport::to_json_line() const {
  json cands = json::array();
  for (const auto& c : candidates) {
    cands.push_back({{"status", std::string(to_string(c.parse.status))},
                     {"clip_events", c.parse.clip_events},
                     {"diverged", c.diverged},
                     {"logprob_old", c.logprob_old},
                     {"logprob_new", c.logprob_new},
                     {"advantage", c.advantage},
                     {"reward", reward_json(c.reward)},
                     {"latency_ms", c.latency_ms},
                     {"timed_out", c.timed_out}});
  }
  const json j = {{"step", step},
                  {"phase", std::string(to_string(phase))},
                  {"s0", vec_json(s0)},
                  {"mean_reward", mean_reward},
                  {"max_reward", max_reward},
                  {"min_reward", min_reward},
                  {"loss", loss},
                  {"kl", kl},
                  {"clip_fraction", clip_fraction},
                  {"format_compliance", format_compliance},
                  {"grad_norm", grad_norm},
                  {"mean_latency_ms", mean_latency_ms},
                  {"timeouts", timeouts},
                  {"candidates", cands}};
  return j.dump();
}

State training_state(const SystemSpec& spec, const std::vector<State>& pool, std::uint64_t seed,
                     int step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), 0x5eedu};
  std::mt19937_64 rng(seq);
  if (!pool.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  State s(spec.state_dim);
  for (int i = 0; i < spec.state_dim; ++i)
    s[i] = spec.state_lower[i] + unit(rng) * (spec.state_upper[i] - spec.state_lower[i]);
  return s;
}

GrpoTrainer::GrpoTrainer(PolicyHandle& policy, SystemSpec spec, GrpoConfig config,
                         std::vector<State> initial_states)
    : policy_(policy),
      spec_(std::move(spec)),
      config_(std::move(config)),
      initial_states_(std::move(initial_states)) {
  spec_.validate();
  config_.validate();
  adam_.learning_rate = config_.learning_rate;
}

GroupSample GrpoTrainer::score(const PromptBundle& prompt,
                               const std::vector<Completion>& completions,
                               int step_index) const {
  const RewardWeights weights = config_.weights_override
                                    ? *config_.weights_override
                                    : schedule_weights(step_index + config_.schedule_offset);
  GroupSample group;
  group.prompt = prompt;
  group.completions.reserve(completions.size());
  for (const auto& c : completions) {
    CandidateRecord rec;
    rec.text = c.text;
    rec.logprob_old = c.logprob;
    rec.logprob_new = c.logprob;
    rec.latency_ms = c.latency_ms;
    rec.timed_out = c.timed_out;
    rec.parse = parse_response(spec_, c.text);
    std::optional<Trajectory> traj;
    if (rec.parse.ok()) {
      try {
        traj = simulate(spec_, prompt.s0, *rec.parse.controls, config_.integrator);
      } catch (const Error&) {
        rec.diverged = true;
      }
    }
    rec.reward = compute_reward(rec.parse, traj ? &*traj : nullptr, weights, config_.reward,
                                rec.diverged);
    group.completions.push_back(std::move(rec));
  }
  compute_advantages(group);
  return group;
}

StepReport GrpoTrainer::step(int step_index) {
  policy_.snapshot();
  StepReport report;
  report.step = step_index;
  report.phase = config_.weights_override
                     ? config_.weights_override->phase
                     : schedule_weights(step_index + config_.schedule_offset).phase;
  report.s0 = training_state(spec_, initial_states_, config_.seed, step_index);
  const PromptBundle prompt = encode_prompt(spec_, report.s0);

  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed),
                    static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(step_index), 0xca1du};
  std::mt19937_64 rng(seq);
  const auto completions =
      policy_.sample(prompt, config_.group_size, config_.temperature, rng());
  GroupSample group = score(prompt, completions, step_index);

  try {
    for (int epoch = 0; epoch < config_.inner_epochs; ++epoch) {
      if (epoch > 0)
        for (auto& c : group.completions) c.logprob_new = policy_.logprob(prompt, c.text);
      const LossResult loss =
          grpo_loss(group, config_.epsilon, config_.kl_coeff, config_.ratio_limit);
      if (epoch == 0) {
        report.loss = loss.loss;
        report.kl = loss.kl;
        report.clip_fraction = loss.clip_fraction;
      }
      if (policy_.differentiable()) {
        const Vec grad = grpo_loss_gradient(policy_, group, loss);
        if (epoch == 0) report.grad_norm = grad.norm();
        Vec theta = policy_.parameters();
        adam_.step(theta, grad);
        policy_.set_parameters(theta);
      } else {
        std::vector<std::string> texts;
        for (const auto& c : group.completions) texts.push_back(c.text);
        policy_.update(prompt, texts, loss.dloss_dlogprob);
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kRatioOverflow) policy_.restore();
    throw;
  }

  const double n = static_cast<double>(group.completions.size());
  report.max_reward = -std::numeric_limits<double>::infinity();
  report.min_reward = std::numeric_limits<double>::infinity();
  int ok = 0;
  for (const auto& c : group.completions) {
    report.mean_reward += c.reward.total / n;
    report.max_reward = std::max(report.max_reward, c.reward.total);
    report.min_reward = std::min(report.min_reward, c.reward.total);
    report.mean_latency_ms += c.latency_ms / n;
    ok += c.parse.ok();
    report.timeouts += c.timed_out;
  }
  report.format_compliance = ok / n;
  report.candidates = std::move(group.completions);
  return report;
}

}  // namespace grpoctrl
