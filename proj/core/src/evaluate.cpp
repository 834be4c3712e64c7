#include "grpoctrl/evaluate.hpp"

#include <random>

#include "grpoctrl/errors.hpp"
#include "json.hpp"

namespace grpoctrl {

using nlohmann::json;

EvalResult evaluate(PolicyHandle& policy, const SystemSpec& spec,
                    std::span<const State> initial_states, const EvalConfig& config) {
  const Integrator integrator = config.integrator.value_or(default_integrator(spec.kind));
  EvalResult out;
  out.episodes.reserve(initial_states.size());
  std::mt19937_64 rng(config.seed);
  for (const State& s0 : initial_states) {
    const PromptBundle prompt = encode_prompt(spec, s0);
    const Completion completion = policy.sample(prompt, 1, config.temperature, rng()).front();
    Episode ep;
    ep.s0 = s0;
    ep.latency_ms = completion.latency_ms;
    const ParseOutcome parsed = parse_response(spec, completion.text);
    ep.status = parsed.status;
    ep.clip_events = parsed.clip_events;
    bool have_traj = false;
    if (parsed.ok()) {
      try {
        ep.trajectory = simulate(spec, s0, *parsed.controls, integrator);
        have_traj = true;
      } catch (const Error&) {
        ep.diverged = true;
      }
    }
    ep.reward = compute_reward(parsed, have_traj ? &ep.trajectory : nullptr, config.weights,
                               config.reward, ep.diverged);
    if (!have_traj) {
      // what a deployed controller would fly after rejecting the response
      ep.used_fallback = true;
      const auto fallback = fallback_controls(spec);
      ep.trajectory = simulate(spec, s0, fallback, integrator);
    }
    ep.metrics = compute_metrics(ep.trajectory);
    out.episodes.push_back(std::move(ep));
  }
  if (!out.episodes.empty()) {
    const double n = static_cast<double>(out.episodes.size());
    int ok = 0;
    for (const auto& ep : out.episodes) {
      out.mean.final_error += ep.metrics.final_error / n;
      out.mean.cost += ep.metrics.cost / n;
      out.mean.effort += ep.metrics.effort / n;
      out.mean.violation_rate += ep.metrics.violation_rate / n;
      out.mean.convergence_quality += ep.metrics.convergence_quality / n;
      out.mean_reward += ep.reward.total / n;
      ok += ep.status == ParseStatus::kOk;
    }
    out.format_compliance = ok / n;
  }
  return out;
}

std::string EvalResult::metrics_json() const {
  const json j = {{"episodes", episodes.size()},
                  {"mean_reward", mean_reward},
                  {"format_compliance", format_compliance},
                  {"final_error", mean.final_error},
                  {"cost", mean.cost},
                  {"effort", mean.effort},
                  {"violation_rate", mean.violation_rate},
                  {"convergence_quality", mean.convergence_quality}};
  return j.dump(2);
}

std::vector<State> sample_initial_states(const SystemSpec& spec, int n, std::uint64_t seed) {
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "episode count must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<State> out;
  for (int k = 0; k < n; ++k) {
    State s(spec.state_dim);
    for (int i = 0; i < spec.state_dim; ++i)
      s[i] = spec.state_lower[i] + unit(rng) * (spec.state_upper[i] - spec.state_lower[i]);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<State> initial_states_of(std::span<const DemonstrationRecord> records) {
  std::vector<State> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.s0);
  return out;
}

}  // namespace grpoctrl
