#include "grpoctrl/sft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "grpoctrl/errors.hpp"
#include "grpoctrl/optim.hpp"

namespace grpoctrl {
namespace {

struct Example {
  PromptBundle prompt;
  std::string completion;
};

std::vector<Example> examples_of(const SystemSpec& spec,
                                 std::span<const DemonstrationRecord> records) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({encode_prompt(spec, r.s0), r.completion(spec)});
  return out;
}

double mean_nll(PolicyHandle& policy, const std::vector<Example>& examples) {
  double total = 0.0;
  for (const auto& e : examples) total -= policy.logprob(e.prompt, e.completion);
  return examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
}

}  // namespace

double sft_loss(PolicyHandle& policy, const SystemSpec& spec,
                std::span<const DemonstrationRecord> records) {
  return mean_nll(policy, examples_of(spec, records));
}

double format_compliance(PolicyHandle& policy, const SystemSpec& spec,
                         std::span<const DemonstrationRecord> records) {
  if (records.empty()) return 0.0;
  int ok = 0;
  for (const auto& r : records) {
    const auto completions = policy.sample(encode_prompt(spec, r.s0), 1, 0.0, 0);
    ok += parse_response(spec, completions.front().text).ok();
  }
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

SftReport sft_fit(PolicyHandle& policy, const SystemSpec& spec,
                  std::span<const DemonstrationRecord> train,
                  std::span<const DemonstrationRecord> eval, const SftConfig& config) {
  if (!policy.differentiable())
    throw Error(ErrorCode::kInvalidArgument, "SFT needs a differentiable policy");
  if (train.empty()) throw Error(ErrorCode::kInvalidArgument, "SFT needs a nonempty dataset");
  if (config.steps < 1 || config.batch_size < 1)
    throw Error(ErrorCode::kInvalidArgument, "steps and batch_size must be >= 1");

  const std::vector<Example> examples = examples_of(spec, train);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);
  std::shuffle(order.begin(), order.end(), rng);

  Adam adam;
  adam.learning_rate = config.learning_rate;
  SftReport report;
  report.initial_loss = mean_nll(policy, examples);
  const int check_step = std::max(1, static_cast<int>(std::ceil(config.check_fraction * config.steps)));
  const std::size_t batch = std::min<std::size_t>(config.batch_size, examples.size());
  std::size_t cursor = 0;

  for (int step = 0; step < config.steps; ++step) {
    Vec grad;
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Example& e = examples[order[cursor++]];
      loss -= policy.logprob(e.prompt, e.completion);
      const Vec g = policy.logprob_gradient(e.prompt, e.completion);
      if (grad.size() == 0) grad = Vec::Zero(g.size());
      grad -= g;
    }
    report.batch_losses.push_back(loss / static_cast<double>(batch));
    grad /= static_cast<double>(batch);
    Vec theta = policy.parameters();
    adam.step(theta, grad);
    policy.set_parameters(theta);

    if (step + 1 == check_step) {
      report.checkpoint_loss = mean_nll(policy, examples);
      const double drop = report.initial_loss - report.checkpoint_loss;
      if (!(drop >= config.min_relative_drop * std::abs(report.initial_loss)))
        throw Error(ErrorCode::kNonDecreasingLoss,
                    "SFT loss did not drop by the required fraction in the first quarter");
    }
  }
  report.final_loss = mean_nll(policy, examples);
  report.eval_records = static_cast<int>(eval.size());
  report.format_compliance = format_compliance(policy, spec, eval);
  policy.snapshot();
  return report;
}

}  // namespace grpoctrl
