#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grpoctrl/codec.hpp"
#include "grpoctrl/demonstration.hpp"
#include "grpoctrl/system.hpp"

namespace grpoctrl {

struct Completion {
  std::string text;
  double logprob = 0.0;  // under the parameters current at sampling time
  double latency_ms = 0.0;
  bool timed_out = false;
};

/// A stochastic text policy pi(completion | prompt).
///
/// sample() and logprob() may be called concurrently between parameter
/// updates. snapshot() records the current parameters as the old policy;
/// restore() reverts to the last snapshot.
class PolicyHandle {
 public:
  virtual ~PolicyHandle() = default;

  virtual std::vector<Completion> sample(const PromptBundle& prompt, int n, double temperature,
                                         std::uint64_t seed) = 0;
  virtual double logprob(const PromptBundle& prompt, std::string_view completion) = 0;
  virtual void snapshot() = 0;
  virtual void restore() = 0;

  /// Policies that expose parameters and d logprob / d theta.
  virtual bool differentiable() const { return false; }
  virtual Vec parameters() const;
  virtual void set_parameters(const Vec& theta);
  virtual Vec logprob_gradient(const PromptBundle& prompt, std::string_view completion);

  /// Non-differentiable policies receive the per-completion loss weights
  /// dL/dlogprob_j and update themselves.
  virtual void update(const PromptBundle& prompt, std::span<const std::string> completions,
                      std::span<const double> loss_weights);
};

/// Desk-scale stand-in for a language model: the control sequence is a
/// Gaussian with mean W [s0; 1] and per-dimension learnable log std.
///
/// Samples are rounded to 3 decimals and rendered through the response
/// grammar. logprob() reads the pre-clip values back out of the text and
/// returns sum_d [log N(x_d; mu_d, sigma_d) + log(0.001)]: the log density
/// times the rounding bin width, so exp(logprob) sums to ~1 over the
/// discrete completion space. Sampling temperature scales sigma; logprob is
/// always evaluated at unit temperature.
class GaussianSequencePolicy final : public PolicyHandle {
 public:
  static constexpr double kBinWidth = 1e-3;

  /// W ~ N(0, init_scale^2), log std = log(init_std).
  GaussianSequencePolicy(const SystemSpec& spec, std::uint64_t seed, double init_std = 1.0,
                         double init_scale = 0.01, double min_std = 0.05);

  std::vector<Completion> sample(const PromptBundle& prompt, int n, double temperature,
                                 std::uint64_t seed) override;
  double logprob(const PromptBundle& prompt, std::string_view completion) override;
  void snapshot() override { old_ = parameters(); }
  void restore() override;

  bool differentiable() const override { return true; }
  Vec parameters() const override;
  void set_parameters(const Vec& theta) override;
  Vec logprob_gradient(const PromptBundle& prompt, std::string_view completion) override;

  /// Closed-form log density of raw (pre-clip) control values.
  double logprob_values(const State& s0, std::span<const double> values) const;
  Vec logprob_values_gradient(const State& s0, std::span<const double> values) const;

  Vec mean(const State& s0) const;
  Vec stddev() const;
  std::vector<Control> mean_controls(const State& s0) const;

  const SystemSpec& spec() const { return spec_; }
  int output_dim() const { return static_cast<int>(w_.rows()); }
  int feature_dim() const { return static_cast<int>(w_.cols()); }
  double min_std() const { return min_std_; }
  const Mat& weights() const { return w_; }
  const Vec& log_std() const { return log_std_; }
  void set_weights(const Mat& w);
  void set_log_std(const Vec& log_std);

  /// Versioned JSON checkpoint.
  std::string to_checkpoint() const;
  static GaussianSequencePolicy from_checkpoint(const std::string& text);
  void save(const std::string& path) const;
  static GaussianSequencePolicy load(const std::string& path);

 private:
  Vec features(const State& s0) const;
  std::vector<double> values_from_text(std::string_view completion) const;

  SystemSpec spec_;
  Mat w_;
  Vec log_std_;
  double min_std_;
  Vec old_;
};

/// Emits the stored expert completion for each known prompt; unknown prompts
/// get the fallback (all-zero) controls. logprob is 0 for the stored
/// completion and -inf for anything else.
class ReplayPolicy final : public PolicyHandle {
 public:
  ReplayPolicy(const SystemSpec& spec, std::span<const DemonstrationRecord> records);

  std::vector<Completion> sample(const PromptBundle& prompt, int n, double temperature,
                                 std::uint64_t seed) override;
  double logprob(const PromptBundle& prompt, std::string_view completion) override;
  void snapshot() override {}
  void restore() override {}

 private:
  const std::string& lookup(const PromptBundle& prompt) const;

  SystemSpec spec_;
  std::map<std::string, std::string> by_prompt_;
  std::string fallback_;
};

}  // namespace grpoctrl
