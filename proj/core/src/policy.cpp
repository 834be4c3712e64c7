#include "grpoctrl/policy.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "grpoctrl/errors.hpp"
#include "json.hpp"

namespace grpoctrl {

using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "grpoctrl.gaussian-sequence-policy";
constexpr int kCheckpointVersion = 1;
constexpr const char* kToyReasoning = "Sampled from the Gaussian sequence policy.";

double round3(double v) { return std::strtod(format_fixed3(v).c_str(), nullptr); }

}  // namespace

Vec PolicyHandle::parameters() const {
  throw Error(ErrorCode::kInvalidArgument, "policy does not expose parameters");
}

void PolicyHandle::set_parameters(const Vec&) {
  throw Error(ErrorCode::kInvalidArgument, "policy does not expose parameters");
}

Vec PolicyHandle::logprob_gradient(const PromptBundle&, std::string_view) {
  throw Error(ErrorCode::kInvalidArgument, "policy is not differentiable");
}

void PolicyHandle::update(const PromptBundle&, std::span<const std::string>,
                          std::span<const double>) {
  throw Error(ErrorCode::kInvalidArgument, "policy does not accept external updates");
}

GaussianSequencePolicy::GaussianSequencePolicy(const SystemSpec& spec, std::uint64_t seed,
                                               double init_std, double init_scale,
                                               double min_std)
    : spec_(spec), min_std_(min_std) {
  spec_.validate();
  if (!(init_std > 0.0) || !(min_std > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "standard deviations must be positive");
  const int out = spec.num_steps * spec.control_dim;
  w_ = Mat::Zero(out, spec.state_dim + 1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, init_scale);
  for (int i = 0; i < w_.rows(); ++i)
    for (int j = 0; j < w_.cols(); ++j) w_(i, j) = normal(rng);
  log_std_ = Vec::Constant(out, std::log(init_std));
  old_ = parameters();
}

Vec GaussianSequencePolicy::features(const State& s0) const {
  if (s0.size() != spec_.state_dim)
    throw Error(ErrorCode::kDimensionMismatch, "initial state dimension mismatch");
  Vec phi(spec_.state_dim + 1);
  phi.head(spec_.state_dim) = s0;
  phi[spec_.state_dim] = 1.0;
  return phi;
}

Vec GaussianSequencePolicy::mean(const State& s0) const { return w_ * features(s0); }

Vec GaussianSequencePolicy::stddev() const {
  return log_std_.array().max(std::log(min_std_)).exp().matrix();
}

std::vector<Control> GaussianSequencePolicy::mean_controls(const State& s0) const {
  const Vec mu = mean(s0);
  std::vector<Control> out;
  for (int k = 0; k < spec_.num_steps; ++k)
    out.emplace_back(mu.segment(k * spec_.control_dim, spec_.control_dim));
  return out;
}

std::vector<Completion> GaussianSequencePolicy::sample(const PromptBundle& prompt, int n,
                                                       double temperature,
                                                       std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  if (temperature < 0.0) throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  const Vec mu = mean(prompt.s0);
  const Vec sigma = stddev() * temperature;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Completion> out;
  out.reserve(n);
  std::vector<double> values(mu.size());
  for (int j = 0; j < n; ++j) {
    for (Eigen::Index d = 0; d < mu.size(); ++d) values[d] = round3(mu[d] + sigma[d] * normal(rng));
    // Render the raw values; out-of-range ones are the parser's to clip.
    std::vector<Control> seq;
    for (int k = 0; k < spec_.num_steps; ++k)
      seq.push_back(Eigen::Map<const Vec>(values.data() + k * spec_.control_dim,
                                          spec_.control_dim));
    Completion c;
    c.text = render_response(spec_, kToyReasoning, seq);
    c.logprob = logprob_values(prompt.s0, values);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<double> GaussianSequencePolicy::values_from_text(std::string_view completion) const {
  ParseOutcome parsed = parse_response(spec_, completion);
  if (!parsed.ok()) return {};
  return std::move(parsed.raw_values);
}

double GaussianSequencePolicy::logprob_values(const State& s0,
                                              std::span<const double> values) const {
  const Vec mu = mean(s0);
  if (static_cast<Eigen::Index>(values.size()) != mu.size())
    return -std::numeric_limits<double>::infinity();
  const Vec log_sigma = log_std_.array().max(std::log(min_std_)).matrix();
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi) + std::log(kBinWidth);
  double lp = 0.0;
  for (Eigen::Index d = 0; d < mu.size(); ++d) {
    const double z = (values[d] - mu[d]) / std::exp(log_sigma[d]);
    lp += -0.5 * z * z - log_sigma[d] + log_norm;
  }
  return lp;
}

Vec GaussianSequencePolicy::logprob_values_gradient(const State& s0,
                                                    std::span<const double> values) const {
  const Vec phi = features(s0);
  const Vec mu = w_ * phi;
  if (static_cast<Eigen::Index>(values.size()) != mu.size())
    throw Error(ErrorCode::kDimensionMismatch, "completion has the wrong number of values");
  const Eigen::Index rows = w_.rows(), cols = w_.cols();
  Vec grad = Vec::Zero(rows * cols + rows);
  const double floor = std::log(min_std_);
  for (Eigen::Index d = 0; d < rows; ++d) {
    const double log_sigma = std::max(log_std_[d], floor);
    const double sigma = std::exp(log_sigma);
    const double z = (values[d] - mu[d]) / sigma;
    const double dmu = z / sigma;
    for (Eigen::Index k = 0; k < cols; ++k) grad[d * cols + k] = dmu * phi[k];
    grad[rows * cols + d] = log_std_[d] > floor ? z * z - 1.0 : 0.0;
  }
  return grad;
}

double GaussianSequencePolicy::logprob(const PromptBundle& prompt, std::string_view completion) {
  return logprob_values(prompt.s0, values_from_text(completion));
}

Vec GaussianSequencePolicy::logprob_gradient(const PromptBundle& prompt,
                                             std::string_view completion) {
  const auto values = values_from_text(completion);
  if (values.empty()) return Vec::Zero(parameters().size());
  return logprob_values_gradient(prompt.s0, values);
}

Vec GaussianSequencePolicy::parameters() const {
  const Eigen::Index rows = w_.rows(), cols = w_.cols();
  Vec theta(rows * cols + rows);
  for (Eigen::Index d = 0; d < rows; ++d)
    for (Eigen::Index k = 0; k < cols; ++k) theta[d * cols + k] = w_(d, k);
  theta.tail(rows) = log_std_;
  return theta;
}

void GaussianSequencePolicy::set_parameters(const Vec& theta) {
  const Eigen::Index rows = w_.rows(), cols = w_.cols();
  if (theta.size() != rows * cols + rows)
    throw Error(ErrorCode::kDimensionMismatch, "parameter vector has the wrong size");
  for (Eigen::Index d = 0; d < rows; ++d)
    for (Eigen::Index k = 0; k < cols; ++k) w_(d, k) = theta[d * cols + k];
  log_std_ = theta.tail(rows);
}

void GaussianSequencePolicy::restore() { set_parameters(old_); }

void GaussianSequencePolicy::set_weights(const Mat& w) {
  if (w.rows() != w_.rows() || w.cols() != w_.cols())
    throw Error(ErrorCode::kDimensionMismatch, "weight matrix has the wrong shape");
  w_ = w;
}

void GaussianSequencePolicy::set_log_std(const Vec& log_std) {
  if (log_std.size() != log_std_.size())
    throw Error(ErrorCode::kDimensionMismatch, "log std has the wrong size");
  log_std_ = log_std;
}

std::string GaussianSequencePolicy::to_checkpoint() const {
  json w = json::array();
  for (Eigen::Index d = 0; d < w_.rows(); ++d) {
    json row = json::array();
    for (Eigen::Index k = 0; k < w_.cols(); ++k) row.push_back(w_(d, k));
    w.push_back(std::move(row));
  }
  const json j = {
      {"format", kCheckpointFormat},
      {"version", kCheckpointVersion},
      {"system", std::string(to_string(spec_.kind))},
      {"state_dim", spec_.state_dim},
      {"control_dim", spec_.control_dim},
      {"num_steps", spec_.num_steps},
      {"horizon", spec_.horizon},
      {"r_target", spec_.params.r_target},
      {"min_std", min_std_},
      {"weights", w},
      {"log_std", std::vector<double>(log_std_.data(), log_std_.data() + log_std_.size())},
  };
  return j.dump(2);
}

GaussianSequencePolicy GaussianSequencePolicy::from_checkpoint(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw Error(ErrorCode::kInvalidArgument, "not a Gaussian sequence policy checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw Error(ErrorCode::kInvalidArgument, "unsupported checkpoint version");
    SystemSpec spec = make_system(parse_system_kind(j.at("system").get<std::string>()));
    spec.num_steps = j.at("num_steps").get<int>();
    spec.horizon = j.at("horizon").get<double>();
    spec.params.r_target = j.value("r_target", spec.params.r_target);
    if (j.at("state_dim").get<int>() != spec.state_dim ||
        j.at("control_dim").get<int>() != spec.control_dim)
      throw Error(ErrorCode::kDimensionMismatch, "checkpoint dimensions do not match system");
    GaussianSequencePolicy policy(spec, 0, 1.0, 0.0, j.at("min_std").get<double>());
    const auto& rows = j.at("weights");
    Mat w(policy.w_.rows(), policy.w_.cols());
    if (static_cast<Eigen::Index>(rows.size()) != w.rows())
      throw Error(ErrorCode::kDimensionMismatch, "checkpoint weight rows mismatch");
    for (Eigen::Index d = 0; d < w.rows(); ++d) {
      const auto row = rows[d].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != w.cols())
        throw Error(ErrorCode::kDimensionMismatch, "checkpoint weight columns mismatch");
      for (Eigen::Index k = 0; k < w.cols(); ++k) w(d, k) = row[k];
    }
    const auto ls = j.at("log_std").get<std::vector<double>>();
    policy.set_weights(w);
    policy.set_log_std(Eigen::Map<const Vec>(ls.data(), static_cast<Eigen::Index>(ls.size())));
    policy.snapshot();
    return policy;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed checkpoint: ") + e.what());
  }
}

void GaussianSequencePolicy::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << to_checkpoint() << '\n';
}

GaussianSequencePolicy GaussianSequencePolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_checkpoint(ss.str());
}

ReplayPolicy::ReplayPolicy(const SystemSpec& spec, std::span<const DemonstrationRecord> records)
    : spec_(spec),
      fallback_(render_response(spec, "Fallback.", fallback_controls(spec))) {
  for (const auto& r : records) by_prompt_[r.prompt] = r.completion(spec);
}

const std::string& ReplayPolicy::lookup(const PromptBundle& prompt) const {
  const auto it = by_prompt_.find(prompt.text());
  return it == by_prompt_.end() ? fallback_ : it->second;
}

std::vector<Completion> ReplayPolicy::sample(const PromptBundle& prompt, int n, double,
                                             std::uint64_t) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  return std::vector<Completion>(n, Completion{lookup(prompt), 0.0});
}

double ReplayPolicy::logprob(const PromptBundle& prompt, std::string_view completion) {
  return completion == lookup(prompt) ? 0.0 : -std::numeric_limits<double>::infinity();
}

}  // namespace grpoctrl
