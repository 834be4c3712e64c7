#include <benchmark/benchmark.h>

#include "grpoctrl/codec.hpp"
#include "grpoctrl/expert.hpp"
#include "grpoctrl/grpo.hpp"
#include "grpoctrl/policy.hpp"

using namespace grpoctrl;

namespace {

const SystemKind kKinds[] = {SystemKind::kDoubleIntegrator, SystemKind::kVanDerPol,
                             SystemKind::kOrbitRaising, SystemKind::kDetumbling};

State demo_state(SystemKind kind) {
  switch (kind) {
    case SystemKind::kDoubleIntegrator: return State{{0.5, 0.0}};
    case SystemKind::kVanDerPol: return State{{0.5, 0.3}};
    case SystemKind::kOrbitRaising: return State{{1.0, 0.0, 1.0}};
    case SystemKind::kDetumbling: return State{{-0.507, -0.313, 0.040}};
  }
  return {};
}

std::vector<Control> ramp(const SystemSpec& spec) {
  std::vector<Control> u;
  for (int k = 0; k < spec.num_steps; ++k) u.push_back(Vec::Constant(spec.control_dim, 0.01 * k));
  return u;
}

void BM_Derivative(benchmark::State& st) {
  const auto spec = make_system(kKinds[st.range(0)]);
  const State s = demo_state(spec.kind);
  const Control c = Vec::Constant(spec.control_dim, 0.1);
  for (auto _ : st) benchmark::DoNotOptimize(derivative(spec, 0.0, s, c));
}
BENCHMARK(BM_Derivative)->DenseRange(0, 3);

void BM_Euler(benchmark::State& st) {
  const auto spec = make_system(kKinds[st.range(0)]);
  const auto u = ramp(spec);
  for (auto _ : st) benchmark::DoNotOptimize(integrate_euler(spec, demo_state(spec.kind), u));
}
BENCHMARK(BM_Euler)->DenseRange(0, 3);

void BM_Rk45(benchmark::State& st) {
  const auto spec = make_system(kKinds[st.range(0)]);
  const auto u = ramp(spec);
  for (auto _ : st) benchmark::DoNotOptimize(integrate_rk45(spec, demo_state(spec.kind), u));
}
BENCHMARK(BM_Rk45)->DenseRange(0, 3);

void BM_SolveLqr(benchmark::State& st) {
  const auto spec = make_system(SystemKind::kDoubleIntegrator);
  const auto w = expert_weights(spec);
  for (auto _ : st) benchmark::DoNotOptimize(solve_lqr(spec, State{{0.5, -0.2}}, w));
}
BENCHMARK(BM_SolveLqr);

void BM_Shooting(benchmark::State& st) {
  const auto spec = make_system(kKinds[st.range(0)]);
  const auto w = expert_weights(spec);
  ShootingOptions opt;
  opt.restarts = 1;
  for (auto _ : st) benchmark::DoNotOptimize(solve_shooting(spec, demo_state(spec.kind), w, opt));
}
BENCHMARK(BM_Shooting)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

void BM_Parse(benchmark::State& st) {
  const auto spec = make_system(SystemKind::kDetumbling);
  const std::string text = render_response(spec, std::string(1200, 'x'), ramp(spec));
  for (auto _ : st) benchmark::DoNotOptimize(parse_response(spec, text));
  st.SetBytesProcessed(static_cast<std::int64_t>(st.iterations() * text.size()));
}
BENCHMARK(BM_Parse);

void BM_EncodePrompt(benchmark::State& st) {
  const auto spec = make_system(SystemKind::kOrbitRaising);
  for (auto _ : st) benchmark::DoNotOptimize(encode_prompt(spec, State{{1.0, 0.0, 1.0}}));
}
BENCHMARK(BM_EncodePrompt);

void BM_GrpoStep(benchmark::State& st) {
  const auto spec = make_system(SystemKind::kDoubleIntegrator);
  GaussianSequencePolicy policy(spec, 0);
  GrpoTrainer trainer(policy, spec, GrpoConfig::toy(GrpoConfig::table1()));
  int step = 0;
  for (auto _ : st) benchmark::DoNotOptimize(trainer.step(step++ % 500));
}
BENCHMARK(BM_GrpoStep)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
