#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "grpoctrl/cost.hpp"
#include "grpoctrl/dataset.hpp"
#include "grpoctrl/errors.hpp"
#include "grpoctrl/expert.hpp"
#include "grpoctrl/reasoning.hpp"
#include "support.hpp"

using namespace grpoctrl;

namespace {

// Quadratic cost of a double-integrator control sequence on the exact
// discretization, Q = I, R = 0.1, Qf = 10 I, written out by hand.
double di_cost(double x, double v, const std::vector<double>& u, double h) {
  double j = 0.0;
  for (double a : u) {
    j += x * x + v * v + 0.1 * a * a;
    x += v * h + 0.5 * a * h * h;
    v += a * h;
  }
  return j + 10.0 * (x * x + v * v);
}

double spec_cost(const SystemSpec& spec, const State& s0, const std::vector<Control>& u,
                 const CostWeights& w) {
  auto traj = simulate(spec, s0, u, Integrator::kRk45);
  return trajectory_cost(traj, w);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("expert") {

TEST_CASE("LQR from the origin is zero") {
  const auto di = make_system(SystemKind::kDoubleIntegrator);
  const auto sol = solve_lqr(di, Vec::Zero(2), CostWeights::defaults(di));
  for (const auto& u : sol.controls) CHECK(u[0] == 0.0);
  CHECK(spec_cost(di, Vec::Zero(2), sol.controls, CostWeights::defaults(di)) == 0.0);
}

TEST_CASE("LQR matches brute force on a 2-step instance") {
  auto di = make_system(SystemKind::kDoubleIntegrator);
  di.num_steps = 2;
  di.horizon = 1.0;
  const double h = di.step_duration();
  for (const State& s0 : {State{{0.5, 0.0}}, State{{-0.8, 0.6}}, State{{0.3, -0.9}}}) {
    const auto sol = solve_lqr(di, s0, CostWeights::defaults(di));
    const double lqr = di_cost(s0[0], s0[1], {sol.controls[0][0], sol.controls[1][0]}, h);
    double best = INFINITY;
    for (int i = -30; i <= 30; ++i)
      for (int k = -30; k <= 30; ++k) best = std::min(best, di_cost(s0[0], s0[1], {i / 10.0, k / 10.0}, h));
    CHECK(lqr <= best * (1.0 + 1e-12));
    CHECK(best <= lqr * 1.02);
  }
}

TEST_CASE("LQR cost is even in the initial state") {
  const auto di = make_system(SystemKind::kDoubleIntegrator);
  const auto w = CostWeights::defaults(di);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const State s0 = random_state(di, rng);
    const double a = spec_cost(di, s0, solve_lqr(di, s0, w).controls, w);
    const double b = spec_cost(di, -s0, solve_lqr(di, -s0, w).controls, w);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("LQR is optimal against random perturbations") {
  const auto di = make_system(SystemKind::kDoubleIntegrator);
  const auto w = CostWeights::defaults(di);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.05);
  const State s0{{0.5, 0.0}};
  const auto sol = solve_lqr(di, s0, w);
  std::vector<double> u;
  for (const auto& c : sol.controls) u.push_back(c[0]);
  const double base = di_cost(s0[0], s0[1], u, di.step_duration());
  for (int trial = 0; trial < 100; ++trial) {
    auto p = u;
    for (double& x : p) x += noise(rng);
    CHECK(di_cost(s0[0], s0[1], p, di.step_duration()) >= base);
  }
}

TEST_CASE("LQR refinement with time-scaled stage weights") {
  auto coarse = make_system(SystemKind::kDoubleIntegrator);
  auto fine = coarse;
  fine.num_steps = 100;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const State s0 = random_state(coarse, rng);
    auto cost_at = [&](const SystemSpec& spec) {
      auto w = CostWeights::defaults(spec);
      w.Q *= spec.step_duration();
      w.R *= spec.step_duration();
      return spec_cost(spec, s0, solve_lqr(spec, s0, w).controls, w);
    };
    CHECK(cost_at(fine) <= cost_at(coarse) * 1.01);
  }
}

TEST_CASE("shooting improves on the zero-control baseline and is monotone") {
  const auto vdp = make_system(SystemKind::kVanDerPol);
  const State s0{{0.5, 0.3}};
  const auto w = CostWeights::defaults(vdp);
  const auto res = solve_shooting(vdp, s0, w, ShootingOptions{2, 200});
  const double zero = spec_cost(vdp, s0, fallback_controls(vdp), w);
  CHECK(res.objective < zero);
  CHECK(res.baseline == doctest::Approx(zero).epsilon(1e-6));
  for (std::size_t i = 1; i < res.history.size(); ++i) CHECK(res.history[i] <= res.history[i - 1]);
  for (const auto& u : res.controls) {
    CHECK(u[0] >= -3.0);
    CHECK(u[0] <= 3.0);
  }
}

TEST_CASE("detumbling shooting from rest stays at rest") {
  const auto det = make_system(SystemKind::kDetumbling);
  const auto res = solve_shooting(det, Vec::Zero(3), expert_weights(det), ShootingOptions{2, 50});
  for (const auto& u : res.controls) CHECK(u.norm() <= 1e-6);
  CHECK(res.objective <= 1e-10);
}

TEST_CASE("detumbling expert on the showcased instance") {
  const auto det = make_system(SystemKind::kDetumbling);
  const State w0{{-0.507, -0.313, 0.040}};
  const auto res = solve_shooting(det, w0, expert_weights(det));
  const auto traj = simulate(det, w0, res.controls, Integrator::kRk45);
  CHECK(traj.states.back().norm() <= 0.01);
  for (const auto& u : res.controls) CHECK(u.cwiseAbs().maxCoeff() <= 4.0);
}

TEST_CASE("reasoning strings carry the computed quantities") {
  const auto det = make_system(SystemKind::kDetumbling);
  const ShootingOptions fast{1, 100};
  const auto rec = make_record(det, State{{0.35, -0.52, 0.18}}, Strategy::kOptimal, fast, 0.1, 1);
  CHECK(rec.reasoning.find("Dominant tumbling axis: Y (omega_2)") != std::string::npos);
  CHECK(rec.reasoning.find("Coupling constants: K_1=0.143, K_2=-0.600, K_3=0.500") !=
        std::string::npos);
  std::ostringstream mag;
  mag.precision(3);
  mag << std::fixed << Vec{{0.35, -0.52, 0.18}}.norm();
  CHECK(rec.reasoning.find("Initial angular momentum magnitude: " + mag.str() + " rad/s") !=
        std::string::npos);

  const auto rest = make_record(det, Vec::Zero(3), Strategy::kOptimal, fast, 0.1, 1);
  CHECK(rest.reasoning.find("Initial angular momentum magnitude: 0.000 rad/s") !=
        std::string::npos);

  const auto orb = make_system(SystemKind::kOrbitRaising);
  REQUIRE(orb.params.r_target == 1.5);
  const auto o = make_record(orb, State{{1.008, -0.006, 0.989}}, Strategy::kOptimal, fast, 0.1, 1);
  CHECK(o.reasoning.find("epsilon_target = -mu/(2*r_target) = -0.3333") != std::string::npos);
}

TEST_CASE("optimal reasoning length stays within bounds") {
  const ShootingOptions fast{1, 100};
  std::mt19937_64 rng(8);
  for (auto kind : {SystemKind::kDoubleIntegrator, SystemKind::kVanDerPol, SystemKind::kOrbitRaising,
                    SystemKind::kDetumbling}) {
    const auto spec = make_system(kind);
    for (int trial = 0; trial < 3; ++trial) {
      const auto rec = make_record(spec, random_state(spec, rng), Strategy::kOptimal, fast, 0.1, 1);
      const int words = word_count(rec.reasoning);
      CHECK(words >= 100);
      CHECK(words <= 400);
    }
  }
  CHECK(word_count("  one two\nthree\t four ") == 4);
}

TEST_CASE("strategy quotas are exact") {
  const auto q = strategy_quotas(2000, {0.4, 0.3, 0.2, 0.1});
  CHECK(q[Strategy::kOptimal] == 800);
  CHECK(q[Strategy::kAltEnergy] == 300);
  CHECK(q[Strategy::kAltTime] == 300);
  CHECK(q[Strategy::kSuboptimal] == 400);
  CHECK(q[Strategy::kRecovery] == 200);
  CHECK(q.total() == 2000);
  for (int n : {1, 7, 10, 33, 999}) CHECK(strategy_quotas(n, {0.4, 0.3, 0.2, 0.1}).total() == n);
}

TEST_CASE("suboptimal records are measurably worse than optimal ones") {
  // Gap measured on the objective the expert solved, with the exact-ish
  // integrator; annotation costs use different weights for detumbling and
  // Euler for the double integrator, so they are not a fair yardstick.
  ShootingOptions so;
  so.restarts = 2;
  so.max_iterations = 200;
  for (auto kind : {SystemKind::kDoubleIntegrator, SystemKind::kVanDerPol, SystemKind::kOrbitRaising,
                    SystemKind::kDetumbling}) {
    CAPTURE(kind);
    const auto spec = make_system(kind);
    const auto w = expert_weights(spec);
    std::mt19937_64 rng(12);
    std::vector<double> gaps;
    for (int trial = 0; trial < 15; ++trial) {
      const State s0 = random_state(spec, rng);
      const auto opt = make_record(spec, s0, Strategy::kOptimal, so, 0.1, trial);
      const auto sub = make_record(spec, s0, Strategy::kSuboptimal, so, 0.1, trial);
      const double co = trajectory_cost(simulate(spec, s0, opt.controls, Integrator::kRk45), w);
      const double cs = trajectory_cost(simulate(spec, s0, sub.controls, Integrator::kRk45), w);
      if (co > 1e-3) gaps.push_back(cs / co - 1.0);
    }
    std::sort(gaps.begin(), gaps.end());
    const double median = gaps[gaps.size() / 2];
    CHECK(median > 0.0);
    // orbit raising sits on a flat optimum: 10% noise costs ~2%
    if (kind != SystemKind::kOrbitRaising) CHECK(median >= 0.05);
  }
}

TEST_CASE("small dataset: determinism, bounds, stored costs, JSON round trip") {
  for (auto kind : {SystemKind::kDoubleIntegrator, SystemKind::kVanDerPol}) {
    const auto spec = make_system(kind);
    DatasetOptions opts;
    opts.count = 10;
    opts.seed = 7;
    const auto a = build_dataset(spec, opts);
    opts.threads = 1;
    const auto b = build_dataset(spec, opts);
    REQUIRE(a.train.size() == 9);
    REQUIRE(a.eval.size() == 1);
    for (std::size_t i = 0; i < a.train.size(); ++i)
      CHECK(to_json_line(a.train[i]) == to_json_line(b.train[i]));
    for (const auto& r : a.train) {
      for (const auto& u : r.controls) {
        CHECK((u.array() >= spec.control_lower.array()).all());
        CHECK((u.array() <= spec.control_upper.array()).all());
      }
      const auto again = annotate(spec, r.s0, r.controls);
      CHECK(std::abs(again.cost - r.annotations.cost) <= 1e-9);
      const auto parsed = record_from_json(to_json_line(r));
      CHECK(to_json_line(parsed) == to_json_line(r));
      const auto outcome = parse_response(spec, r.completion(spec));
      REQUIRE(outcome.ok());
      for (std::size_t t = 0; t < r.controls.size(); ++t)
        CHECK(((*outcome.controls)[t] - r.controls[t]).norm() == 0.0);
    }
  }
}

TEST_CASE("generate_dataset writes split files and a stable manifest") {
  const auto spec = make_system(SystemKind::kDoubleIntegrator);
  const std::string dir = scratch_dir("dataset");
  DatasetOptions opts;
  opts.count = 50;
  opts.seed = 3;
  const auto m1 = generate_dataset(spec, opts, dir);
  const auto first_train = read_file(m1.train_path);
  const auto m2 = generate_dataset(spec, opts, dir);
  CHECK(m1.records_hash == m2.records_hash);
  CHECK(read_file(m2.train_path) == first_train);
  CHECK(m1.train_count == 45);
  CHECK(m1.eval_count == 5);
  CHECK(read_records(m1.train_path).size() == 45);
  CHECK(read_records(m1.eval_path).size() == 5);
  const auto disk = read_manifest((std::filesystem::path(dir) / "double-integrator_manifest.json").string());
  CHECK(disk.records_hash == m1.records_hash);
  CHECK(disk.realized.total() == 50);

  opts.seed = 4;
  CHECK(generate_dataset(spec, opts, dir).records_hash != m1.records_hash);
}

TEST_CASE("initial states pass a uniformity check") {
  const auto spec = make_system(SystemKind::kDoubleIntegrator);
  DatasetOptions opts;
  opts.count = 2000;
  opts.seed = 9;
  const auto ds = build_dataset(spec, opts);
  std::vector<const DemonstrationRecord*> all;
  for (const auto* set : {&ds.train, &ds.eval})
    for (const auto& r : *set)
      if (r.strategy != Strategy::kRecovery) all.push_back(&r);
  const double n = static_cast<double>(all.size());
  const double critical = 1.628 / std::sqrt(n);  // one-sample KS, alpha = 0.01
  for (int d = 0; d < spec.state_dim; ++d) {
    std::vector<double> u;
    for (const auto* r : all)
      u.push_back((r->s0[d] - spec.state_lower[d]) / (spec.state_upper[d] - spec.state_lower[d]));
    std::sort(u.begin(), u.end());
    double stat = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      stat = std::max({stat, (i + 1) / n - u[i], u[i] - i / n});
    CHECK(stat < critical);
  }
  // recovery states sit in the outer shell of the box
  for (const auto* set : {&ds.train, &ds.eval})
    for (const auto& r : *set)
      if (r.strategy == Strategy::kRecovery) {
        const Vec mid = 0.5 * (spec.state_lower + spec.state_upper);
        const Vec half = 0.5 * (spec.state_upper - spec.state_lower);
        CHECK((r.s0 - mid).cwiseQuotient(half).cwiseAbs().maxCoeff() >= 0.8 - 1e-12);
      }
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
}

}  // TEST_SUITE
