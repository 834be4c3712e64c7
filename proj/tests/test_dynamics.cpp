#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "grpoctrl/dynamics.hpp"
#include "grpoctrl/errors.hpp"
#include "grpoctrl/system.hpp"
#include "support.hpp"

using namespace grpoctrl;

namespace {

// Exact zero-order-hold solution of x'' = u.
std::vector<State> di_exact(const State& s0, const std::vector<Control>& u, double h) {
  std::vector<State> out{s0};
  double x = s0[0], v = s0[1];
  for (const auto& c : u) {
    x += v * h + 0.5 * c[0] * h * h;
    v += c[0] * h;
    out.push_back(Vec{{x, v}});
  }
  return out;
}

// Fixed-step classical RK4 on the free Van der Pol oscillator.
std::vector<double> vdp_rk4(double x, double y, double mu, double horizon, double h,
                            double tail_from) {
  auto f = [mu](double a, double b) {
    return std::pair{b, mu * (1 - a * a) * b - a};
  };
  const long n = std::lround(horizon / h);
  std::vector<double> tail;
  for (long i = 0; i < n; ++i) {
    auto [k1x, k1y] = f(x, y);
    auto [k2x, k2y] = f(x + 0.5 * h * k1x, y + 0.5 * h * k1y);
    auto [k3x, k3y] = f(x + 0.5 * h * k2x, y + 0.5 * h * k2y);
    auto [k4x, k4y] = f(x + h * k3x, y + h * k3y);
    x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    y += h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y);
    if ((i + 1) * h >= tail_from) tail.push_back(x);
  }
  tail.push_back(y);  // last element: final velocity
  return tail;
}

double max_abs_diff(const State& a, const State& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("table dimensions and bounds") {
  const auto di = make_system(SystemKind::kDoubleIntegrator);
  CHECK(di.state_dim == 2);
  CHECK(di.control_dim == 1);
  CHECK(di.step_duration() == doctest::Approx(0.5));
  const auto det = make_system(SystemKind::kDetumbling);
  CHECK(det.state_dim == 3);
  CHECK(det.control_dim == 3);
  CHECK(det.control_upper[0] == 4.0);
  const auto orb = make_system(SystemKind::kOrbitRaising);
  CHECK(orb.horizon == 4.0);
  CHECK(orb.step_duration() == doctest::Approx(0.4));
  for (auto k : {SystemKind::kDoubleIntegrator, SystemKind::kVanDerPol, SystemKind::kOrbitRaising,
                 SystemKind::kDetumbling}) {
    CHECK_NOTHROW(make_system(k).validate());
    CHECK(parse_system_kind(to_string(k)) == k);
  }
}

TEST_CASE("spec validation rejects broken specs") {
  auto s = make_system(SystemKind::kDoubleIntegrator);
  s.num_steps = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = make_system(SystemKind::kOrbitRaising);
  s.params.m1 = -0.3;  // mass hits zero before t = 4
  CHECK_THROWS_AS(s.validate(), Error);
  s = make_system(SystemKind::kDetumbling);
  s.params.inertia_diag[1] = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("detumbling equilibrium and coupling constants") {
  const auto det = make_system(SystemKind::kDetumbling);
  const State d = derivative(det, 0.0, Vec::Zero(3), Vec::Zero(3));
  CHECK(d.norm() == 0.0);
  const auto& j = det.params.inertia_diag;
  CHECK((j[1] - j[2]) / j[0] == doctest::Approx(0.143).epsilon(0.002));
  CHECK((j[2] - j[0]) / j[1] == doctest::Approx(-0.600));
  CHECK((j[0] - j[1]) / j[2] == doctest::Approx(0.500));
}

TEST_CASE("orbit circular balance with thrust off") {
  auto orb = make_system(SystemKind::kOrbitRaising);
  orb.params.thrust = 0.0;
  for (double phi : {0.0, 1.0, 4.0}) {
    const State d = derivative(orb, 0.7, Vec{{1.0, 0.0, 1.0}}, Vec{{phi}});
    CHECK(std::abs(d[0]) < 1e-15);
    CHECK(std::abs(d[1]) < 1e-15);
    CHECK(std::abs(d[2]) < 1e-15);
  }
}

TEST_CASE("double integrator Euler step") {
  auto di = make_system(SystemKind::kDoubleIntegrator);
  di.num_steps = 1;
  di.horizon = 0.5;
  const std::vector<Control> u{Vec{{1.0}}};
  const auto traj = integrate_euler(di, Vec{{0.5, -0.2}}, u);
  CHECK(traj.states[1][0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(traj.states[1][1] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("zero controls from an equilibrium stay put") {
  const std::vector<std::pair<SystemKind, State>> cases{
      {SystemKind::kDoubleIntegrator, Vec{{0.0, 0.0}}},
      {SystemKind::kVanDerPol, Vec{{0.0, 0.0}}},
      {SystemKind::kDetumbling, Vec{{0.0, 0.0, 0.0}}}};
  for (const auto& [kind, s0] : cases) {
    const auto spec = make_system(kind);
    for (auto integ : {Integrator::kEuler, Integrator::kRk45}) {
      const auto traj = simulate(spec, s0, fallback_controls_of(spec), integ);
      for (const auto& s : traj.states) CHECK(s.norm() == 0.0);
    }
  }
  const auto di = make_system(SystemKind::kDoubleIntegrator);
  const auto traj = simulate(di, Vec::Zero(2), fallback_controls_of(di), Integrator::kEuler);
  CHECK(traj.terminal_cost == 0.0);
  for (double c : traj.step_costs) CHECK(c == 0.0);
}

TEST_CASE("RK45 matches the exact double integrator solution") {
  const auto di = make_system(SystemKind::kDoubleIntegrator);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const State s0 = random_state(di, rng);
    const auto u = random_controls(di, rng);
    const auto traj = integrate_rk45(di, s0, u);
    const auto exact = di_exact(s0, u, di.step_duration());
    for (std::size_t k = 0; k < exact.size(); ++k)
      CHECK(max_abs_diff(traj.states[k], exact[k]) <= 1e-8);
  }
}

TEST_CASE("Euler error is first order on the double integrator") {
  auto di = make_system(SystemKind::kDoubleIntegrator);
  const State s0{{0.4, -0.3}};
  auto max_err = [&](int steps) {
    di.num_steps = steps;
    const std::vector<Control> u(steps, Vec{{1.0}});
    const auto traj = integrate_euler(di, s0, u);
    const auto exact = di_exact(s0, u, di.step_duration());
    double e = 0.0;
    for (std::size_t k = 0; k < exact.size(); ++k)
      e = std::max(e, max_abs_diff(traj.states[k], exact[k]));
    return e;
  };
  for (int n : {10, 20, 40}) {
    const double ratio = max_err(n) / max_err(2 * n);
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 2.5);
  }
}

TEST_CASE("RK45 is invariant to tightening rtol") {
  std::mt19937_64 rng(5);
  for (auto kind : {SystemKind::kVanDerPol, SystemKind::kOrbitRaising, SystemKind::kDetumbling}) {
    const auto spec = make_system(kind);
    for (int trial = 0; trial < 5; ++trial) {
      const State s0 = random_state(spec, rng);
      const auto u = random_controls(spec, rng);
      const auto a = integrate_rk45(spec, s0, u, Rk45Options{});
      const auto b = integrate_rk45(spec, s0, u, Rk45Options{1e-10, 1e-13, 1e6});
      for (std::size_t k = 0; k < a.states.size(); ++k)
        CHECK(max_abs_diff(a.states[k], b.states[k]) <= 1e-6);
    }
  }
}

TEST_CASE("torque-free detumbling conserves energy and momentum magnitude") {
  const auto det = make_system(SystemKind::kDetumbling);
  const Vec j{{14.0, 10.0, 8.0}};
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const State w0 = random_state(det, rng);
    const auto traj = integrate_rk45(det, w0, fallback_controls_of(det));
    const double e0 = 0.5 * w0.dot(j.cwiseProduct(w0));
    const double h0 = j.cwiseProduct(w0).norm();
    for (const auto& w : traj.states) {
      CHECK(std::abs(0.5 * w.dot(j.cwiseProduct(w)) - e0) / e0 <= 1e-6);
      CHECK(std::abs(j.cwiseProduct(w).norm() - h0) / h0 <= 1e-6);
    }
  }
}

TEST_CASE("thrust-free orbit conserves energy and angular momentum") {
  auto orb = make_system(SystemKind::kOrbitRaising);
  orb.params.thrust = 0.0;
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    // bound orbits near circular, so the energy stays well away from zero
    std::uniform_real_distribution<double> r_dist(0.8, 1.5), u_dist(-0.1, 0.1), f_dist(0.9, 1.1);
    const double r = r_dist(rng);
    const State s0{{r, u_dist(rng), f_dist(rng) / std::sqrt(r)}};
    const auto traj = integrate_rk45(orb, s0, random_controls(orb, rng));
    auto energy = [](const State& s) { return 0.5 * (s[1] * s[1] + s[2] * s[2]) - 1.0 / s[0]; };
    auto momentum = [](const State& s) { return s[0] * s[2]; };
    const double e0 = energy(s0), h0 = momentum(s0);
    for (const auto& s : traj.states) {
      CHECK(std::abs(energy(s) - e0) / std::abs(e0) <= 1e-6);
      CHECK(std::abs(momentum(s) - h0) / std::abs(h0) <= 1e-6);
    }
  }
}

TEST_CASE("Van der Pol origin and limit cycle against an RK4 oracle") {
  const auto vdp = make_system(SystemKind::kVanDerPol);
  const auto rest = integrate_rk45(vdp, Vec::Zero(2), fallback_controls_of(vdp));
  CHECK(rest.states.back().norm() == 0.0);

  // horizon 5: the library agrees with a fine fixed-step oracle
  const auto traj = integrate_rk45(vdp, Vec{{0.5, 0.0}}, fallback_controls_of(vdp));
  const auto oracle = vdp_rk4(0.5, 0.0, 1.0, 5.0, 1e-4, 5.0);
  CHECK(traj.states.back()[0] == doctest::Approx(oracle[0]).epsilon(1e-5));
  CHECK(traj.states.back()[1] == doctest::Approx(oracle.back()).epsilon(1e-5));

  // amplitude of the mu = 1 limit cycle (about 2.01), read off a longer run
  auto longer = vdp;
  longer.horizon = 20.0;
  longer.num_steps = 200;
  const auto settled = integrate_rk45(longer, Vec{{0.5, 0.0}}, fallback_controls_of(longer));
  double amp = 0.0;
  for (std::size_t k = 130; k < settled.states.size(); ++k)
    amp = std::max(amp, std::abs(settled.states[k][0]));
  CHECK(amp >= 1.5);
  CHECK(amp <= 2.5);
  const auto tail = vdp_rk4(0.5, 0.0, 1.0, 20.0, 1e-4, 13.0);
  double oracle_amp = 0.0;
  for (std::size_t k = 0; k + 1 < tail.size(); ++k) oracle_amp = std::max(oracle_amp, std::abs(tail[k]));
  CHECK(amp == doctest::Approx(oracle_amp).epsilon(1e-2));
}

TEST_CASE("out-of-bound controls are clipped and flagged once per step") {
  const auto det = make_system(SystemKind::kDetumbling);
  std::vector<Control> u(10, Vec::Zero(3));
  u[2] = Vec{{5.0, -7.0, 0.0}};
  u[6] = Vec{{0.0, 0.0, 4.5}};
  const auto traj = simulate(det, Vec{{0.1, 0.1, 0.1}}, u, Integrator::kRk45);
  CHECK(traj.count(ViolationKind::kControlBound) == 2);
  CHECK(traj.controls[2] == Vec{{4.0, -4.0, 0.0}});
  CHECK(traj.controls[6][2] == 4.0);
  for (const auto& v : traj.violations)
    if (v.kind == ViolationKind::kControlBound) CHECK((v.step == 2 || v.step == 6));
}

TEST_CASE("trajectory shape invariants hold for random rollouts") {
  std::mt19937_64 rng(21);
  for (auto kind : {SystemKind::kDoubleIntegrator, SystemKind::kVanDerPol, SystemKind::kOrbitRaising,
                    SystemKind::kDetumbling}) {
    const auto spec = make_system(kind);
    for (int trial = 0; trial < 20; ++trial) {
      const auto traj = simulate(spec, random_state(spec, rng), random_controls(spec, rng),
                                 default_integrator(kind));
      CHECK(traj.states.size() == traj.controls.size() + 1);
      CHECK(traj.times.size() == traj.states.size());
      CHECK(traj.times.back() == doctest::Approx(spec.horizon));
      CHECK(traj.terminal_cost >= 0.0);
      for (double c : traj.step_costs) CHECK(c >= 0.0);
      for (const auto& s : traj.states) CHECK(s.allFinite());
    }
  }
}

TEST_CASE("blowup raises a numerical error instead of storing non-finite states") {
  auto vdp = make_system(SystemKind::kVanDerPol);
  vdp.params.mu_vdp = 50.0;
  std::vector<Control> u(10, Vec{{3.0}});
  CHECK_THROWS_AS(integrate_euler(vdp, Vec{{1.0, 1.0}}, u, 1e3), Error);
  auto orb = make_system(SystemKind::kOrbitRaising);
  CHECK_THROWS_AS(derivative(orb, 0.0, Vec{{0.0, 0.0, 1.0}}, Vec{{0.0}}), Error);
}

}  // TEST_SUITE
