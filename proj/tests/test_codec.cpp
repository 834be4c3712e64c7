#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "grpoctrl/codec.hpp"
#include "support.hpp"

using namespace grpoctrl;

namespace {

const char* kPublishedResponse = R"(<REASONING>
For this spacecraft detumbling maneuver starting with angular velocities [omega_1=0.350, omega_2=-0.520, omega_3=0.180] rad/s, I'm using BVP optimal control to bring the spacecraft to rest in 5.00 seconds.

The spacecraft dynamics follow Euler's rotational equations:
omega_dot = -J^(-1)(omega x J*omega) + J^(-1)*u
with inertia matrix J = diag([14.0, 10.0, 8.0]) kg*m^2.

Analysis:
- Initial angular momentum magnitude: 0.649 rad/s
- Dominant tumbling axis: Y (omega_2)
- Coupling constants: K_1=-0.143, K_2=0.600, K_3=-0.250

Strategy: optimal
- Apply 3D torque sequence over 10 steps
- Each step duration: 0.5s
- Target: Zero angular velocity (detumbled state)
- Constraints: |omega_i| <= 1 rad/s, |u_i| <= 4.0 N*m

This approach exploits the nonlinear coupling between axes while minimizing control effort and respecting physical constraints.
</REASONING>

<CONTROLS>
[-1.245, 2.187, -0.658]
[-1.089, 1.923, -0.542]
[-0.876, 1.534, -0.398]
[-0.654, 1.142, -0.267]
[-0.445, 0.782, -0.154]
[-0.267, 0.478, -0.068]
[-0.134, 0.245, -0.012]
[-0.045, 0.089, 0.021]
[-0.008, 0.019, 0.012]
[0.000, 0.001, 0.002]
</CONTROLS>)";

const std::vector<SystemKind> kKinds{SystemKind::kDoubleIntegrator, SystemKind::kVanDerPol,
                                     SystemKind::kOrbitRaising, SystemKind::kDetumbling};

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("detumbling prompts carry the published phrasing") {
  const auto det = make_system(SystemKind::kDetumbling);
  const auto p = encode_prompt(det, State{{0.35, -0.52, 0.18}});
  CHECK(p.user_prompt.find("initial angular velocities [omega_1=0.350, omega_2=-0.520, "
                           "omega_3=0.180] rad/s") != std::string::npos);
  CHECK(p.system_prompt.find("generate a sequence of 10 3D torque vectors") != std::string::npos);
  for (const auto* marker : {"<REASONING>", "</REASONING>", "<CONTROLS>", "</CONTROLS>"})
    CHECK(p.system_prompt.find(marker) != std::string::npos);
  CHECK(p.user_prompt.find("[-4, 4] N*m") != std::string::npos);
  CHECK(p.text() == p.system_prompt + "\n\n" + p.user_prompt);
}

TEST_CASE("prompts are deterministic and injective at 3 decimals") {
  std::mt19937_64 rng(1);
  for (auto kind : kKinds) {
    const auto spec = make_system(kind);
    std::set<std::string> seen;
    for (int trial = 0; trial < 200; ++trial) {
      State s0 = random_state(spec, rng);
      for (int i = 0; i < s0.size(); ++i) s0[i] = std::round(s0[i] * 1000.0) / 1000.0;
      const auto a = encode_prompt(spec, s0);
      CHECK(a.user_prompt == encode_prompt(spec, s0).user_prompt);
      CHECK(a.system_prompt == encode_prompt(spec, s0).system_prompt);
      for (int i = 0; i < s0.size(); ++i)
        CHECK(a.user_prompt.find(format_fixed3(s0[i])) != std::string::npos);
      State moved = s0;
      moved[trial % s0.size()] += 0.001;
      CHECK(encode_prompt(spec, moved).user_prompt != a.user_prompt);
    }
  }
}

TEST_CASE("the published response parses to its printed vectors") {
  const auto det = make_system(SystemKind::kDetumbling);
  const auto out = parse_response(det, kPublishedResponse);
  REQUIRE(out.ok());
  REQUIRE(out.controls->size() == 10);
  CHECK((*out.controls)[0] == Vec{{-1.245, 2.187, -0.658}});
  CHECK((*out.controls)[9] == Vec{{0.0, 0.001, 0.002}});
  CHECK(out.clip_events == 0);
  REQUIRE(out.reasoning);
  CHECK(out.reasoning->find("Dominant tumbling axis: Y") != std::string::npos);
  CHECK(out.raw == kPublishedResponse);
}

TEST_CASE("clipping, wrapping and failure statuses") {
  const auto det = make_system(SystemKind::kDetumbling);
  std::string body = "[5.0, 0, 0]\n";
  for (int i = 0; i < 9; ++i) body += "[0, 0, 0]\n";
  const auto clipped = parse_response(det, "<REASONING>r</REASONING><CONTROLS>" + body + "</CONTROLS>");
  REQUIRE(clipped.ok());
  CHECK((*clipped.controls)[0] == Vec{{4.0, 0.0, 0.0}});
  CHECK(clipped.clip_events == 1);
  CHECK(clipped.raw_values[0] == 5.0);

  CHECK(parse_response(det, "<REASONING>no controls</REASONING>").status == ParseStatus::kFormatError);
  CHECK(parse_response(det, "<CONTROLS>" + body + "</CONTROLS>").status == ParseStatus::kFormatError);
  CHECK(parse_response(det, "").status == ParseStatus::kFormatError);
  const auto short_seq = parse_response(det, "<REASONING>r</REASONING><CONTROLS>[0,0,0]\n[1,1,1]</CONTROLS>");
  CHECK(short_seq.status == ParseStatus::kLengthError);
  CHECK_FALSE(short_seq.controls);

  const auto di = make_system(SystemKind::kDoubleIntegrator);
  CHECK(parse_response(di, "<REASONING>r</REASONING><CONTROLS>1, 2, nan, 4, 5, 6, 7, 8, 9, 0</CONTROLS>").status ==
        ParseStatus::kNumericError);
  const auto ws = parse_response(di, "<REASONING>r</REASONING><CONTROLS>1 2\n3,4 ,  5\n\n6 7 8 9 0</CONTROLS>");
  REQUIRE(ws.ok());
  CHECK((*ws.controls)[2][0] == 3.0);
  CHECK(ws.clip_events == 6);  // 4 through 9
  const auto first = parse_response(
      di, "<REASONING>r</REASONING><CONTROLS>0 0 0 0 0 0 0 0 0 1</CONTROLS><CONTROLS>1 1 1 1 1 1 1 1 1 1</CONTROLS>");
  REQUIRE(first.ok());
  CHECK((*first.controls)[0][0] == 0.0);

  const auto orb = make_system(SystemKind::kOrbitRaising);
  const auto wrapped = parse_response(orb, "<REASONING>r</REASONING><CONTROLS>7.0, -1.0, 0, 0, 0, 0, 0, 0, 0, 0</CONTROLS>");
  REQUIRE(wrapped.ok());
  CHECK((*wrapped.controls)[0][0] == doctest::Approx(7.0 - 2.0 * std::numbers::pi));
  CHECK((*wrapped.controls)[1][0] == doctest::Approx(2.0 * std::numbers::pi - 1.0));
  CHECK(wrapped.clip_events == 0);
}

TEST_CASE("fallback controls are zero") {
  for (auto kind : kKinds) {
    const auto spec = make_system(kind);
    const auto u = fallback_controls(spec);
    REQUIRE(u.size() == 10);
    for (const auto& c : u) {
      CHECK(c.size() == spec.control_dim);
      CHECK(c.norm() == 0.0);
    }
  }
}

TEST_CASE("format_fixed3 normalizes negative zero") {
  CHECK(format_fixed3(-0.0) == "0.000");
  CHECK(format_fixed3(-0.0004) == "0.000");
  CHECK(format_fixed3(1.2345) == "1.234");  // binary value of 1.2345 is just below the tie
  CHECK(format_fixed3(-2.5) == "-2.500");
}

TEST_CASE("render then parse round-trips in-bound sequences") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto spec = make_system(kKinds[trial % kKinds.size()]);
    const auto u = random_grid_controls(spec, rng);
    const auto out = parse_response(spec, render_response(spec, "because", u));
    REQUIRE(out.ok());
    CHECK(out.clip_events == 0);
    for (std::size_t t = 0; t < u.size(); ++t)
      CHECK(((*out.controls)[t] - u[t]).cwiseAbs().maxCoeff() <= 5e-4);
  }
}

TEST_CASE("parse_response is total under fuzzing") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> len(0, 400);
  const std::string alphabet = "<>/[],.-+eE0123456789 \n\tCONTRLSEAIG";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  int ok = 0;
  for (int trial = 0; trial < 100000; ++trial) {
    const auto spec = make_system(kKinds[trial % kKinds.size()]);
    std::string text;
    switch (trial % 3) {
      case 0: {  // raw bytes
        const int n = len(rng);
        for (int i = 0; i < n; ++i) text.push_back(static_cast<char>(byte(rng)));
        break;
      }
      case 1: {  // grammar-flavored noise
        const int n = len(rng);
        text = "<CONTROLS>";
        for (int i = 0; i < n; ++i) text.push_back(alphabet[pick(rng)]);
        if (rng() % 2) text += "</CONTROLS>";
        break;
      }
      default: {  // mutated valid response
        text = render_response(spec, "r", random_grid_controls(spec, rng));
        const int edits = 1 + static_cast<int>(rng() % 4);
        for (int e = 0; e < edits && !text.empty(); ++e)
          text[rng() % text.size()] = static_cast<char>(byte(rng));
      }
    }
    const auto out = parse_response(spec, text);
    CHECK(out.raw == text);
    if (out.ok()) {
      ++ok;
      REQUIRE(out.controls->size() == static_cast<std::size_t>(spec.num_steps));
      for (const auto& c : *out.controls) {
        CHECK((c.array() >= spec.control_lower.array()).all());
        CHECK((c.array() <= spec.control_upper.array()).all());
      }
    } else {
      CHECK_FALSE(out.controls);
    }
  }
  CHECK(ok > 0);
}

}  // TEST_SUITE
