#include "grpoctrl/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "grpoctrl/errors.hpp"

namespace grpoctrl {
namespace {

constexpr std::string_view kReasoningOpen = "<REASONING>";
constexpr std::string_view kReasoningClose = "</REASONING>";
constexpr std::string_view kControlsOpen = "<CONTROLS>";
constexpr std::string_view kControlsClose = "</CONTROLS>";

std::string format_2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string format_1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string format_general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Bounds print as "1", "0.5", "-4" when exact at 3 decimals, else "%.3f".
std::string format_bound(double v) {
  const double scaled = v * 1000.0;
  if (std::abs(scaled - std::round(scaled)) < 1e-9) return format_general(std::round(scaled) / 1000.0);
  return format_fixed3(v);
}

std::string range(const SystemSpec& spec, bool state, int i) {
  const Vec& lo = state ? spec.state_lower : spec.control_lower;
  const Vec& hi = state ? spec.state_upper : spec.control_upper;
  return "[" + format_bound(lo[i]) + ", " + format_bound(hi[i]) + "]";
}

bool uniform(const Vec& lo, const Vec& hi) {
  return (lo.array() == lo[0]).all() && (hi.array() == hi[0]).all();
}

std::string instructions(int n, std::string_view item_plural, std::string_view format_line) {
  std::string out;
  out += "Explain your approach between <REASONING> and </REASONING>.\n";
  out += "Then provide exactly " + std::to_string(n) + " " + std::string(item_plural) +
         " as comma-separated values between <CONTROLS> and </CONTROLS>.\n";
  out += format_line;
  return out;
}

PromptBundle double_integrator_like(const SystemSpec& spec, const State& s0) {
  const bool vdp = spec.kind == SystemKind::kVanDerPol;
  const std::string n = std::to_string(spec.num_steps);
  const std::string horizon = format_2(spec.horizon);
  PromptBundle p;
  const std::string name = vdp ? "Van der Pol oscillator" : "double integrator system";
  p.system_prompt = "You are a control systems expert.\n\n";
  p.system_prompt += "Given a " + name +
                     " with initial position and velocity [x, x_dot], generate a sequence of " + n +
                     " control inputs to drive the system to the origin (x = 0, x_dot = 0) in exactly " +
                     horizon + " seconds.\n\n";
  p.system_prompt += vdp ? "DYNAMICS: x_ddot - mu*(1 - x^2)*x_dot + x = u\n\n"
                         : "DYNAMICS: x_ddot = u\n\n";
  p.system_prompt +=
      "CONSTRAINTS: |x| <= x_max, |x_dot| <= v_max, \n            |u| <= u_max\n\n";
  p.system_prompt += instructions(spec.num_steps, "control values",
                                  "Format each control value with 3 decimal places.");

  p.user_prompt = "Control a " + name + " with initial state [x=" + format_fixed3(s0[0]) +
                  ", x_dot=" + format_fixed3(s0[1]) +
                  "] to reach the origin (x = 0, x_dot = 0) in " + horizon + " seconds using " + n +
                  " steps.";
  if (vdp) p.user_prompt += " Damping parameter: mu = " + format_fixed3(spec.params.mu_vdp) + ".";
  p.user_prompt += "\nKeep position within " + range(spec, true, 0) + " m, velocity within " +
                   range(spec, true, 1) + " m/s, and control inputs within " +
                   range(spec, false, 0) + " N.";
  return p;
}

PromptBundle orbit_raising(const SystemSpec& spec, const State& s0) {
  const std::string n = std::to_string(spec.num_steps);
  const std::string horizon = format_2(spec.horizon);
  const Vec target = target_state(spec);
  const ParamSet& prm = spec.params;
  PromptBundle p;
  p.system_prompt = "You are a spacecraft orbital mechanics expert.\n\n";
  p.system_prompt +=
      "Given a spacecraft orbit raising maneuver with initial state [r, u, v] (radius, radial "
      "velocity, tangential velocity), generate a sequence of " +
      n + " thrust angles to transfer the spacecraft to a circular orbit at the target radius in exactly " +
      horizon + " seconds.\n\n";
  p.system_prompt +=
      "DYNAMICS: r_dot = u, u_dot = v^2/r - mu/r^2 + T*sin(phi)/m(t), v_dot = -u*v/r + "
      "T*cos(phi)/m(t)     with m(t) = m0 + m1*t\n\n";
  p.system_prompt +=
      "CONSTRAINTS: r_min <= r <= r_max, |u| <= u_max, v_min <= v <= v_max, \n"
      "            0 <= phi <= 2*pi rad\n\n";
  p.system_prompt += instructions(spec.num_steps, "thrust angles",
                                  "Format each thrust angle in radians with 3 decimal places.");

  p.user_prompt = "Control a spacecraft orbit raising maneuver with initial state [r=" +
                  format_fixed3(s0[0]) + ", u=" + format_fixed3(s0[1]) + ", v=" +
                  format_fixed3(s0[2]) + "] to reach a circular orbit at r_target=" +
                  format_fixed3(prm.r_target) + " (r=" + format_fixed3(target[0]) +
                  ", u=" + format_fixed3(target[1]) + ", v=" + format_fixed3(target[2]) +
                  ") in " + horizon + " seconds using " + n + " steps.";
  p.user_prompt += " Parameters: mu=" + format_general(prm.mu_grav) +
                   ", T=" + format_general(prm.thrust) + ", m0=" + format_general(prm.m0) +
                   ", m1=" + format_general(prm.m1) + ".";
  p.user_prompt += "\nKeep radius within " + range(spec, true, 0) + ", radial velocity within " +
                   range(spec, true, 1) + ", tangential velocity within " + range(spec, true, 2) +
                   ", and thrust angles within " + range(spec, false, 0) + " rad.";
  return p;
}

PromptBundle detumbling(const SystemSpec& spec, const State& s0) {
  const std::string n = std::to_string(spec.num_steps);
  const std::string horizon = format_2(spec.horizon);
  const auto& j = spec.params.inertia_diag;
  PromptBundle p;
  p.system_prompt = "You are a spacecraft control systems expert.\n\n";
  p.system_prompt +=
      "Given a spacecraft detumbling maneuver with initial angular velocities [omega_1, omega_2, "
      "omega_3], generate a sequence of " +
      n + " 3D torque vectors to bring the spacecraft to rest (omega = [0,0,0]) in exactly " +
      horizon + " seconds.\n\n";
  p.system_prompt +=
      "DYNAMICS: omega_dot = -J^(-1)(omega x J*omega) + J^(-1)*u     with J = diag([J1, J2, "
      "J3])\n\n";
  p.system_prompt +=
      "CONSTRAINTS: |omega_i| <= omega_max rad/s, \n            |u_i| <= u_max N*m\n\n";
  p.system_prompt += instructions(spec.num_steps, "torque vectors",
                                  "Format each torque vector as [u1, u2, u3] with 3 decimal places.");

  p.user_prompt = "Control a spacecraft detumbling maneuver with initial angular velocities [omega_1=" +
                  format_fixed3(s0[0]) + ", omega_2=" + format_fixed3(s0[1]) + ", omega_3=" +
                  format_fixed3(s0[2]) +
                  "] rad/s to bring the spacecraft to rest (omega = [0,0,0]) in " + horizon +
                  " seconds using " + n + " steps. Inertia matrix: J = diag([" + format_1(j[0]) +
                  ", " + format_1(j[1]) + ", " + format_1(j[2]) + "]) kg*m^2.\n";
  std::string omega_range, torque_range;
  if (uniform(spec.state_lower, spec.state_upper)) {
    omega_range = range(spec, true, 0);
  } else {
    omega_range = "omega_1 " + range(spec, true, 0) + ", omega_2 " + range(spec, true, 1) +
                  ", omega_3 " + range(spec, true, 2);
  }
  if (uniform(spec.control_lower, spec.control_upper)) {
    torque_range = range(spec, false, 0);
  } else {
    torque_range = "u_1 " + range(spec, false, 0) + ", u_2 " + range(spec, false, 1) + ", u_3 " +
                   range(spec, false, 2);
  }
  p.user_prompt += "Keep angular velocities within " + omega_range + " rad/s and torques within " +
                   torque_range + " N*m.";
  return p;
}

bool is_separator(char c) {
  return c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::optional<double> parse_number(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::general);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<std::string_view> extract_block(std::string_view text, std::string_view open,
                                              std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string_view::npos) return std::nullopt;
  const auto body = a + open.size();
  const auto b = text.find(close, body);
  if (b == std::string_view::npos) return std::nullopt;
  return text.substr(body, b - body);
}

// Splits on separators; brackets also separate (scalar systems tolerate them).
bool parse_scalars(std::string_view body, std::vector<double>& out) {
  std::size_t i = 0;
  while (i < body.size()) {
    if (is_separator(body[i]) || body[i] == '[' || body[i] == ']') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < body.size() && !is_separator(body[j]) && body[j] != '[' && body[j] != ']') ++j;
    auto v = parse_number(body.substr(i, j - i));
    if (!v) return false;
    out.push_back(*v);
    i = j;
  }
  return true;
}

enum class VectorScan { kOk, kNumeric, kArity };

VectorScan parse_vectors(std::string_view body, int dim, std::vector<double>& out, int& count) {
  std::size_t i = 0;
  bool arity_error = false;
  count = 0;
  while (i < body.size()) {
    if (is_separator(body[i])) {
      ++i;
      continue;
    }
    if (body[i] != '[') return VectorScan::kNumeric;
    const auto close = body.find(']', i + 1);
    if (close == std::string_view::npos) return VectorScan::kNumeric;
    const std::string_view inner = body.substr(i + 1, close - i - 1);
    if (inner.find('[') != std::string_view::npos) return VectorScan::kNumeric;
    std::vector<double> values;
    std::size_t k = 0;
    while (k < inner.size()) {
      if (is_separator(inner[k])) {
        ++k;
        continue;
      }
      std::size_t e = k;
      while (e < inner.size() && !is_separator(inner[e])) ++e;
      auto v = parse_number(inner.substr(k, e - k));
      if (!v) return VectorScan::kNumeric;
      values.push_back(*v);
      k = e;
    }
    if (static_cast<int>(values.size()) != dim) arity_error = true;
    out.insert(out.end(), values.begin(), values.end());
    ++count;
    i = close + 1;
  }
  return arity_error ? VectorScan::kArity : VectorScan::kOk;
}

}  // namespace

std::string PromptBundle::text() const { return system_prompt + "\n\n" + user_prompt; }

std::string_view to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::kOk: return "Ok";
    case ParseStatus::kFormatError: return "FormatError";
    case ParseStatus::kLengthError: return "LengthError";
    case ParseStatus::kNumericError: return "NumericError";
  }
  return "Unknown";
}

std::string format_fixed3(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  std::string out = buf;
  if (out == "-0.000") out = "0.000";
  return out;
}

PromptBundle encode_prompt(const SystemSpec& spec, const State& s0) {
  if (s0.size() != spec.state_dim)
    throw Error(ErrorCode::kDimensionMismatch, "initial state dimension mismatch");
  const Vec center = 0.5 * (spec.state_lower + spec.state_upper);
  const Vec half = 0.5 * (spec.state_upper - spec.state_lower);
  if (!s0.allFinite() || ((s0 - center).cwiseAbs().array() > 10.0 * half.array()).any())
    throw Error(ErrorCode::kInvalidArgument, "initial state is outside 10x the state bounds");
  PromptBundle p;
  switch (spec.kind) {
    case SystemKind::kDoubleIntegrator:
    case SystemKind::kVanDerPol: p = double_integrator_like(spec, s0); break;
    case SystemKind::kOrbitRaising: p = orbit_raising(spec, s0); break;
    case SystemKind::kDetumbling: p = detumbling(spec, s0); break;
  }
  p.spec_snapshot = spec;
  p.s0 = s0;
  return p;
}

ParseOutcome parse_response(const SystemSpec& spec, std::string_view text) {
  ParseOutcome out;
  out.raw = std::string(text);
  const auto reasoning = extract_block(text, kReasoningOpen, kReasoningClose);
  const auto controls = extract_block(text, kControlsOpen, kControlsClose);
  if (!reasoning || !controls) {
    out.status = ParseStatus::kFormatError;
    return out;
  }
  const int dim = spec.control_dim;
  std::vector<double> values;
  int count = 0;
  if (dim == 1) {
    if (!parse_scalars(*controls, values)) {
      out.status = ParseStatus::kNumericError;
      return out;
    }
    count = static_cast<int>(values.size());
  } else {
    switch (parse_vectors(*controls, dim, values, count)) {
      case VectorScan::kNumeric: out.status = ParseStatus::kNumericError; return out;
      case VectorScan::kArity: out.status = ParseStatus::kLengthError; return out;
      case VectorScan::kOk: break;
    }
  }
  if (count != spec.num_steps) {
    out.status = ParseStatus::kLengthError;
    return out;
  }

  const bool angle = spec.kind == SystemKind::kOrbitRaising;
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<Control> seq;
  seq.reserve(count);
  int clips = 0;
  for (int k = 0; k < count; ++k) {
    Control c(dim);
    for (int i = 0; i < dim; ++i) {
      double v = values[k * dim + i];
      const double lo = spec.control_lower[i], hi = spec.control_upper[i];
      if (angle && (v < 0.0 || v >= two_pi)) {
        // angles wrap; only a bound narrower than a full turn can still clip
        v = std::fmod(v, two_pi);
        if (v < 0.0) v += two_pi;
      }
      if (v < lo || v > hi) {
        v = std::clamp(v, lo, hi);
        ++clips;
      }
      c[i] = v;
    }
    seq.push_back(std::move(c));
  }
  out.status = ParseStatus::kOk;
  out.reasoning = std::string(*reasoning);
  out.controls = std::move(seq);
  out.raw_values = std::move(values);
  out.clip_events = clips;
  return out;
}

std::vector<Control> fallback_controls(const SystemSpec& spec) {
  return std::vector<Control>(spec.num_steps, Control::Zero(spec.control_dim));
}

std::string render_controls(const SystemSpec& spec, std::span<const Control> controls) {
  std::string out;
  if (spec.control_dim == 1) {
    for (std::size_t k = 0; k < controls.size(); ++k) {
      if (k) out += ", ";
      out += format_fixed3(controls[k][0]);
    }
    return out;
  }
  for (std::size_t k = 0; k < controls.size(); ++k) {
    if (k) out += "\n";
    out += "[";
    for (int i = 0; i < controls[k].size(); ++i) {
      if (i) out += ", ";
      out += format_fixed3(controls[k][i]);
    }
    out += "]";
  }
  return out;
}

std::string render_response(const SystemSpec& spec, std::string_view reasoning,
                            std::span<const Control> controls) {
  std::string out;
  out += kReasoningOpen;
  out += "\n";
  out += reasoning;
  out += "\n";
  out += kReasoningClose;
  out += "\n\n";
  out += kControlsOpen;
  out += "\n";
  out += render_controls(spec, controls);
  out += "\n";
  out += kControlsClose;
  return out;
}

}  // namespace grpoctrl
