#include "grpoctrl/system.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "grpoctrl/errors.hpp"

namespace grpoctrl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonPositiveRadius: return "NonPositiveRadius";
    case ErrorCode::kNonPositiveMass: return "NonPositiveMass";
    case ErrorCode::kNumericalBlowup: return "NumericalBlowup";
    case ErrorCode::kStepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::kSolverFailed: return "SolverFailed";
    case ErrorCode::kNonDecreasingLoss: return "NonDecreasingLoss";
    case ErrorCode::kRatioOverflow: return "RatioOverflow";
    case ErrorCode::kBridgeDisconnected: return "BridgeDisconnected";
    case ErrorCode::kBridgeTimeout: return "BridgeTimeout";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::kDoubleIntegrator: return "double-integrator";
    case SystemKind::kVanDerPol: return "van-der-pol";
    case SystemKind::kOrbitRaising: return "orbit-raising";
    case SystemKind::kDetumbling: return "detumbling";
  }
  return "unknown";
}

SystemKind parse_system_kind(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "doubleintegrator" || key == "di") return SystemKind::kDoubleIntegrator;
  if (key == "vanderpol" || key == "vdp") return SystemKind::kVanDerPol;
  if (key == "orbitraising" || key == "orbit") return SystemKind::kOrbitRaising;
  if (key == "detumbling" || key == "spacecraftdetumbling") return SystemKind::kDetumbling;
  throw Error(ErrorCode::kInvalidArgument, "unknown system '" + std::string(name) + "'");
}

void SystemSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (state_lower.size() != state_dim || state_upper.size() != state_dim)
    fail("state bound dimension mismatch");
  if (control_lower.size() != control_dim || control_upper.size() != control_dim)
    fail("control bound dimension mismatch");
  if ((state_lower.array() >= state_upper.array()).any()) fail("state_lower must be < state_upper");
  if ((control_lower.array() >= control_upper.array()).any())
    fail("control_lower must be < control_upper");
  if (num_steps < 1) fail("num_steps must be >= 1");
  if (!(horizon > 0.0)) fail("horizon must be > 0");
  for (double j : params.inertia_diag)
    if (!(j > 0.0)) fail("inertia entries must be strictly positive");
  if (kind == SystemKind::kOrbitRaising) {
    if (!(params.m0 + params.m1 * horizon > 0.0)) fail("mass must stay positive over the horizon");
    if (!(params.r_target > 0.0)) fail("r_target must be positive");
  }
}

SystemSpec make_system(SystemKind kind) {
  SystemSpec s;
  s.kind = kind;
  switch (kind) {
    case SystemKind::kDoubleIntegrator:
    case SystemKind::kVanDerPol:
      s.state_dim = 2;
      s.control_dim = 1;
      s.state_lower = Vec::Constant(2, -1.0);
      s.state_upper = Vec::Constant(2, 1.0);
      s.control_lower = Vec::Constant(1, -3.0);
      s.control_upper = Vec::Constant(1, 3.0);
      s.horizon = 5.0;
      break;
    case SystemKind::kOrbitRaising:
      s.state_dim = 3;
      s.control_dim = 1;
      s.state_lower = Vec{{0.5, -0.5, 0.5}};
      s.state_upper = Vec{{2.0, 0.5, 1.5}};
      s.control_lower = Vec::Constant(1, 0.0);
      s.control_upper = Vec::Constant(1, 2.0 * std::numbers::pi);
      s.horizon = 4.0;
      break;
    case SystemKind::kDetumbling:
      s.state_dim = 3;
      s.control_dim = 3;
      s.state_lower = Vec::Constant(3, -1.0);
      s.state_upper = Vec::Constant(3, 1.0);
      s.control_lower = Vec::Constant(3, -4.0);
      s.control_upper = Vec::Constant(3, 4.0);
      s.horizon = 5.0;
      break;
  }
  s.num_steps = 10;
  return s;
}

Vec target_state(const SystemSpec& spec) {
  if (spec.kind == SystemKind::kOrbitRaising) {
    const double r = spec.params.r_target;
    return Vec{{r, 0.0, std::sqrt(spec.params.mu_grav / r)}};
  }
  return Vec::Zero(spec.state_dim);
}

Vec clip_to_bounds(const Vec& v, const Vec& lower, const Vec& upper) {
  return v.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace grpoctrl
