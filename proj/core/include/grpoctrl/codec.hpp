#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grpoctrl/dynamics.hpp"
#include "grpoctrl/system.hpp"

namespace grpoctrl {

/// Text protocol shared with external policies.
///
/// A response carries one `<REASONING>...</REASONING>` block and one
/// `<CONTROLS>...</CONTROLS>` block. Scalar-control systems list their values
/// separated by commas and/or whitespace; vector-control systems list
/// bracketed tuples `[u1, u2, u3]`. Numbers are rendered with 3 decimals and
/// parsed at any precision.
struct PromptBundle {
  std::string system_prompt;
  std::string user_prompt;
  SystemSpec spec_snapshot;
  State s0;

  /// system_prompt + blank line + user_prompt; what a plain-text policy sees.
  std::string text() const;
};

enum class ParseStatus { kOk, kFormatError, kLengthError, kNumericError };

std::string_view to_string(ParseStatus status);

struct ParseOutcome {
  ParseStatus status = ParseStatus::kFormatError;
  std::optional<std::string> reasoning;
  std::optional<std::vector<Control>> controls;  // post-clip, only when Ok
  std::vector<double> raw_values;                // parsed scalars before clipping
  int clip_events = 0;
  std::string raw;

  bool ok() const { return status == ParseStatus::kOk; }
};

/// "%.3f" with negative zero normalized to "0.000".
std::string format_fixed3(double value);

PromptBundle encode_prompt(const SystemSpec& spec, const State& s0);

/// Total: never throws on any input text.
ParseOutcome parse_response(const SystemSpec& spec, std::string_view text);

/// Zero controls for every system (zero torque, zero force, thrust angle 0).
std::vector<Control> fallback_controls(const SystemSpec& spec);

/// Body of a <CONTROLS> block for the given sequence.
std::string render_controls(const SystemSpec& spec, std::span<const Control> controls);

std::string render_response(const SystemSpec& spec, std::string_view reasoning,
                            std::span<const Control> controls);

}  // namespace grpoctrl
