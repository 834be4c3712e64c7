#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "grpoctrl/policy.hpp"

namespace grpoctrl {

/// Wire messages, one JSON document per line.
///   request:  {id, op: sample|logprob|snapshot|restore|update, prompt?, completion?,
///              n?, temperature?, seed?, completions?, weights?}
///   response: {id, ok, completions?: [{text, logprob}], logprob?, error?}
struct BridgeRequest {
  std::uint64_t id = 0;
  std::string op;
  std::optional<std::string> prompt;
  std::optional<std::string> completion;
  std::optional<int> n;
  std::optional<double> temperature;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::string>> completions;  // update only
  std::optional<std::vector<double>> weights;           // update only: dL/dlogprob_j

  std::string to_json() const;
  static BridgeRequest from_json(std::string_view line);
};

struct BridgeResponse {
  std::uint64_t id = 0;
  bool ok = false;
  std::optional<std::vector<Completion>> completions;
  std::optional<double> logprob;
  std::optional<std::string> error;

  std::string to_json() const;
  /// Throws Error(kInvalidArgument) on malformed input.
  static BridgeResponse from_json(std::string_view line);
};

/// Answers one request line the way a conforming server must: unknown ops
/// and malformed requests yield ok=false.
BridgeResponse unsupported_op_response(std::uint64_t id, std::string_view op);

/// A bidirectional byte stream carrying newline-delimited messages.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(const std::string& line) = 0;
  /// Empty optional on timeout. Throws Error(kBridgeDisconnected) at end of stream.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
};

/// "stdio:<shell command>" spawns the command and talks over its standard
/// streams; "tcp:<host>:<port>" connects a socket.
std::unique_ptr<LineChannel> open_channel(const std::string& address);

struct BridgeOptions {
  std::chrono::milliseconds timeout{120000};
  int max_malformed = 3;  // consecutive malformed replies before giving up
};

/// PolicyHandle over the wire protocol. One request in flight at a time.
/// sample() timeouts degrade into empty completions (which parse as
/// FormatError); logprob/snapshot/restore timeouts throw
/// Error(kBridgeTimeout). A dead stream or repeated malformed replies throw
/// Error(kBridgeDisconnected).
class BridgePolicy final : public PolicyHandle {
 public:
  BridgePolicy(std::unique_ptr<LineChannel> channel, BridgeOptions options = {});
  explicit BridgePolicy(const std::string& address, BridgeOptions options = {});

  std::vector<Completion> sample(const PromptBundle& prompt, int n, double temperature,
                                 std::uint64_t seed) override;
  double logprob(const PromptBundle& prompt, std::string_view completion) override;
  void snapshot() override;
  void restore() override;
  void update(const PromptBundle& prompt, std::span<const std::string> completions,
              std::span<const double> loss_weights) override;

  /// Round-trip time of every request, in order.
  const std::vector<double>& latencies_ms() const { return latencies_; }
  /// Number of requests that timed out.
  int timeouts() const { return timeouts_; }

 private:
  // nullopt on timeout
  std::optional<BridgeResponse> call(BridgeRequest request, double& latency_ms);

  std::unique_ptr<LineChannel> channel_;
  BridgeOptions options_;
  std::uint64_t next_id_ = 1;
  std::vector<double> latencies_;
  int timeouts_ = 0;
};

}  // namespace grpoctrl
