#include "grpoctrl/bridge.hpp"

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <limits>

#include "grpoctrl/errors.hpp"
#include "json.hpp"

namespace grpoctrl {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

class SocketChannel final : public LineChannel {
 public:
  SocketChannel(int fd, pid_t child) : fd_(fd), child_(child) {}
  ~SocketChannel() override {
    ::close(fd_);
    if (child_ > 0) {
      // give a well-behaved server a moment to exit on end of stream
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(child_, nullptr, WNOHANG) == child_) return;
        ::usleep(2000);
      }
      ::kill(child_, SIGTERM);
      ::waitpid(child_, nullptr, 0);
    }
  }

  void write_line(const std::string& line) override {
    std::string data = line + "\n";
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kBridgeDisconnected,
                    std::string("bridge write failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override {
    const auto deadline = Clock::now() + timeout;
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kBridgeDisconnected, "bridge poll failed");
      }
      if (ready == 0) return std::nullopt;
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw Error(ErrorCode::kBridgeDisconnected, "bridge read failed");
      }
      if (n == 0) throw Error(ErrorCode::kBridgeDisconnected, "bridge closed the stream");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  pid_t child_;
  std::string buffer_;
};

std::unique_ptr<LineChannel> spawn(const std::string& command) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0)
    throw Error(ErrorCode::kBridgeDisconnected, "socketpair failed");
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw Error(ErrorCode::kBridgeDisconnected, "fork failed");
  }
  if (pid == 0) {
    ::close(sv[0]);
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::close(sv[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(sv[1]);
  return std::make_unique<SocketChannel>(sv[0], pid);
}

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0)
    throw Error(ErrorCode::kBridgeDisconnected, "cannot resolve " + host);
  int fd = -1;
  for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error(ErrorCode::kBridgeDisconnected, "cannot connect to " + host + ":" + port);
  return std::make_unique<SocketChannel>(fd, -1);
}

}  // namespace

std::unique_ptr<LineChannel> open_channel(const std::string& address) {
  if (address.rfind("stdio:", 0) == 0) return spawn(address.substr(6));
  if (address.rfind("tcp:", 0) == 0) {
    const std::string rest = address.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos)
      throw Error(ErrorCode::kInvalidArgument, "tcp address needs host:port");
    return connect_tcp(rest.substr(0, colon), rest.substr(colon + 1));
  }
  throw Error(ErrorCode::kInvalidArgument, "bridge address must start with stdio: or tcp:");
}

std::string BridgeRequest::to_json() const {
  json j = {{"id", id}, {"op", op}};
  if (prompt) j["prompt"] = *prompt;
  if (completion) j["completion"] = *completion;
  if (n) j["n"] = *n;
  if (temperature) j["temperature"] = *temperature;
  if (seed) j["seed"] = *seed;
  if (completions) j["completions"] = *completions;
  if (weights) j["weights"] = *weights;
  return j.dump();
}

BridgeRequest BridgeRequest::from_json(std::string_view line) {
  BridgeRequest r;
  try {
    const json j = json::parse(line);
    r.id = j.at("id").get<std::uint64_t>();
    r.op = j.at("op").get<std::string>();
    if (j.contains("prompt")) r.prompt = j.at("prompt").get<std::string>();
    if (j.contains("completion")) r.completion = j.at("completion").get<std::string>();
    if (j.contains("n")) r.n = j.at("n").get<int>();
    if (j.contains("temperature")) r.temperature = j.at("temperature").get<double>();
    if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("completions"))
      r.completions = j.at("completions").get<std::vector<std::string>>();
    if (j.contains("weights")) r.weights = j.at("weights").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed request: ") + e.what());
  }
  return r;
}

std::string BridgeResponse::to_json() const {
  json j = {{"id", id}, {"ok", ok}};
  if (completions) {
    json list = json::array();
    for (const auto& c : *completions) list.push_back({{"text", c.text}, {"logprob", c.logprob}});
    j["completions"] = list;
  }
  if (logprob) j["logprob"] = *logprob;
  if (error) j["error"] = *error;
  return j.dump();
}

BridgeResponse BridgeResponse::from_json(std::string_view line) {
  BridgeResponse r;
  try {
    const json j = json::parse(line);
    r.id = j.at("id").get<std::uint64_t>();
    r.ok = j.at("ok").get<bool>();
    if (j.contains("completions")) {
      std::vector<Completion> list;
      for (const auto& c : j.at("completions"))
        list.push_back({c.at("text").get<std::string>(), c.at("logprob").get<double>()});
      r.completions = std::move(list);
    }
    if (j.contains("logprob") && !j.at("logprob").is_null())
      r.logprob = j.at("logprob").get<double>();
    if (j.contains("error") && !j.at("error").is_null())
      r.error = j.at("error").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed response: ") + e.what());
  }
  return r;
}

BridgeResponse unsupported_op_response(std::uint64_t id, std::string_view op) {
  BridgeResponse r;
  r.id = id;
  r.ok = false;
  r.error = "unknown op: " + std::string(op);
  return r;
}

BridgePolicy::BridgePolicy(std::unique_ptr<LineChannel> channel, BridgeOptions options)
    : channel_(std::move(channel)), options_(options) {}

BridgePolicy::BridgePolicy(const std::string& address, BridgeOptions options)
    : BridgePolicy(open_channel(address), options) {}

std::optional<BridgeResponse> BridgePolicy::call(BridgeRequest request, double& latency_ms) {
  const auto start = Clock::now();
  int malformed = 0;
  request.id = next_id_++;
  channel_->write_line(request.to_json());
  const auto deadline = start + options_.timeout;
  for (;;) {
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    std::optional<std::string> line;
    if (left.count() > 0) line = channel_->read_line(left);
    if (!line) {
      latency_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      latencies_.push_back(latency_ms);
      ++timeouts_;
      return std::nullopt;
    }
    BridgeResponse response;
    try {
      response = BridgeResponse::from_json(*line);
    } catch (const Error&) {
      if (++malformed > options_.max_malformed)
        throw Error(ErrorCode::kBridgeDisconnected,
                    "bridge sent malformed replies after " +
                        std::to_string(options_.max_malformed) + " retries");
      request.id = next_id_++;
      channel_->write_line(request.to_json());
      continue;
    }
    if (response.id != request.id) continue;  // stale reply to a timed-out request
    latency_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    latencies_.push_back(latency_ms);
    return response;
  }
}

std::vector<Completion> BridgePolicy::sample(const PromptBundle& prompt, int n,
                                             double temperature, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  BridgeRequest req;
  req.op = "sample";
  req.prompt = prompt.text();
  req.n = n;
  req.temperature = temperature;
  req.seed = seed;
  double latency = 0.0;
  const auto response = call(std::move(req), latency);
  std::vector<Completion> out;
  if (response && response->ok && response->completions &&
      static_cast<int>(response->completions->size()) == n) {
    out = *response->completions;
  } else {
    // degraded: empty texts score as FormatError downstream
    out.assign(n, Completion{});
    for (auto& c : out) c.timed_out = !response.has_value();
  }
  for (auto& c : out) c.latency_ms = latency;
  return out;
}

double BridgePolicy::logprob(const PromptBundle& prompt, std::string_view completion) {
  BridgeRequest req;
  req.op = "logprob";
  req.prompt = prompt.text();
  req.completion = std::string(completion);
  double latency = 0.0;
  const auto response = call(std::move(req), latency);
  if (!response) throw Error(ErrorCode::kBridgeTimeout, "logprob request timed out");
  if (!response->ok || !response->logprob)
    throw Error(ErrorCode::kInvalidArgument,
                "bridge logprob failed: " + response->error.value_or("no logprob"));
  return *response->logprob;
}

void BridgePolicy::snapshot() {
  BridgeRequest req;
  req.op = "snapshot";
  double latency = 0.0;
  if (!call(std::move(req), latency))
    throw Error(ErrorCode::kBridgeTimeout, "snapshot request timed out");
  // ok=false means the server keeps no parameter state; nothing to track
}

void BridgePolicy::restore() {
  BridgeRequest req;
  req.op = "restore";
  double latency = 0.0;
  if (!call(std::move(req), latency))
    throw Error(ErrorCode::kBridgeTimeout, "restore request timed out");
}

void BridgePolicy::update(const PromptBundle& prompt, std::span<const std::string> completions,
                          std::span<const double> loss_weights) {
  BridgeRequest req;
  req.op = "update";
  req.prompt = prompt.text();
  req.completions = std::vector<std::string>(completions.begin(), completions.end());
  req.weights = std::vector<double>(loss_weights.begin(), loss_weights.end());
  double latency = 0.0;
  if (!call(std::move(req), latency))
    throw Error(ErrorCode::kBridgeTimeout, "update request timed out");
}

}  // namespace grpoctrl
