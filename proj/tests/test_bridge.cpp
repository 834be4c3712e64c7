#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <string>
#include <thread>

#include "echo_logic.hpp"
#include "grpoctrl/bridge.hpp"
#include "grpoctrl/errors.hpp"
#include "grpoctrl/evaluate.hpp"
#include "grpoctrl/grpo.hpp"
#include "json.hpp"

using namespace grpoctrl;
using namespace std::chrono_literals;

namespace {

std::string server(const char* mode) { return std::string("stdio:") + GRPOCTRL_ECHO_SERVER + " " + mode; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

// One-connection TCP echo server on an ephemeral loopback port.
class TcpEcho {
 public:
  TcpEcho() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(::listen(listen_fd_, 1) == 0);
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { serve(); });
  }
  ~TcpEcho() {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    thread_.join();
  }
  int port() const { return port_; }

 private:
  void serve() {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) return;
    std::string buffer;
    char chunk[4096];
    for (;;) {
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      std::size_t pos;
      while ((pos = buffer.find('\n')) != std::string::npos) {
        const std::string reply = testing::echo_reply(buffer.substr(0, pos)) + "\n";
        buffer.erase(0, pos + 1);
        ::send(fd, reply.data(), reply.size(), MSG_NOSIGNAL);
      }
    }
    ::close(fd);
  }

  int listen_fd_ = -1;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_SUITE("bridge") {

TEST_CASE("message round trips and schema") {
  BridgeRequest req;
  req.id = 7;
  req.op = "sample";
  req.prompt = "p";
  req.n = 3;
  req.temperature = 0.5;
  req.seed = 11;
  const auto back = BridgeRequest::from_json(req.to_json());
  CHECK(back.to_json() == req.to_json());
  const auto j = nlohmann::json::parse(req.to_json());
  CHECK(j.at("id") == 7);
  CHECK(j.at("op") == "sample");
  CHECK(req.to_json().find('\n') == std::string::npos);

  BridgeResponse resp;
  resp.id = 7;
  resp.ok = true;
  resp.completions = std::vector<Completion>{{"a", -1.0}, {"b", -2.0}};
  const auto rb = BridgeResponse::from_json(resp.to_json());
  CHECK(rb.id == 7);
  REQUIRE(rb.completions);
  CHECK((*rb.completions)[1].text == "b");
  CHECK((*rb.completions)[1].logprob == -2.0);

  CHECK_THROWS_AS(BridgeResponse::from_json("{not json"), Error);
  CHECK_THROWS_AS(BridgeResponse::from_json("{\"ok\": true}"), Error);
  const auto unknown = BridgeResponse::from_json(testing::echo_reply(R"({"id": 3, "op": "dance"})"));
  CHECK_FALSE(unknown.ok);
  CHECK(unknown.id == 3);
  CHECK(unknown.error);
  CHECK_FALSE(BridgeResponse::from_json(testing::echo_reply("garbage")).ok);
}

TEST_CASE("echo server over stdio drives evaluation and GRPO") {
  BridgePolicy policy(server("valid"), BridgeOptions{5000ms, 3});
  const auto spec = make_system(SystemKind::kDoubleIntegrator);
  const std::vector<State> states{State{{0.5, 0.0}}, State{{-0.3, 0.2}}, State{{0.1, -0.4}}};
  const auto result = evaluate(policy, spec, states);
  CHECK(result.episodes.size() == 3);
  CHECK(result.format_compliance == 1.0);
  CHECK(policy.latencies_ms().size() == 3);

  const auto prompt = encode_prompt(spec, states[0]);
  CHECK(policy.logprob(prompt, testing::echo_completion()) == -1.5);
  policy.snapshot();
  policy.restore();

  auto cfg = GrpoConfig::toy(GrpoConfig::table1());
  GrpoTrainer trainer(policy, spec, cfg);
  const auto report = trainer.step(0);
  CHECK(report.candidates.size() == 8);
  CHECK(report.timeouts == 0);
  CHECK(report.mean_latency_ms > 0.0);
  for (const auto& c : report.candidates) CHECK(c.latency_ms > 0.0);
  CHECK(report.to_json_line().find("\"latency_ms\"") != std::string::npos);
}

TEST_CASE("malformed replies end in BridgeDisconnected") {
  BridgePolicy policy(server("malformed"), BridgeOptions{5000ms, 3});
  const auto prompt = encode_prompt(make_system(SystemKind::kDoubleIntegrator), State{{0.1, 0.1}});
  CHECK(code_of([&] { policy.sample(prompt, 2, 1.0, 0); }) == ErrorCode::kBridgeDisconnected);
}

TEST_CASE("timeouts degrade samples and fail scalar queries") {
  for (const char* mode : {"slow", "mute"}) {
    BridgePolicy policy(server(mode), BridgeOptions{100ms, 3});
    const auto spec = make_system(SystemKind::kDoubleIntegrator);
    const auto prompt = encode_prompt(spec, State{{0.1, 0.1}});
    const auto out = policy.sample(prompt, 3, 1.0, 0);
    REQUIRE(out.size() == 3);
    for (const auto& c : out) {
      CHECK(c.timed_out);
      CHECK(parse_response(spec, c.text).status == ParseStatus::kFormatError);
    }
    CHECK(policy.timeouts() == 1);
    CHECK(code_of([&] { policy.logprob(prompt, "x"); }) == ErrorCode::kBridgeTimeout);
  }
}

TEST_CASE("a server that exits is a disconnect") {
  BridgePolicy policy("stdio:true", BridgeOptions{2000ms, 3});
  const auto prompt = encode_prompt(make_system(SystemKind::kDoubleIntegrator), State{{0.1, 0.1}});
  CHECK(code_of([&] { policy.sample(prompt, 1, 1.0, 0); }) == ErrorCode::kBridgeDisconnected);
}

TEST_CASE("echo server over TCP") {
  TcpEcho echo;
  BridgePolicy policy("tcp:127.0.0.1:" + std::to_string(echo.port()), BridgeOptions{5000ms, 3});
  const auto spec = make_system(SystemKind::kVanDerPol);
  const auto out = policy.sample(encode_prompt(spec, State{{0.2, 0.0}}), 4, 1.0, 9);
  REQUIRE(out.size() == 4);
  for (const auto& c : out) {
    CHECK(parse_response(spec, c.text).ok());
    CHECK(c.logprob == -1.5);
  }
}

TEST_CASE("bad addresses are rejected") {
  CHECK_THROWS_AS(open_channel("carrier-pigeon:home"), Error);
  CHECK_THROWS_AS(open_channel("tcp:127.0.0.1:1"), Error);
}

}  // TEST_SUITE
