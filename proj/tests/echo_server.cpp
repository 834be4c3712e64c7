// Stub policy server speaking the bridge protocol on stdin/stdout.
//
//   echo_server [valid|malformed|slow|mute]
//
// valid answers every request; malformed answers with non-JSON; slow sleeps
// 300 ms before each reply; mute reads requests and never answers.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include "echo_logic.hpp"

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "valid";
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "mute") continue;
    if (mode == "malformed") {
      std::cout << "this is {not json" << std::endl;
      continue;
    }
    if (mode == "slow") std::this_thread::sleep_for(std::chrono::milliseconds(300));
    std::cout << grpoctrl::testing::echo_reply(line) << std::endl;
  }
  return 0;
}
