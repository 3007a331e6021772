#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "paneltk/io.hpp"

namespace paneltk::cli {

// Written beside every command's outputs; rerunning with the recorded
// parameters reproduces deterministic outputs byte for byte (wall time
// excepted).
struct RunManifest {
  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  Json parameters;
  std::optional<std::uint64_t> seed;
  double wall_time_seconds = 0.0;

  Json to_json() const;
};

// Exit codes: 0 success, 2 bad arguments, 3 data error, 4 estimation failure.
int run(int argc, const char* const* argv);

}  // namespace paneltk::cli
