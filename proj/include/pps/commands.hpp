#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pps/config.hpp"

namespace pps {

struct CommandOptions {
  std::string verb;
  std::optional<double> t_dark;                 // sweep-probe
  std::optional<std::filesystem::path> input;   // eth-fit, classify, fit
  std::optional<std::filesystem::path> bath;    // eth-fit with --input
  std::optional<double> duration;               // fit
  bool check = false;                           // units
  std::optional<std::string> output_dir;
  std::vector<std::string> argv;
};

const std::vector<std::string>& command_verbs();

// Writes artifacts and manifest.json into the output directory; returns the exit status.
// Solver and input errors propagate as exceptions.
int run_command(const RunConfig& config, const CommandOptions& options, std::ostream& out);

}  // namespace pps
