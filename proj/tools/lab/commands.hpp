#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"

namespace chua::lab {

struct RunReport {
  std::string command;
  std::string config_echo;
  double elapsed_seconds{};
  std::vector<std::filesystem::path> files;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::string> warnings;
  int exit_code{0};

  [[nodiscard]] std::string to_json() const;
  [[nodiscard]] double metric(std::string_view name) const;
};

// Each command validates everything and computes its outputs in memory before
// touching the output directory, so a failed run leaves no files behind.
RunReport cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunReport cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunReport cmd_sync(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunReport cmd_comm(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunReport cmd_sound(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Applies "--mismatch" specs such as "none", "c=5%", "r0=5%", "l=2%".
void apply_mismatch(ExperimentConfig& cfg, const std::vector<std::string>& specs);

/// Exit codes: 0 success, 1 validation, 2 numerical failure, 3 IO.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace chua::lab
