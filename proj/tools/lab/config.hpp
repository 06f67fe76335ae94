#pragma once

// Experiment configuration: a flat, ordered set of `key = value` entries with
// the nominal component values as defaults. Files and command-line overrides
// are layered on top; unknown keys are rejected.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "chua/analysis.hpp"
#include "chua/audio.hpp"
#include "chua/error.hpp"
#include "chua/circuit.hpp"
#include "chua/sync.hpp"

namespace chua::lab {

/// Bad configuration or flag values (exit code 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ExperimentConfig {
 public:
  ExperimentConfig();

  /// Reads `key = value` lines; '#' starts a comment.
  void load(std::istream& in, std::string_view origin = "config");
  void load_file(const std::filesystem::path& path);

  /// Overrides one entry. Throws ValidationError on unknown keys.
  void set(std::string_view key, std::string value);
  void set_assignment(std::string_view assignment);  // "key=value"

  [[nodiscard]] const std::string& text(std::string_view key) const;
  [[nodiscard]] double number(std::string_view key) const;
  [[nodiscard]] int integer(std::string_view key) const;
  [[nodiscard]] bool flag(std::string_view key) const;
  [[nodiscard]] std::vector<double> numbers(std::string_view key) const;

  /// Every entry in canonical order; loading it reproduces this config.
  void echo(std::ostream& out) const;
  [[nodiscard]] std::string echo() const;

  [[nodiscard]] CircuitParams circuit() const;
  [[nodiscard]] CircuitParams circuit(double r0) const;
  [[nodiscard]] SimulationOptions simulation() const;
  [[nodiscard]] State init() const;
  [[nodiscard]] ClassifierConfig classifier() const;
  [[nodiscard]] std::vector<double> sweep_values() const;
  [[nodiscard]] SyncConfig sync() const;
  [[nodiscard]] Modulation modulation() const;
  [[nodiscard]] SynthesisOptions synthesis() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// "2000:1800:5" -> 2000, 1995, ..., 1800 (inclusive, either direction).
[[nodiscard]] std::vector<double> parse_range(std::string_view spec);

/// "2200,1900,1870" -> list.
[[nodiscard]] std::vector<double> parse_list(std::string_view spec);

/// Percent or fraction: "5%" -> 0.05, "0.05" -> 0.05.
[[nodiscard]] double parse_fraction(std::string_view text);

}  // namespace chua::lab
