#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <variant>
#include <vector>

#include "chua/analysis.hpp"
#include "chua/circuit.hpp"
#include "chua/integrator.hpp"

namespace chua {

/// R0 stepping through `levels` once per period.
struct Staircase {
  std::vector<double> levels{2000.0, 1800.0, 1600.0};
  double freq{100.0};
};

/// R0(t) = center + depth * sin(2 pi freq t).
struct SineSweep {
  double center{1850.0};
  double depth{150.0};
  double freq{100.0};
};

struct Modulation {
  std::variant<Staircase, SineSweep> kind;
  double duration{1.0};

  void validate() const;
};

[[nodiscard]] Schedule modulation_schedule(const Modulation& m);

enum class OutputNode { v_c1, v_c2, i_l };

struct AudioClip {
  double rate{44100.0};
  std::vector<double> samples;  // each in [-1, 1]

  void validate() const;
};

struct SynthesisOptions {
  double rate{44100.0};
  OutputNode node{OutputNode::v_c1};
  double dt{kDefaultStep};
  int record_every{kDefaultRecordEvery};
  double transient{0.01};
  double peak{0.9};
  State init{kDefaultInit};
};

/// Simulates under the modulation, drops the transient, removes the mean,
/// decimates to the audio rate and normalizes the peak. Throws
/// DegenerateAudioError when the remaining signal is flat (peak < 1e-9).
[[nodiscard]] AudioClip synthesize(const CircuitParams& p, const Modulation& m,
                                   const SynthesisOptions& opts = {});

/// Mono PCM16 RIFF/WAVE. Returns the number of bytes written.
std::size_t write_wav(const AudioClip& clip, std::ostream& out);
std::size_t write_wav(const AudioClip& clip, const std::filesystem::path& path);

/// Parses a mono PCM16 file as written by write_wav.
[[nodiscard]] AudioClip read_wav(std::istream& in);

[[nodiscard]] std::int16_t quantize_sample(double v);

}  // namespace chua
