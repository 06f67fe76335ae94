#include "chua/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include "chua/error.hpp"

namespace chua {

namespace {

constexpr double kSilence = 1e-9;

template <typename T>
void put_le(std::ostream& out, T value) {
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i, u >>= 8) out.put(static_cast<char>(u & 0xFF));
}

template <typename T>
T get_le(std::istream& in) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw IoError("truncated WAV file");
    u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(u);
}

void expect_tag(std::istream& in, const char* tag) {
  std::array<char, 4> buf{};
  in.read(buf.data(), 4);
  if (!in || !std::equal(buf.begin(), buf.end(), tag)) throw IoError(std::string("expected WAV tag ") + tag);
}

}  // namespace

void Modulation::validate() const {
  if (!(duration > 0.0)) throw DomainError("modulation duration must be > 0");
  if (const auto* s = std::get_if<Staircase>(&kind)) {
    if (s->levels.empty()) throw DomainError("staircase needs at least one level");
    for (double r : s->levels) {
      if (!(std::isfinite(r) && r > 0.0)) throw DomainError("staircase levels must be > 0");
    }
    if (!(s->freq > 0.0)) throw DomainError("staircase frequency must be > 0");
  } else {
    const auto& w = std::get<SineSweep>(kind);
    if (!(w.freq > 0.0)) throw DomainError("sine frequency must be > 0");
    if (!(w.center > 0.0) || !(w.depth >= 0.0) || !(w.depth < w.center)) {
      throw DomainError("sine modulation needs 0 <= depth < center");
    }
  }
}

Schedule modulation_schedule(const Modulation& m) {
  m.validate();
  Schedule sched;
  if (const auto* s = std::get_if<Staircase>(&m.kind)) {
    const double hold = 1.0 / (s->freq * static_cast<double>(s->levels.size()));
    for (std::size_t k = 0;; ++k) {
      const double t = static_cast<double>(k) * hold;
      if (t > m.duration) break;
      sched.events.push_back({t, Action::set_r0, s->levels[k % s->levels.size()]});
    }
  } else {
    const auto w = std::get<SineSweep>(m.kind);
    sched.r0_waveform = [w](double t) {
      return w.center + w.depth * std::sin(2.0 * std::numbers::pi * w.freq * t);
    };
  }
  return sched;
}

void AudioClip::validate() const {
  if (!(rate > 0.0)) throw DomainError("audio rate must be > 0");
  for (double v : samples) {
    if (!(v >= -1.0 && v <= 1.0)) throw DomainError("audio samples must lie in [-1, 1]");
  }
}

AudioClip synthesize(const CircuitParams& p, const Modulation& m, const SynthesisOptions& opts) {
  m.validate();
  const double record_rate = 1.0 / (opts.dt * opts.record_every);
  if (!(opts.rate > 0.0) || opts.rate > record_rate * (1.0 + 1e-12)) {
    throw DomainError("audio rate must be > 0 and not exceed the recording rate");
  }
  if (m.duration < opts.transient) throw DomainError("modulation shorter than the transient");
  if (!(opts.peak > 0.0 && opts.peak <= 1.0)) throw DomainError("normalization peak must be in (0, 1]");

  const auto tr = simulate(p, opts.init, m.duration, modulation_schedule(m),
                           {opts.dt, opts.record_every, opts.transient});
  std::vector<double> node(tr.samples.size());
  for (std::size_t k = 0; k < node.size(); ++k) {
    const auto& s = tr.samples[k];
    node[k] = opts.node == OutputNode::v_c1 ? s.v_c1 : opts.node == OutputNode::v_c2 ? s.v_c2 : s.i_l;
  }
  AudioClip clip{opts.rate, decimate(node, record_rate, opts.rate)};
  double mean = 0.0;
  for (double v : clip.samples) mean += v;
  if (!clip.samples.empty()) mean /= static_cast<double>(clip.samples.size());
  double peak = 0.0;
  for (double& v : clip.samples) {
    v -= mean;
    peak = std::max(peak, std::abs(v));
  }
  if (!(peak >= kSilence)) throw DegenerateAudioError("synthesized waveform is silent (peak below 1e-9)");
  const double gain = opts.peak / peak;
  for (double& v : clip.samples) v = std::clamp(v * gain, -opts.peak, opts.peak);
  return clip;
}

std::int16_t quantize_sample(double v) {
  return static_cast<std::int16_t>(std::lround(std::clamp(v, -1.0, 1.0) * 32767.0));
}

std::size_t write_wav(const AudioClip& clip, std::ostream& out) {
  clip.validate();
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.rate));
  constexpr std::uint16_t channels = 1;
  constexpr std::uint16_t bits = 16;
  constexpr std::uint16_t block_align = channels * bits / 8;
  const auto data_size = static_cast<std::uint32_t>(clip.samples.size() * block_align);

  out.write("RIFF", 4);
  put_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, 1);  // PCM
  put_le<std::uint16_t>(out, channels);
  put_le<std::uint32_t>(out, rate);
  put_le<std::uint32_t>(out, rate * block_align);
  put_le<std::uint16_t>(out, block_align);
  put_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  put_le<std::uint32_t>(out, data_size);
  for (double v : clip.samples) put_le<std::int16_t>(out, quantize_sample(v));
  if (!out) throw IoError("failed writing WAV data");
  return 44 + static_cast<std::size_t>(data_size);
}

std::size_t write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return write_wav(clip, out);
}

AudioClip read_wav(std::istream& in) {
  expect_tag(in, "RIFF");
  (void)get_le<std::uint32_t>(in);
  expect_tag(in, "WAVE");
  expect_tag(in, "fmt ");
  if (get_le<std::uint32_t>(in) != 16) throw IoError("unsupported fmt chunk size");
  if (get_le<std::uint16_t>(in) != 1) throw IoError("only PCM WAV is supported");
  if (get_le<std::uint16_t>(in) != 1) throw IoError("only mono WAV is supported");
  AudioClip clip;
  clip.rate = get_le<std::uint32_t>(in);
  (void)get_le<std::uint32_t>(in);
  (void)get_le<std::uint16_t>(in);
  if (get_le<std::uint16_t>(in) != 16) throw IoError("only 16-bit WAV is supported");
  expect_tag(in, "data");
  const auto size = get_le<std::uint32_t>(in);
  clip.samples.resize(size / 2);
  for (double& v : clip.samples) v = get_le<std::int16_t>(in) / 32767.0;
  return clip;
}

}  // namespace chua
