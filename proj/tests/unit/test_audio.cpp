#include <doctest.h>

#include <chua/audio.hpp>
#include <chua/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "oracles.hpp"

using namespace chua;

namespace {

std::string wav_bytes(const AudioClip& clip) {
  std::ostringstream out(std::ios::binary);
  write_wav(clip, out);
  return out.str();
}

std::uint32_t u32_at(const std::string& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[off + i]);
  return v;
}

std::uint16_t u16_at(const std::string& b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) | (static_cast<unsigned char>(b[off + 1]) << 8));
}

Modulation staircase(std::vector<double> levels, double duration = 1.0) {
  return {Staircase{std::move(levels), 100.0}, duration};
}

double average_flatness(const std::vector<double>& x) {
  const std::size_t frame = 1024;
  std::vector<double> avg(frame / 2, 0.0);
  for (std::size_t start = 0; start + frame <= x.size(); start += frame) {
    const auto mag = oracle::frame_spectrum(std::span(x).subspan(start, frame));
    for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += mag[k] * mag[k];
  }
  for (double& a : avg) a = std::sqrt(a);
  return oracle::spectral_flatness(avg);
}

}  // namespace

TEST_CASE("staircase schedule holds each level for a third of the period") {
  const auto sched = modulation_schedule(staircase({2000.0, 1800.0, 1600.0}, 0.02));
  REQUIRE(sched.events.size() == 7);
  for (std::size_t k = 0; k < sched.events.size(); ++k) {
    CHECK(sched.events[k].time == doctest::Approx(k * (10e-3 / 3.0)).epsilon(1e-12));
    CHECK(sched.events[k].action == Action::set_r0);
    CHECK(sched.events[k].r0 == std::vector<double>{2000.0, 1800.0, 1600.0}[k % 3]);
  }
  CHECK(sched.events[3].time == doctest::Approx(10e-3));
  CHECK_FALSE(sched.r0_waveform);
}

TEST_CASE("degenerate modulations are constant") {
  const auto p = nominal::circuit(1000.0);
  const auto constant = simulate(nominal::circuit(1800.0), kDefaultInit, 0.02);

  const auto single = modulation_schedule(staircase({1800.0}, 0.02));
  for (const auto& e : single.events) CHECK(e.r0 == 1800.0);
  const auto stepped = simulate(p, kDefaultInit, 0.02, single);
  CHECK(stepped.samples.back() == constant.samples.back());

  const auto flat = modulation_schedule({SineSweep{1800.0, 0.0, 100.0}, 0.02});
  REQUIRE(flat.r0_waveform);
  for (double t = 0.0; t < 0.02; t += 1.7e-4) CHECK(flat.r0_waveform(t) == 1800.0);
  const auto swept = simulate(p, kDefaultInit, 0.02, flat);
  CHECK(swept.samples.back() == constant.samples.back());

  const auto sine = modulation_schedule({SineSweep{1850.0, 150.0, 100.0}, 0.02});
  CHECK(sine.r0_waveform(2.5e-3) == doctest::Approx(2000.0));
  CHECK(sine.r0_waveform(7.5e-3) == doctest::Approx(1700.0));
}

TEST_CASE("modulation validation") {
  CHECK_THROWS_AS(staircase({}).validate(), DomainError);
  CHECK_THROWS_AS(staircase({1800.0, -1.0}).validate(), DomainError);
  CHECK_THROWS_AS((Modulation{Staircase{{1800.0}, 0.0}, 1.0}.validate()), DomainError);
  CHECK_THROWS_AS((Modulation{SineSweep{1850.0, 1850.0, 100.0}, 1.0}.validate()), DomainError);
  CHECK_THROWS_AS((Modulation{SineSweep{1850.0, -1.0, 100.0}, 1.0}.validate()), DomainError);
  CHECK_THROWS_AS((Modulation{SineSweep{1850.0, 150.0, 100.0}, 0.0}.validate()), DomainError);
  CHECK_NOTHROW(staircase({1800.0}).validate());
}

TEST_CASE("staircase synthesis") {
  const auto p = nominal::circuit(1800.0);
  const auto clip = synthesize(p, staircase({2000.0, 1800.0, 1600.0}));
  CHECK(clip.rate == 44100.0);
  CHECK(clip.samples.size() == 43659);  // 0.99 s after the transient
  CHECK_NOTHROW(clip.validate());
  const double peak = std::abs(*std::ranges::max_element(clip.samples, {}, [](double v) { return std::abs(v); }));
  CHECK(std::abs(peak - 0.9) < 1e-6);

  SUBCASE("bit-identical on rerun") {
    CHECK(wav_bytes(clip) == wav_bytes(synthesize(p, staircase({2000.0, 1800.0, 1600.0}))));
  }
  SUBCASE("spectrum changes from step to step") {
    const double stepped = oracle::step_variance_ratio(clip.samples, clip.rate, 100.0, 3, 0.01);
    const auto control = synthesize(p, staircase({1800.0, 1800.0, 1800.0}));
    const double flat = oracle::step_variance_ratio(control.samples, control.rate, 100.0, 3, 0.01);
    INFO("stepped " << stepped << " control " << flat);
    CHECK(stepped > 3.0 * flat);
    CHECK(stepped > 1.0);
  }
}

TEST_CASE("sine synthesis is broadband") {
  const auto clip = synthesize(nominal::circuit(1800.0), {SineSweep{1850.0, 150.0, 100.0}, 1.0});
  const double peak = std::abs(*std::ranges::max_element(clip.samples, {}, [](double v) { return std::abs(v); }));
  CHECK(std::abs(peak - 0.9) < 1e-6);

  // Baseline: the bare LC tank tone at the same rate and peak.
  const double f_lc = 1.0 / (2.0 * std::numbers::pi * std::sqrt(nominal::kInductance * nominal::kC2));
  std::vector<double> pure(clip.samples.size());
  for (std::size_t k = 0; k < pure.size(); ++k) pure[k] = 0.9 * std::sin(2 * std::numbers::pi * f_lc * k / 44100.0);
  const double chaotic = average_flatness(clip.samples);
  const double tonal = average_flatness(pure);
  INFO("flatness " << chaotic << " vs " << tonal);
  CHECK(chaotic > tonal);
}

TEST_CASE("equilibrium regime is silent") {
  CHECK_THROWS_AS((void)synthesize(nominal::circuit(2200.0), {SineSweep{2200.0, 0.0, 100.0}, 1.0}),
                  DegenerateAudioError);
}

TEST_CASE("synthesis options") {
  const auto p = nominal::circuit(1800.0);
  const Modulation m = staircase({2000.0, 1800.0, 1600.0}, 0.05);
  SynthesisOptions opts;
  opts.rate = 2e6;
  CHECK_THROWS_AS((void)synthesize(p, m, opts), DomainError);
  opts = {};
  CHECK_THROWS_AS((void)synthesize(p, staircase({1800.0}, 0.005), opts), DomainError);
  for (OutputNode node : {OutputNode::v_c2, OutputNode::i_l}) {
    opts.node = node;
    const auto clip = synthesize(p, m, opts);
    CHECK(clip.samples.size() == 1764);
    CHECK_NOTHROW(clip.validate());
  }
  opts = {};
  opts.rate = 8000.0;
  CHECK(synthesize(p, m, opts).samples.size() == 320);
}

TEST_CASE("each staircase level lands in the regime of its constant r0") {
  const auto p = nominal::circuit(1800.0);
  const std::vector<double> levels{2000.0, 1800.0, 1600.0};
  const auto sched = modulation_schedule(staircase(levels, 0.05));
  const auto tr = simulate(p, kDefaultInit, 0.05, sched);
  const double hold = 1.0 / 300.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    // State at the end of this level's last held segment in the run.
    const double t_end = 0.04 + static_cast<double>(i + 1) * hold;
    const auto k = static_cast<std::size_t>(std::llround(t_end / tr.dt_record));
    const auto from_run = classify_regime(nominal::circuit(levels[i]), tr.samples[k]);
    const auto reference = classify_regime(nominal::circuit(levels[i]), kDefaultInit);
    CAPTURE(levels[i]);
    CHECK(from_run == reference);
  }
}

TEST_CASE("WAV header arithmetic") {
  SUBCASE("empty clip") {
    const auto b = wav_bytes({44100.0, {}});
    REQUIRE(b.size() == 44);
    CHECK(b.substr(0, 4) == "RIFF");
    CHECK(u32_at(b, 4) == 36);
    CHECK(b.substr(8, 4) == "WAVE");
    CHECK(b.substr(12, 4) == "fmt ");
    CHECK(u32_at(b, 16) == 16);
    CHECK(u16_at(b, 20) == 1);
    CHECK(u16_at(b, 22) == 1);
    CHECK(u32_at(b, 24) == 44100);
    CHECK(u32_at(b, 28) == 88200);
    CHECK(u16_at(b, 32) == 2);
    CHECK(u16_at(b, 34) == 16);
    CHECK(b.substr(36, 4) == "data");
    CHECK(u32_at(b, 40) == 0);
  }
  SUBCASE("one second at 44.1 kHz") {
    const AudioClip clip{44100.0, std::vector<double>(44100, 0.0)};
    std::ostringstream out(std::ios::binary);
    CHECK(write_wav(clip, out) == 88244);
    const auto b = out.str();
    CHECK(u32_at(b, 40) == 88200);
    CHECK(u32_at(b, 4) == 88236);
  }
  SUBCASE("sample mapping") {
    CHECK(quantize_sample(1.0) == 0x7FFF);
    CHECK(quantize_sample(-1.0) == -32767);
    CHECK(static_cast<std::uint16_t>(quantize_sample(-1.0)) == 0x8001);
    CHECK(quantize_sample(0.0) == 0);
    CHECK(quantize_sample(0.5) == 16384);
    const auto b = wav_bytes({8000.0, {1.0, -1.0}});
    CHECK(u16_at(b, 44) == 0x7FFF);
    CHECK(u16_at(b, 46) == 0x8001);
  }
}

TEST_CASE("WAV round trip") {
  const auto clip = synthesize(nominal::circuit(1800.0), staircase({2000.0, 1800.0, 1600.0}, 0.05));
  std::stringstream io(std::ios::in | std::ios::out | std::ios::binary);
  write_wav(clip, io);
  io.seekg(0);
  const auto back = read_wav(io);
  CHECK(back.rate == clip.rate);
  REQUIRE(back.samples.size() == clip.samples.size());
  for (std::size_t k = 0; k < clip.samples.size(); ++k) {
    REQUIRE(std::abs(back.samples[k] - clip.samples[k]) <= 1.0 / 32767.0);
  }

  const auto path = std::filesystem::temp_directory_path() / "chua_test_roundtrip.wav";
  CHECK(write_wav(clip, path) == 44 + 2 * clip.samples.size());
  std::ifstream in(path, std::ios::binary);
  CHECK(read_wav(in).samples.size() == clip.samples.size());
  std::filesystem::remove(path);
}

TEST_CASE("WAV errors") {
  std::istringstream junk("RIFX0000WAVE");
  CHECK_THROWS_AS((void)read_wav(junk), IoError);
  std::istringstream truncated(std::string("RIFF\x24\0\0\0WAVEfmt ", 16));
  CHECK_THROWS_AS((void)read_wav(truncated), IoError);
  CHECK_THROWS_AS((void)write_wav(AudioClip{44100.0, {0.0}}, std::filesystem::path("/nonexistent/dir/x.wav")), IoError);
  CHECK_THROWS_AS((void)wav_bytes({44100.0, {1.5}}), DomainError);
  CHECK_THROWS_AS((void)wav_bytes({0.0, {}}), DomainError);
}
