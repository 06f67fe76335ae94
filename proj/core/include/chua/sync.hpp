#pragma once

// Drive-response synchronization of two circuits and additive chaotic
// masking on top of it.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "chua/circuit.hpp"
#include "chua/integrator.hpp"

namespace chua {

enum class DriveVariable { v_c1, v_c2 };

enum class CouplingMode { substitution, resistive };

struct Coupling {
  CouplingMode mode{CouplingMode::substitution};
  double r_c{0.0};  // ohms, resistive mode only
};

inline constexpr State kDefaultSlaveInit{-0.1, 0.05, 0.0};

struct SyncConfig {
  CircuitParams master;
  CircuitParams slave;
  double t_sync{0.1};
  double t_end{0.2};
  DriveVariable drive{DriveVariable::v_c1};
  Coupling coupling{};
  State master_init{0.1, 0.0, 0.0};
  State slave_init{kDefaultSlaveInit};
  double dt{kDefaultStep};
  int record_every{kDefaultRecordEvery};
  double settle{0.02};

  void validate() const;

  /// Matched pair of nominal circuits.
  [[nodiscard]] static SyncConfig matched(double r0);
};

struct SyncMetrics {
  double rms_pre{};
  double rms_post{};
  double max_glitch_post{};
  double signal_rms{};
};

/// V_C2 of both circuits ("V_y") on a uniform grid starting at t = 0.
struct SyncResult {
  double dt_record{};
  double t_sync{};
  double t_end{};
  std::vector<double> master_v_y;
  std::vector<double> slave_v_y;
  std::vector<double> difference;
  SyncMetrics metrics;

  [[nodiscard]] double time_at(std::size_t k) const { return static_cast<double>(k) * dt_record; }
};

/// Both circuits run free until t_sync, then the switch closes.
[[nodiscard]] SyncResult run_synchronization(const SyncConfig& cfg);

/// RMS of the difference before t_sync and after t_sync + settle, the largest
/// post-settle deviation, and the RMS of the master's V_y after settling.
[[nodiscard]] SyncMetrics sync_error_metrics(const SyncResult& result, double settle);

/// `t,v_y_master,v_y_slave,difference`
void write_sync_csv(std::ostream& out, const SyncResult& result);

/// Parses the CSV written by write_sync_csv. Metrics are left zero.
[[nodiscard]] SyncResult read_sync_csv(std::istream& in, double t_sync);

/// Uniformly sampled signal, sample k at k * dt.
struct Waveform {
  double dt{};
  std::vector<double> values;

  [[nodiscard]] double time_at(std::size_t k) const { return static_cast<double>(k) * dt; }
  [[nodiscard]] double duration() const {
    return values.empty() ? 0.0 : static_cast<double>(values.size() - 1) * dt;
  }
  /// Cubic (Catmull-Rom) interpolation, clamped at the ends.
  [[nodiscard]] double at(double t) const;
};

/// Sine tone sampled on a uniform grid over [0, duration].
[[nodiscard]] Waveform tone(double freq, double amplitude, double duration, double dt);

/// Linear resampling of `t,value` pairs onto a grid of step dt over [0, duration].
[[nodiscard]] Waveform resample(std::span<const double> times, std::span<const double> values, double dt,
                                double duration);

inline constexpr double kDefaultMaskRatio = 0.05;
/// Resistor feeding the channel into the drive node of both transmitter and
/// receiver. Any value up to ~20 kOhm makes the carrier replica contracting.
inline constexpr double kDefaultInjection = 5000.0;

struct Transmission {
  Waveform drive;    // clean master drive variable
  Waveform channel;  // drive + message
  bool over_amplitude{};
  std::string warning;
};

/// Simulates the master and transmits its drive variable plus `message`.
/// The master is wired like the receiver: its non-drive states see the
/// transmitted signal and its drive node takes (channel - drive) / r_inject.
/// With a zero message this is the free-running circuit.
[[nodiscard]] Transmission mask_transmit(const Waveform& message, const SyncConfig& cfg,
                                         double mask_ratio = kDefaultMaskRatio,
                                         double r_inject = kDefaultInjection);

/// Receiver: after t_sync the slave's non-drive states are driven by the
/// channel and its drive node regenerates the carrier, pulled toward the
/// channel through r_inject. Returns channel minus regenerated carrier on the
/// channel grid. Before t_sync the slave runs free.
[[nodiscard]] Waveform recover_message(const Waveform& channel, const SyncConfig& cfg,
                                       double r_inject = kDefaultInjection);

/// Pearson correlation of two equally long signals.
[[nodiscard]] double correlation(std::span<const double> a, std::span<const double> b);

[[nodiscard]] double rms(std::span<const double> x);

/// `t,original,recovered`
void write_message_csv(std::ostream& out, const Waveform& original, const Waveform& recovered);

/// `t,value` rows; header line optional.
void read_message_csv(std::istream& in, std::vector<double>& times, std::vector<double>& values);

}  // namespace chua
