#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "chua/circuit.hpp"

namespace chua {

inline constexpr double kDefaultStep = 1e-7;
inline constexpr int kDefaultRecordEvery = 10;
/// |component| beyond this (V or A) is treated as a blow-up.
inline constexpr double kDivergenceLimit = 1e6;

enum class Action { set_r0, close_sync_switch, open_sync_switch };

struct ScheduleEvent {
  double time{};
  Action action{Action::set_r0};
  double r0{};  // only meaningful for set_r0
};

/// Time-ordered parameter changes. A non-empty r0_waveform overrides r0 and
/// any set_r0 events.
struct Schedule {
  std::vector<ScheduleEvent> events;
  std::function<double(double)> r0_waveform;

  void validate() const;
};

/// Uniformly sampled record of a run; sample k is at t0 + k * dt_record.
struct Trajectory {
  double t0{};
  double dt_record{};
  std::vector<State> samples;
  CircuitParams params_used;

  [[nodiscard]] double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt_record; }
  [[nodiscard]] double rate() const { return 1.0 / dt_record; }
  [[nodiscard]] std::vector<double> v_c1() const;
  [[nodiscard]] std::vector<double> v_c2() const;
};

/// One classical fourth-order Runge-Kutta step. Throws DivergenceError on a
/// non-finite result.
[[nodiscard]] State step_rk4(const State& s, double t, double dt, const CircuitParams& p);

/// RK4 step with r0 evaluated at each stage time.
[[nodiscard]] State step_rk4(const State& s, double t, double dt, const CircuitParams& p,
                             const std::function<double(double)>& r0_of_t);

struct SimulationOptions {
  double dt{kDefaultStep};
  int record_every{kDefaultRecordEvery};
  /// Samples before this time are integrated but not stored.
  double discard{0.0};
};

/// Integrates from t = 0 to t_end. Schedule events take effect at the first
/// step boundary at or after their time; switch events are ignored for a
/// single circuit.
[[nodiscard]] Trajectory simulate(const CircuitParams& p, const State& init, double t_end,
                                  const Schedule& sched = {}, const SimulationOptions& opts = {});

/// Boxcar average over each output interval, then sample. Non-integer rate
/// ratios use fractional weights at interval edges.
[[nodiscard]] std::vector<double> decimate(std::span<const double> samples, double source_rate,
                                           double target_rate);

[[nodiscard]] std::vector<State> decimate(const Trajectory& tr, double target_rate);

/// `t,v_c1,v_c2,i_l` rows.
void write_trajectory_csv(std::ostream& out, const Trajectory& tr);

/// `v_c1,v_c2` rows.
void write_phase_csv(std::ostream& out, const Trajectory& tr);

}  // namespace chua
