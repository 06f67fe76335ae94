#include "chua/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "chua/error.hpp"
#include "chua/format.hpp"

namespace chua {

namespace {

void check_bounded(const State& s, double t) {
  if (!s.finite()) throw DivergenceError(t, "state became non-finite");
  if (std::abs(s.v_c1) > kDivergenceLimit || std::abs(s.v_c2) > kDivergenceLimit ||
      std::abs(s.i_l) > kDivergenceLimit) {
    throw DivergenceError(t, "state exceeded divergence limit");
  }
}

State rk4(const State& s, double dt, const CircuitParams& p, double r0_start, double r0_mid,
          double r0_end) {
  const State k1 = vector_field(s, p, r0_start);
  const State k2 = vector_field(s + (0.5 * dt) * k1, p, r0_mid);
  const State k3 = vector_field(s + (0.5 * dt) * k2, p, r0_mid);
  const State k4 = vector_field(s + dt * k3, p, r0_end);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

void Schedule::validate() const {
  double previous = 0.0;
  for (const auto& e : events) {
    if (!std::isfinite(e.time) || e.time < previous) {
      throw DomainError("schedule event times must be finite, >= 0 and non-decreasing");
    }
    previous = e.time;
    if (e.action == Action::set_r0 && !(std::isfinite(e.r0) && e.r0 > 0.0)) {
      throw DomainError("scheduled r0 must be > 0");
    }
  }
}

std::vector<double> Trajectory::v_c1() const {
  std::vector<double> out(samples.size());
  std::ranges::transform(samples, out.begin(), &State::v_c1);
  return out;
}

std::vector<double> Trajectory::v_c2() const {
  std::vector<double> out(samples.size());
  std::ranges::transform(samples, out.begin(), &State::v_c2);
  return out;
}

State step_rk4(const State& s, double t, double dt, const CircuitParams& p) {
  if (!(dt > 0.0)) throw DomainError("step size must be > 0");
  State next = rk4(s, dt, p, p.r0, p.r0, p.r0);
  if (!next.finite()) throw DivergenceError(t + dt, "RK4 step produced a non-finite state");
  return next;
}

State step_rk4(const State& s, double t, double dt, const CircuitParams& p,
               const std::function<double(double)>& r0_of_t) {
  if (!(dt > 0.0)) throw DomainError("step size must be > 0");
  State next = rk4(s, dt, p, r0_of_t(t), r0_of_t(t + 0.5 * dt), r0_of_t(t + dt));
  if (!next.finite()) throw DivergenceError(t + dt, "RK4 step produced a non-finite state");
  return next;
}

Trajectory simulate(const CircuitParams& p, const State& init, double t_end, const Schedule& sched,
                    const SimulationOptions& opts) {
  p.validate();
  sched.validate();
  if (!(t_end > 0.0)) throw DomainError("t_end must be > 0");
  if (!(opts.dt > 0.0)) throw DomainError("dt must be > 0");
  if (opts.record_every < 1) throw DomainError("record_every must be >= 1");
  if (!init.finite()) throw DomainError("initial state is not finite");

  const auto steps = static_cast<long long>(std::llround(t_end / opts.dt));
  const long long first_recorded = [&] {
    const auto k = static_cast<long long>(std::ceil(opts.discard / opts.dt - 1e-9));
    return (k + opts.record_every - 1) / opts.record_every * opts.record_every;
  }();

  Trajectory tr{static_cast<double>(first_recorded) * opts.dt,
                opts.dt * opts.record_every,
                {},
                p};
  if (steps >= first_recorded) {
    tr.samples.reserve(static_cast<std::size_t>((steps - first_recorded) / opts.record_every + 1));
  }

  CircuitParams current = p;
  State s = init;
  std::size_t next_event = 0;
  const bool continuous = static_cast<bool>(sched.r0_waveform);

  for (long long k = 0;; ++k) {
    const double t = static_cast<double>(k) * opts.dt;
    if (!continuous) {
      // Quantize events to this step boundary.
      while (next_event < sched.events.size() && sched.events[next_event].time <= t + 1e-12 * opts.dt) {
        const auto& e = sched.events[next_event++];
        if (e.action == Action::set_r0) current.r0 = e.r0;
      }
    }
    if (k >= first_recorded && (k - first_recorded) % opts.record_every == 0) {
      tr.samples.push_back(s);
    }
    if (k == steps) break;
    s = continuous ? rk4(s, opts.dt, current, sched.r0_waveform(t), sched.r0_waveform(t + 0.5 * opts.dt),
                         sched.r0_waveform(t + opts.dt))
                   : rk4(s, opts.dt, current, current.r0, current.r0, current.r0);
    check_bounded(s, t + opts.dt);
  }
  return tr;
}

std::vector<double> decimate(std::span<const double> samples, double source_rate, double target_rate) {
  if (!(target_rate > 0.0) || !(source_rate > 0.0)) throw DomainError("rates must be > 0");
  if (target_rate > source_rate * (1.0 + 1e-12)) {
    throw DomainError("target rate exceeds the recording rate");
  }
  const double ratio = source_rate / target_rate;
  if (std::abs(ratio - 1.0) < 1e-12) return {samples.begin(), samples.end()};

  // Output sample j averages input over [j*ratio, (j+1)*ratio), treating
  // input sample i as covering [i, i+1).
  const auto n_out = static_cast<std::size_t>(std::floor(static_cast<double>(samples.size()) / ratio + 1e-9));
  std::vector<double> out;
  out.reserve(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double lo = static_cast<double>(j) * ratio;
    const double hi = lo + ratio;
    auto i = static_cast<std::size_t>(std::floor(lo));
    double acc = 0.0;
    double weight = 0.0;
    for (; i < samples.size() && static_cast<double>(i) < hi; ++i) {
      const double w = std::min(hi, static_cast<double>(i) + 1.0) - std::max(lo, static_cast<double>(i));
      acc += w * samples[i];
      weight += w;
    }
    out.push_back(acc / weight);
  }
  return out;
}

std::vector<State> decimate(const Trajectory& tr, double target_rate) {
  const auto v1 = decimate(tr.v_c1(), tr.rate(), target_rate);
  const auto v2 = decimate(tr.v_c2(), tr.rate(), target_rate);
  std::vector<double> il(tr.samples.size());
  std::ranges::transform(tr.samples, il.begin(), &State::i_l);
  const auto i = decimate(il, tr.rate(), target_rate);
  std::vector<State> out(v1.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {v1[k], v2[k], i[k]};
  return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& tr) {
  out << "t,v_c1,v_c2,i_l\n";
  for (std::size_t k = 0; k < tr.samples.size(); ++k) {
    const auto& s = tr.samples[k];
    out << format_number(tr.time_at(k)) << ',' << format_number(s.v_c1) << ','
        << format_number(s.v_c2) << ',' << format_number(s.i_l) << '\n';
  }
}

void write_phase_csv(std::ostream& out, const Trajectory& tr) {
  out << "v_c1,v_c2\n";
  for (const auto& s : tr.samples) {
    out << format_number(s.v_c1) << ',' << format_number(s.v_c2) << '\n';
  }
}

}  // namespace chua
