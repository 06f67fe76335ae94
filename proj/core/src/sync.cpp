#include "chua/sync.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "chua/error.hpp"
#include "chua/format.hpp"

namespace chua {

namespace {

double& drive_of(State& s, DriveVariable d) { return d == DriveVariable::v_c1 ? s.v_c1 : s.v_c2; }
double drive_of(const State& s, DriveVariable d) { return d == DriveVariable::v_c1 ? s.v_c1 : s.v_c2; }

void check_bounded(const State& s, double t) {
  if (!s.finite() || std::abs(s.v_c1) > kDivergenceLimit || std::abs(s.v_c2) > kDivergenceLimit ||
      std::abs(s.i_l) > kDivergenceLimit) {
    throw DivergenceError(t, "synchronization run diverged");
  }
}

/// Slave derivative with the drive node fed by `drive_value`. In substitution
/// mode the drive node itself is held (zero derivative) and overwritten after
/// the step; in resistive mode a coupling current is injected.
State coupled_field(const State& x, const CircuitParams& p, const SyncConfig& cfg, double drive_value) {
  if (cfg.coupling.mode == CouplingMode::resistive) {
    State d = vector_field(x, p);
    const double cap = cfg.drive == DriveVariable::v_c1 ? p.c1 : p.c2;
    drive_of(d, cfg.drive) += (drive_value - drive_of(x, cfg.drive)) / (cfg.coupling.r_c * cap);
    return d;
  }
  State y = x;
  drive_of(y, cfg.drive) = drive_value;
  State d = vector_field(y, p);
  drive_of(d, cfg.drive) = 0.0;
  return d;
}

/// Receiver derivative: the non-drive states see `channel` in place of the
/// drive node; the drive replica runs on the receiver's own states plus a
/// current (channel - replica) / r_inject into its capacitor.
State receiver_field(const State& x, const CircuitParams& p, DriveVariable drive, double channel, double r_inject) {
  State y = x;
  drive_of(y, drive) = channel;
  State d = vector_field(y, p);
  const double cap = drive == DriveVariable::v_c1 ? p.c1 : p.c2;
  drive_of(d, drive) = drive_of(vector_field(x, p), drive) + (channel - drive_of(x, drive)) / (r_inject * cap);
  return d;
}

void check_injection(double r_inject) {
  if (!(r_inject > 0.0)) throw DomainError("injection resistance must be > 0");
}

State rk4_free(const State& s, double dt, const CircuitParams& p) {
  const State k1 = vector_field(s, p);
  const State k2 = vector_field(s + (0.5 * dt) * k1, p);
  const State k3 = vector_field(s + (0.5 * dt) * k2, p);
  const State k4 = vector_field(s + dt * k3, p);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double rms_range(std::span<const double> x, std::size_t first, std::size_t last) {
  if (last <= first) throw DomainError("metric window is empty");
  double acc = 0.0;
  for (std::size_t k = first; k < last; ++k) acc += x[k] * x[k];
  return std::sqrt(acc / static_cast<double>(last - first));
}

std::size_t first_index_at_or_after(double t, double dt) {
  return static_cast<std::size_t>(std::max(0.0, std::ceil(t / dt - 1e-9)));
}

}  // namespace

void SyncConfig::validate() const {
  master.validate();
  slave.validate();
  if (!(t_sync > 0.0 && t_sync < t_end)) throw DomainError("need 0 < t_sync < t_end");
  if (coupling.mode == CouplingMode::resistive && !(coupling.r_c > 0.0)) {
    throw DomainError("resistive coupling needs r_c > 0");
  }
  if (!(dt > 0.0) || record_every < 1) throw DomainError("need dt > 0 and record_every >= 1");
  if (!(settle >= 0.0)) throw DomainError("settle must be >= 0");
  if (!master_init.finite() || !slave_init.finite()) throw DomainError("initial states must be finite");
}

SyncConfig SyncConfig::matched(double r0) {
  return {nominal::circuit(r0), nominal::circuit(r0)};
}

SyncResult run_synchronization(const SyncConfig& cfg) {
  cfg.validate();
  const double dt = cfg.dt;
  const auto steps = static_cast<long long>(std::llround(cfg.t_end / dt));
  SyncResult r;
  r.dt_record = dt * cfg.record_every;
  r.t_sync = cfg.t_sync;
  r.t_end = cfg.t_end;
  const auto n_rec = static_cast<std::size_t>(steps / cfg.record_every + 1);
  r.master_v_y.reserve(n_rec);
  r.slave_v_y.reserve(n_rec);

  State m = cfg.master_init;
  State s = cfg.slave_init;
  const auto& pm = cfg.master;
  const auto& ps = cfg.slave;
  const DriveVariable dv = cfg.drive;
  for (long long k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k % cfg.record_every == 0) {
      r.master_v_y.push_back(m.v_c2);
      r.slave_v_y.push_back(s.v_c2);
    }
    if (k == steps) break;
    const bool closed = t >= cfg.t_sync - 1e-12 * dt;
    if (!closed) {
      m = rk4_free(m, dt, pm);
      s = rk4_free(s, dt, ps);
    } else {
      const State a1 = vector_field(m, pm);
      const State ma = m + (0.5 * dt) * a1;
      const State a2 = vector_field(ma, pm);
      const State mb = m + (0.5 * dt) * a2;
      const State a3 = vector_field(mb, pm);
      const State mc = m + dt * a3;
      const State a4 = vector_field(mc, pm);
      const State b1 = coupled_field(s, ps, cfg, drive_of(m, dv));
      const State b2 = coupled_field(s + (0.5 * dt) * b1, ps, cfg, drive_of(ma, dv));
      const State b3 = coupled_field(s + (0.5 * dt) * b2, ps, cfg, drive_of(mb, dv));
      const State b4 = coupled_field(s + dt * b3, ps, cfg, drive_of(mc, dv));
      m = m + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      s = s + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
      if (cfg.coupling.mode == CouplingMode::substitution) drive_of(s, dv) = drive_of(m, dv);
    }
    check_bounded(m, t + dt);
    check_bounded(s, t + dt);
  }
  r.difference.resize(r.master_v_y.size());
  for (std::size_t k = 0; k < r.difference.size(); ++k) r.difference[k] = r.master_v_y[k] - r.slave_v_y[k];
  r.metrics = sync_error_metrics(r, cfg.settle);
  return r;
}

SyncMetrics sync_error_metrics(const SyncResult& result, double settle) {
  if (!(settle >= 0.0) || settle >= result.t_end - result.t_sync) {
    throw DomainError("settle must lie inside the post-sync window");
  }
  const std::size_t n = result.difference.size();
  const std::size_t sync_idx = std::min(n, first_index_at_or_after(result.t_sync, result.dt_record));
  const std::size_t post_idx = std::min(n, first_index_at_or_after(result.t_sync + settle, result.dt_record));
  SyncMetrics m;
  m.rms_pre = rms_range(result.difference, 0, sync_idx);
  m.rms_post = rms_range(result.difference, post_idx, n);
  m.signal_rms = rms_range(result.master_v_y, post_idx, n);
  for (std::size_t k = post_idx; k < n; ++k) m.max_glitch_post = std::max(m.max_glitch_post, std::abs(result.difference[k]));
  return m;
}

void write_sync_csv(std::ostream& out, const SyncResult& r) {
  out << "t,v_y_master,v_y_slave,difference\n";
  for (std::size_t k = 0; k < r.master_v_y.size(); ++k) {
    out << format_number(r.time_at(k)) << ',' << format_number(r.master_v_y[k]) << ','
        << format_number(r.slave_v_y[k]) << ',' << format_number(r.difference[k]) << '\n';
  }
}

SyncResult read_sync_csv(std::istream& in, double t_sync) {
  std::string line;
  if (!std::getline(in, line) || line != "t,v_y_master,v_y_slave,difference") {
    throw IoError("unexpected sync CSV header");
  }
  SyncResult r;
  r.t_sync = t_sync;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 4> f{};
    std::size_t start = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto comma = line.find(',', start);
      if ((comma == std::string::npos) != (i == 3)) throw IoError("malformed sync CSV row");
      f[i] = parse_number(std::string_view(line).substr(start, comma - start));
      start = comma + 1;
    }
    times.push_back(f[0]);
    r.master_v_y.push_back(f[1]);
    r.slave_v_y.push_back(f[2]);
    r.difference.push_back(f[3]);
  }
  if (times.size() < 2) throw IoError("sync CSV needs at least two rows");
  r.dt_record = times[1] - times[0];
  r.t_end = times.back();
  return r;
}

double Waveform::at(double t) const {
  if (values.empty()) throw DomainError("empty waveform");
  if (values.size() == 1) return values[0];
  const double x = std::clamp(t / dt, 0.0, static_cast<double>(values.size() - 1));
  // Times on the sample grid return the stored sample exactly.
  const double nearest = std::round(x);
  if (std::abs(x - nearest) < 1e-9) return values[static_cast<std::size_t>(nearest)];
  const auto i = std::min(static_cast<std::size_t>(x), values.size() - 2);
  const double u = x - static_cast<double>(i);
  const double p1 = values[i];
  const double p2 = values[i + 1];
  const double p0 = i == 0 ? 2.0 * p1 - p2 : values[i - 1];
  const double p3 = i + 2 < values.size() ? values[i + 2] : 2.0 * p2 - p1;
  return p1 + 0.5 * u * (p2 - p0 + u * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + u * (3.0 * (p1 - p2) + p3 - p0)));
}

Waveform tone(double freq, double amplitude, double duration, double dt) {
  if (!(dt > 0.0) || !(duration >= 0.0)) throw DomainError("tone needs dt > 0 and duration >= 0");
  Waveform w{dt, {}};
  const auto n = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
  w.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    w.values[k] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(k) * dt);
  }
  return w;
}

Waveform resample(std::span<const double> times, std::span<const double> values, double dt, double duration) {
  if (times.size() != values.size() || times.empty()) throw DomainError("message needs matching t and value columns");
  if (!std::ranges::is_sorted(times)) throw DomainError("message times must be non-decreasing");
  Waveform w{dt, {}};
  const auto n = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
  w.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t <= times.front()) {
      w.values[k] = values.front();
    } else if (t >= times.back()) {
      w.values[k] = values.back();
    } else {
      const auto hi = static_cast<std::size_t>(std::ranges::upper_bound(times, t) - times.begin());
      const std::size_t lo = hi - 1;
      const double span = times[hi] - times[lo];
      const double u = span > 0.0 ? (t - times[lo]) / span : 0.0;
      w.values[k] = values[lo] + u * (values[hi] - values[lo]);
    }
  }
  return w;
}

double rms(std::span<const double> x) { return x.empty() ? 0.0 : rms_range(x, 0, x.size()); }

double correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw DomainError("correlation needs equal lengths >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

Transmission mask_transmit(const Waveform& message, const SyncConfig& cfg, double mask_ratio, double r_inject) {
  cfg.validate();
  check_injection(r_inject);
  if (!(mask_ratio > 0.0)) throw DomainError("mask ratio must be > 0");
  const double dt = cfg.dt;
  const auto steps = static_cast<long long>(std::llround(cfg.t_end / dt));
  const auto& p = cfg.master;
  const DriveVariable dv = cfg.drive;
  auto msg = [&](double t) { return message.values.empty() ? 0.0 : message.at(t); };

  Transmission out;
  out.drive.dt = dt * cfg.record_every;
  out.channel.dt = out.drive.dt;
  State s = cfg.master_init;
  double peak = 0.0;
  for (long long k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k % cfg.record_every == 0) {
      const double m = msg(t);
      out.drive.values.push_back(drive_of(s, dv));
      out.channel.values.push_back(drive_of(s, dv) + m);
      peak = std::max(peak, std::abs(m));
    }
    if (k == steps) break;
    // The transmitter's own driven pair sees the channel, exactly as the
    // receiver's will.
    const double m0 = msg(t);
    const double mh = msg(t + 0.5 * dt);
    const double m1 = msg(t + dt);
    auto field = [&](const State& x, double m) { return receiver_field(x, p, dv, drive_of(x, dv) + m, r_inject); };
    const State k1 = field(s, m0);
    const State k2 = field(s + (0.5 * dt) * k1, mh);
    const State k3 = field(s + (0.5 * dt) * k2, mh);
    const State k4 = field(s + dt * k3, m1);
    s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_bounded(s, t + dt);
  }
  const double limit = mask_ratio * rms(out.drive.values);
  if (peak > limit) {
    out.over_amplitude = true;
    out.warning = "message peak " + format_number(peak) + " V exceeds " + format_number(mask_ratio) +
                  " x drive RMS (" + format_number(limit) + " V); recovery will degrade";
  }
  return out;
}

Waveform recover_message(const Waveform& channel, const SyncConfig& cfg, double r_inject) {
  cfg.validate();
  check_injection(r_inject);
  if (channel.values.size() < 2 || !(channel.dt > 0.0)) throw DomainError("channel waveform too short");
  const double dt = cfg.dt;
  const double t_end = channel.duration();
  const auto steps = static_cast<long long>(std::llround(t_end / dt));
  const auto& p = cfg.slave;
  const DriveVariable dv = cfg.drive;

  Waveform out{channel.dt, std::vector<double>(channel.values.size(), 0.0)};
  State s = cfg.slave_init;
  std::size_t next_out = 0;
  auto record = [&](double t) {
    while (next_out < out.values.size() && out.time_at(next_out) <= t + 0.5 * dt) {
      out.values[next_out] = channel.values[next_out] - drive_of(s, dv);
      ++next_out;
    }
  };
  for (long long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    record(t);
    if (t < cfg.t_sync - 1e-12 * dt) {
      s = rk4_free(s, dt, p);
    } else {
      const double c0 = channel.at(t);
      const double ch = channel.at(t + 0.5 * dt);
      const double c1 = channel.at(t + dt);
      const State k1 = receiver_field(s, p, dv, c0, r_inject);
      const State k2 = receiver_field(s + (0.5 * dt) * k1, p, dv, ch, r_inject);
      const State k3 = receiver_field(s + (0.5 * dt) * k2, p, dv, ch, r_inject);
      const State k4 = receiver_field(s + dt * k3, p, dv, c1, r_inject);
      s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    check_bounded(s, t + dt);
  }
  record(static_cast<double>(steps) * dt);
  return out;
}

void write_message_csv(std::ostream& out, const Waveform& original, const Waveform& recovered) {
  out << "t,original,recovered\n";
  for (std::size_t k = 0; k < recovered.values.size(); ++k) {
    const double t = recovered.time_at(k);
    out << format_number(t) << ',' << format_number(original.values.empty() ? 0.0 : original.at(t)) << ','
        << format_number(recovered.values[k]) << '\n';
  }
}

void read_message_csv(std::istream& in, std::vector<double>& times, std::vector<double>& values) {
  times.clear();
  values.clear();
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("message CSV rows need 't,value'");
    try {
      const double t = parse_number(std::string_view(line).substr(0, comma));
      const double v = parse_number(std::string_view(line).substr(comma + 1));
      times.push_back(t);
      values.push_back(v);
    } catch (const DomainError&) {
      if (!first) throw IoError("malformed message CSV row: " + line);
    }
    first = false;
  }
  if (times.empty()) throw IoError("message CSV has no samples");
}

}  // namespace chua
