#include "chua/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <thread>

#include "chua/error.hpp"
#include "chua/format.hpp"

namespace chua {

namespace {

using cplx = std::complex<double>;

double scaled_norm(const State& s, double impedance) {
  const double i = impedance * s.i_l;
  return std::sqrt(s.v_c1 * s.v_c1 + s.v_c2 * s.v_c2 + i * i);
}

cplx cubic_at(double a, double b, double c, cplx x) { return ((x + a) * x + b) * x + c; }

double polish_real_root(double a, double b, double c, double x) {
  for (int it = 0; it < 8; ++it) {
    const double f = ((x + a) * x + b) * x + c;
    const double df = (3.0 * x + 2.0 * a) * x + b;
    if (df == 0.0) break;
    const double next = x - f / df;
    if (!std::isfinite(next) || std::abs(((next + a) * next + b) * next + c) >= std::abs(f)) break;
    x = next;
  }
  return x;
}

cplx polish_root(double a, double b, double c, cplx x) {
  for (int it = 0; it < 8; ++it) {
    const cplx f = cubic_at(a, b, c, x);
    const cplx df = (3.0 * x + 2.0 * a) * x + b;
    if (std::abs(df) == 0.0) break;
    const cplx next = x - f / df;
    if (std::abs(cubic_at(a, b, c, next)) >= std::abs(f)) break;
    x = next;
  }
  return x;
}

/// Roots of x^2 + b x + c, cancellation-free.
std::array<cplx, 2> quadratic_roots(double b, double c) {
  const double disc = b * b - 4.0 * c;
  if (disc >= 0.0) {
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    if (q == 0.0) return {cplx{0.0}, cplx{0.0}};
    return {cplx{q}, cplx{c / q}};
  }
  const double re = -0.5 * b;
  const double im = 0.5 * std::sqrt(-disc);
  return {cplx{re, im}, cplx{re, -im}};
}

constexpr double kRankSpiral = 4.0;

}  // namespace

const char* to_string(Region r) {
  switch (r) {
    case Region::inner: return "inner";
    case Region::middle: return "middle";
    case Region::outer: return "outer";
  }
  return "?";
}

double Matrix3::determinant() const {
  const auto& a = *this;
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

double Matrix3::frobenius_norm() const {
  double acc = 0.0;
  for (double x : m_) acc += x * x;
  return std::sqrt(acc);
}

std::vector<Equilibrium> equilibria(const CircuitParams& p) {
  p.validate();
  const auto& d = p.diode;
  const auto bps = d.breakpoints();
  std::vector<Equilibrium> out{{State{}, Region::inner}};
  // v_c2 = 0, i_l = -v/r0, g(v) = -v/r0; solve per segment on v > 0.
  for (std::size_t k = 1; k < d.region_count(); ++k) {
    const double edge = bps[k - 1];
    const double slope = d.slopes()[k];
    const double denom = slope + 1.0 / p.r0;
    if (denom == 0.0) continue;
    const double v = (slope * edge - d.offset_of(k)) / denom;
    const bool inside = v > edge && (k == bps.size() || v <= bps[k]);
    if (!inside) continue;
    const auto region = static_cast<Region>(k);
    out.push_back({State{v, 0.0, -v / p.r0}, region});
    out.push_back({State{-v, 0.0, v / p.r0}, region});
  }
  return out;
}

Matrix3 jacobian(const CircuitParams& p, Region region) {
  p.validate();
  const auto k = static_cast<std::size_t>(region);
  if (k >= p.diode.region_count()) {
    throw DomainError(std::string("diode has no ") + to_string(region) + " region");
  }
  const double slope = p.diode.slopes()[k];
  const double gc = 1.0 / p.r0;
  return Matrix3({(-gc - slope) / p.c1, gc / p.c1, 0.0,
                  gc / p.c2, -gc / p.c2, 1.0 / p.c2,
                  0.0, -1.0 / p.l, 0.0});
}

Eigenvalues eigenvalues3(const Matrix3& m) {
  // det(lambda I - m) = lambda^3 + a lambda^2 + b lambda + c
  const double a = -m.trace();
  const double b = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0) +
                   m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  const double c = -m.determinant();

  // Depressed cubic t^3 + pt + q with lambda = t - a/3.
  const double shift = a / 3.0;
  const double pp = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double half_q = 0.5 * q;
  const double third_p = pp / 3.0;
  const double disc = half_q * half_q + third_p * third_p * third_p;

  Eigenvalues out;
  if (disc <= 0.0 && pp < 0.0) {
    // Three real roots: trigonometric form.
    const double r = std::sqrt(-third_p);
    const double arg = std::clamp(-half_q / (r * r * r), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    std::array<double, 3> roots{};
    for (int k = 0; k < 3; ++k) {
      const double t = 2.0 * r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0);
      roots[static_cast<std::size_t>(k)] = polish_real_root(a, b, c, t - shift);
    }
    std::ranges::sort(roots);
    for (std::size_t k = 0; k < 3; ++k) out[k] = roots[k];
    return out;
  }

  // One real root (or a triple root when pp == 0 and q == 0).
  double t = 0.0;
  if (pp == 0.0) {
    t = std::cbrt(-q);
  } else {
    const double u = std::cbrt(-half_q - std::copysign(std::sqrt(std::max(disc, 0.0)), half_q));
    t = u == 0.0 ? 0.0 : u - third_p / u;
  }
  const double real = polish_real_root(a, b, c, t - shift);
  // Deflate: (lambda - real)(lambda^2 + (a + real) lambda + (b + real (a + real))).
  const double qb = a + real;
  const double qc = b + real * qb;
  auto pair = quadratic_roots(qb, qc);
  pair[0] = polish_root(a, b, c, pair[0]);
  pair[1] = polish_root(a, b, c, pair[1]);
  if (pair[0].imag() != 0.0 || pair[1].imag() != 0.0) {
    // Keep exact conjugacy after polishing.
    const cplx z{pair[0].real(), std::abs(pair[0].imag())};
    out = {cplx{real}, z, std::conj(z)};
    return out;
  }
  std::array<double, 3> roots{real, pair[0].real(), pair[1].real()};
  std::ranges::sort(roots);
  for (std::size_t k = 0; k < 3; ++k) out[k] = roots[k];
  return out;
}

EigenReport eigen_report(const CircuitParams& p, Region region) {
  EigenReport report{eigenvalues3(jacobian(p, region)), true, region};
  for (const auto& z : report.eigenvalues) report.stable = report.stable && z.real() < 0.0;
  return report;
}

namespace {

struct WindowStats {
  double lambda1{};
  std::vector<double> maxima;
  double min_v{std::numeric_limits<double>::infinity()};
  double max_v{-std::numeric_limits<double>::infinity()};
  int visits_positive{};
  int visits_negative{};
  double terminal_field{};
};

void validate_lyapunov(const LyapunovConfig& cfg) {
  if (!(cfg.d0 > 0.0 && cfg.tau > 0.0 && cfg.total > 0.0 && cfg.transient >= 0.0 && cfg.dt > 0.0)) {
    throw DomainError("Lyapunov configuration needs d0, tau, total, dt > 0 and transient >= 0");
  }
  if (cfg.tau < cfg.dt || cfg.total < cfg.tau) throw DomainError("need dt <= tau <= total");
}

void step_checked(State& s, double t, double dt, const CircuitParams& p) {
  s = step_rk4(s, t, dt, p);
  if (std::abs(s.v_c1) > kDivergenceLimit || std::abs(s.v_c2) > kDivergenceLimit ||
      std::abs(s.i_l) > kDivergenceLimit) {
    throw DivergenceError(t + dt, "state exceeded divergence limit");
  }
}

/// One pass: transient, then fiducial + perturbed orbit with renormalization,
/// collecting the maxima and scroll visits of the fiducial orbit.
WindowStats run_window(const CircuitParams& p, const State& init, const LyapunovConfig& cfg,
                       double visit_radius) {
  p.validate();
  validate_lyapunov(cfg);
  if (!init.finite()) throw DomainError("initial state is not finite");

  const double impedance = std::sqrt(p.l / p.c2);
  const double dt = cfg.dt;
  const auto transient_steps = static_cast<long long>(std::llround(cfg.transient / dt));
  const auto renorm_steps = std::max<long long>(1, std::llround(cfg.tau / dt));
  const auto intervals = std::max<long long>(1, std::llround(cfg.total / cfg.tau));

  State a = init;
  double t = 0.0;
  for (long long k = 0; k < transient_steps; ++k, t += dt) step_checked(a, t, dt, p);

  // Outer equilibria closest to the origin anchor the scroll-visit balls.
  std::optional<State> anchor;
  for (const auto& e : equilibria(p)) {
    if (e.state.v_c1 > 0.0 && (!anchor || e.state.v_c1 < anchor->v_c1)) anchor = e.state;
  }
  const double first_bp = p.diode.breakpoints().empty() ? 1.0 : p.diode.breakpoints()[0];

  WindowStats w;
  State b = a;
  b.v_c1 += cfg.d0;
  double log_sum = 0.0;
  double prev = a.v_c1;
  double prev2 = a.v_c1;
  bool in_pos = false;
  bool in_neg = false;
  for (long long n = 0; n < intervals; ++n) {
    for (long long k = 0; k < renorm_steps; ++k, t += dt) {
      step_checked(a, t, dt, p);
      step_checked(b, t, dt, p);
      if (prev > prev2 && prev >= a.v_c1) w.maxima.push_back(prev);
      prev2 = prev;
      prev = a.v_c1;
      w.min_v = std::min(w.min_v, a.v_c1);
      w.max_v = std::max(w.max_v, a.v_c1);
      bool pos = false;
      bool neg = false;
      if (anchor) {
        pos = scaled_norm(a - *anchor, impedance) < visit_radius;
        neg = scaled_norm(a + *anchor, impedance) < visit_radius;
      } else {
        pos = a.v_c1 > first_bp;
        neg = a.v_c1 < -first_bp;
      }
      w.visits_positive += pos && !in_pos;
      w.visits_negative += neg && !in_neg;
      in_pos = pos;
      in_neg = neg;
    }
    double d = scaled_norm(b - a, impedance);
    if (d == 0.0) d = std::numeric_limits<double>::min();
    log_sum += std::log(d / cfg.d0);
    b = a + (b - a) * (cfg.d0 / d);
  }
  w.lambda1 = log_sum / (static_cast<double>(intervals * renorm_steps) * dt);
  const State f = vector_field(a, p);
  w.terminal_field = scaled_norm(f, impedance);
  return w;
}

std::size_t count_clusters(std::vector<double> values, double tol) {
  if (values.empty()) return 0;
  std::ranges::sort(values);
  std::size_t clusters = 1;
  for (std::size_t i = 1; i < values.size(); ++i) clusters += (values[i] - values[i - 1]) > tol;
  return clusters;
}

std::vector<double> cluster_centers(std::vector<double> values, double tol) {
  std::vector<double> centers;
  if (values.empty()) return centers;
  std::ranges::sort(values);
  double sum = values[0];
  std::size_t count = 1;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] - values[i - 1] > tol) {
      centers.push_back(sum / static_cast<double>(count));
      sum = 0.0;
      count = 0;
    }
    sum += values[i];
    ++count;
  }
  centers.push_back(sum / static_cast<double>(count));
  return centers;
}

/// Smallest n with |m[i] - m[i+n]| <= tol everywhere, or 0.
int minimal_period(std::span<const double> maxima, double tol, int max_period) {
  for (int n = 1; n <= max_period; ++n) {
    const auto step = static_cast<std::size_t>(n);
    if (maxima.size() < 3 * step) break;
    bool ok = true;
    for (std::size_t i = 0; i + step < maxima.size() && ok; ++i) {
      ok = std::abs(maxima[i] - maxima[i + step]) <= tol;
    }
    if (ok) return n;
  }
  return 0;
}

}  // namespace

double largest_lyapunov(const CircuitParams& p, const State& init, const LyapunovConfig& cfg) {
  return run_window(p, init, cfg, 0.0).lambda1;
}

std::string RegimeClass::name() const {
  switch (tag) {
    case RegimeTag::equilibrium: return "Equilibrium";
    case RegimeTag::period_n: return "PeriodN(" + std::to_string(period) + ")";
    case RegimeTag::spiral_chaos: return "SpiralChaos";
    case RegimeTag::double_scroll: return "DoubleScroll";
    case RegimeTag::saturated_cycle: return "SaturatedCycle";
  }
  return "?";
}

RegimeAnalysis analyze_regime(const CircuitParams& p, const State& init, const ClassifierConfig& cfg) {
  if (cfg.max_period < 1 || !(cfg.cluster_tolerance > 0.0) || cfg.min_visits < 1) {
    throw DomainError("invalid classifier configuration");
  }
  const auto bps = p.diode.breakpoints();
  const double first_bp = bps.empty() ? 1.0 : bps.front();
  const double outer_bp = bps.empty() ? std::numeric_limits<double>::infinity() : bps.back();
  auto w = run_window(p, init, cfg.lyapunov, cfg.visit_radius * first_bp);

  const double p2p = w.max_v - w.min_v;
  const double tol = cfg.cluster_tolerance * std::max(p2p, 1e-12);
  RegimeAnalysis out;
  auto& r = out.regime;
  r.evidence = {w.lambda1, count_clusters(w.maxima, tol), w.visits_positive, w.visits_negative,
                w.min_v, w.max_v};
  out.maxima = std::move(w.maxima);

  // A bounded orbit of an autonomous flow that is not a fixed point has a
  // zero exponent along the flow, so strict contraction also means rest.
  if (w.terminal_field < cfg.equilibrium_tolerance || w.lambda1 < -cfg.lambda_periodic_max) {
    r.tag = RegimeTag::equilibrium;
    return out;
  }

  const int n = minimal_period(out.maxima, tol, cfg.max_period);
  if (n > 0) {
    if (w.lambda1 > cfg.lambda_periodic_max) {
      throw InconclusiveError("maxima repeat with period " + std::to_string(n) + " but lambda1 = " +
                              format_number(w.lambda1) + " 1/s; use a longer window");
    }
    if (w.max_v > outer_bp && w.min_v < -outer_bp) {
      r.tag = RegimeTag::saturated_cycle;
    } else {
      r.tag = RegimeTag::period_n;
    }
    r.period = n;
    return out;
  }
  if (w.lambda1 < cfg.lambda_chaos_min) {
    throw InconclusiveError("no period <= " + std::to_string(cfg.max_period) + " found but lambda1 = " +
                            format_number(w.lambda1) + " 1/s; use a longer window");
  }
  const bool both = w.visits_positive >= cfg.min_visits && w.visits_negative >= cfg.min_visits;
  r.tag = both ? RegimeTag::double_scroll : RegimeTag::spiral_chaos;
  return out;
}

RegimeClass classify_regime(const CircuitParams& p, const State& init, const ClassifierConfig& cfg) {
  return analyze_regime(p, init, cfg).regime;
}

std::vector<SweepPoint> sweep_bifurcation(const CircuitParams& p, std::span<const double> r0_values,
                                          const ClassifierConfig& cfg, const State& init,
                                          unsigned parallelism) {
  if (r0_values.empty()) throw DomainError("sweep needs at least one r0 value");
  for (double r0 : r0_values) {
    if (!(std::isfinite(r0) && r0 > 0.0)) throw DomainError("sweep r0 values must be > 0");
  }
  std::vector<SweepPoint> out(r0_values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < r0_values.size(); i = next++) {
      auto& pt = out[i];
      pt.r0 = r0_values[i];
      CircuitParams local = p;
      local.r0 = pt.r0;
      try {
        auto analysis = analyze_regime(local, init, cfg);
        pt.regime = analysis.regime;
        pt.maxima = std::move(analysis.maxima);
      } catch (const Error& e) {
        pt.error = e.what();
      }
    }
  };
  unsigned threads = parallelism == 0 ? std::max(1u, std::thread::hardware_concurrency()) : parallelism;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, r0_values.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return out;
}

std::optional<double> route_rank(const RegimeClass& r) {
  switch (r.tag) {
    case RegimeTag::equilibrium: return 0.0;
    case RegimeTag::period_n: {
      if (r.period < 1 || (r.period & (r.period - 1)) != 0) return std::nullopt;
      const double octave = std::log2(static_cast<double>(r.period));
      // P1 = 1, P2 = 2, P4 = 3; longer doublings squeeze in below chaos.
      if (octave <= 2.0) return 1.0 + octave;
      return std::min(3.0 + 0.25 * (octave - 2.0), kRankSpiral - 0.01);
    }
    case RegimeTag::spiral_chaos: return kRankSpiral;
    case RegimeTag::double_scroll: return kRankSpiral + 1.0;
    case RegimeTag::saturated_cycle: return kRankSpiral + 2.0;
  }
  return std::nullopt;
}

std::vector<SweepPoint> refine_sweep(const CircuitParams& p, std::vector<SweepPoint> points,
                                     double min_spacing, const ClassifierConfig& cfg, const State& init,
                                     unsigned parallelism) {
  if (points.size() < 2) return points;
  if (!(min_spacing > 0.0)) throw DomainError("refinement spacing must be > 0");
  const bool descending = points.front().r0 > points.back().r0;
  auto order = [descending](const SweepPoint& x, const SweepPoint& y) {
    return descending ? x.r0 > y.r0 : x.r0 < y.r0;
  };
  std::ranges::sort(points, order);
  for (;;) {
    std::vector<double> extra;
    const SweepPoint* last = nullptr;
    for (const auto& pt : points) {
      if (!pt.regime) continue;
      const auto rank = route_rank(*pt.regime);
      if (!rank) continue;
      if (last != nullptr) {
        const double gap = std::floor(*rank) - std::floor(*route_rank(*last->regime));
        if (gap > 1.0 && std::abs(pt.r0 - last->r0) > 2.0 * min_spacing) {
          extra.push_back(0.5 * (pt.r0 + last->r0));
        }
      }
      last = &pt;
    }
    if (extra.empty()) return points;
    auto added = sweep_bifurcation(p, extra, cfg, init, parallelism);
    points.insert(points.end(), std::make_move_iterator(added.begin()), std::make_move_iterator(added.end()));
    std::ranges::sort(points, order);
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
  out << "r0,regime,n,lambda1,maxima...\n";
  for (const auto& pt : points) {
    out << format_number(pt.r0) << ',';
    if (!pt.regime) {
      std::string msg = pt.error;
      std::ranges::replace(msg, ',', ';');
      std::ranges::replace(msg, '\n', ' ');
      out << "Error,,," << msg << '\n';
      continue;
    }
    const auto& r = *pt.regime;
    const auto tag = r.name();
    out << tag.substr(0, tag.find('(')) << ',';
    if (r.tag == RegimeTag::period_n || r.tag == RegimeTag::saturated_cycle) out << r.period;
    out << ',' << format_number(r.evidence.lambda1);
    const double tol = 0.01 * std::max(r.evidence.max_v_c1 - r.evidence.min_v_c1, 1e-12);
    for (double m : cluster_centers(pt.maxima, tol)) out << ',' << format_number(m);
    out << '\n';
  }
}

void write_bifurcation_csv(std::ostream& out, std::span<const SweepPoint> points) {
  out << "r0,maximum_v_c1\n";
  for (const auto& pt : points) {
    for (double m : pt.maxima) out << format_number(pt.r0) << ',' << format_number(m) << '\n';
  }
}

}  // namespace chua
