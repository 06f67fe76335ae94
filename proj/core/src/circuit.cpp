#include "chua/circuit.hpp"

#include <algorithm>
#include <string>

#include "chua/error.hpp"

namespace chua {

namespace {

void require_positive(double value, const char* name) {
  if (!(std::isfinite(value) && value > 0.0)) {
    throw DomainError(std::string(name) + " must be finite and > 0, got " + std::to_string(value));
  }
}

}  // namespace

void CellParams::validate() const {
  require_positive(r_in, "r_in");
  require_positive(r_fb, "r_fb");
  require_positive(r_gnd, "r_gnd");
  require_positive(e_sat, "e_sat");
}

DiodeModel::DiodeModel(std::vector<double> breakpoints, std::vector<double> slopes)
    : breakpoints_(std::move(breakpoints)), slopes_(std::move(slopes)) {
  if (slopes_.size() != breakpoints_.size() + 1) {
    throw DomainError("diode needs exactly one more slope than breakpoints");
  }
  double previous = 0.0;
  for (double b : breakpoints_) {
    if (!std::isfinite(b) || b <= previous) {
      throw DomainError("diode breakpoints must be positive and strictly ascending");
    }
    previous = b;
  }
  for (double s : slopes_) {
    if (!std::isfinite(s)) throw DomainError("diode slopes must be finite");
  }
  offsets_.assign(slopes_.size(), 0.0);
  double edge = 0.0;
  for (std::size_t k = 1; k < slopes_.size(); ++k) {
    offsets_[k] = offsets_[k - 1] + slopes_[k - 1] * (breakpoints_[k - 1] - edge);
    edge = breakpoints_[k - 1];
  }
}

std::size_t DiodeModel::region_of(double v) const {
  const double a = std::abs(v);
  // First breakpoint >= |v|; the boundary value belongs to the inner region.
  auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), a);
  return static_cast<std::size_t>(it - breakpoints_.begin());
}

double DiodeModel::current_on_region(double v, std::size_t region) const {
  const double edge = region == 0 ? 0.0 : breakpoints_[region - 1];
  return offsets_[region] + slopes_[region] * (v - edge);
}

double DiodeModel::current(double v) const {
  if (!std::isfinite(v)) throw DomainError("diode voltage is not finite");
  const double magnitude = current_on_region(std::abs(v), region_of(v));
  return v < 0.0 ? -magnitude : magnitude;
}

void CircuitParams::validate() const {
  require_positive(l, "l");
  require_positive(c1, "c1");
  require_positive(c2, "c2");
  require_positive(r0, "r0");
}

double cell_current(double v, const CellParams& cell) {
  if (!std::isfinite(v)) throw DomainError("cell voltage is not finite");
  const double knee = cell.knee();
  const double a = std::abs(v);
  double magnitude = 0.0;
  if (a <= knee) {
    magnitude = cell.linear_slope() * a;
  } else {
    // Output pinned at e_sat: I = (V - E_sat) / R_in.
    magnitude = (a - cell.e_sat) / cell.r_in;
  }
  return v < 0.0 ? -magnitude : magnitude;
}

DiodeModel build_diode(const CellParams& cell_a, const CellParams& cell_b) {
  cell_a.validate();
  cell_b.validate();
  const double knee_a = cell_a.knee();
  const double knee_b = cell_b.knee();
  if (knee_a == knee_b) {
    throw DegenerateModelError("op-amp cells share the knee " + std::to_string(knee_a) + " V");
  }
  const CellParams& inner = knee_a < knee_b ? cell_a : cell_b;
  const CellParams& outer = knee_a < knee_b ? cell_b : cell_a;
  return DiodeModel({inner.knee(), outer.knee()},
                    {inner.linear_slope() + outer.linear_slope(),
                     inner.saturated_slope() + outer.linear_slope(),
                     inner.saturated_slope() + outer.saturated_slope()});
}

double diode_current(double v, const DiodeModel& d) { return d.current(v); }

State vector_field(const State& s, const CircuitParams& p, double r0) {
  const double coupling = (s.v_c2 - s.v_c1) / r0;
  return {(coupling - p.diode.current(s.v_c1)) / p.c1,
          (s.i_l - coupling) / p.c2,
          -s.v_c2 / p.l};
}

State vector_field(const State& s, const CircuitParams& p) { return vector_field(s, p, p.r0); }

namespace nominal {

CellParams cell_a(double e_sat) { return {220.0, 220.0, 2200.0, e_sat}; }

CellParams cell_b(double e_sat) { return {22e3, 22e3, 3300.0, e_sat}; }

CircuitParams circuit(double r0, double e_sat) {
  return {kInductance, kC1, kC2, r0, build_diode(cell_a(e_sat), cell_b(e_sat))};
}

}  // namespace nominal

}  // namespace chua
