#pragma once

// Component model of the op-amp realization of Chua's circuit: the saturating
// negative-resistance cell, the five-segment diode built from two cells, and
// the state equations of the third-order circuit.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace chua {

/// Typical op-amp saturation level on +/-9 V rails.
inline constexpr double kDefaultSaturation = 8.3;

/// One negative-impedance-converter cell. Resistances in ohms, e_sat in volts.
struct CellParams {
  double r_in{};
  double r_fb{};
  double r_gnd{};
  double e_sat{kDefaultSaturation};

  /// Input voltage at which the op-amp output reaches e_sat.
  [[nodiscard]] double knee() const { return r_gnd / (r_fb + r_gnd) * e_sat; }

  /// Incremental conductance inside the linear region (negative).
  [[nodiscard]] double linear_slope() const { return -r_fb / (r_in * r_gnd); }

  /// Incremental conductance once the output is saturated.
  [[nodiscard]] double saturated_slope() const { return 1.0 / r_in; }

  void validate() const;
};

/// Odd-symmetric continuous piecewise-linear I-V curve.
///
/// `slopes[k]` is the conductance on the k-th region counted outward from the
/// origin; region 0 is |v| <= breakpoints[0], region k is
/// breakpoints[k-1] < |v| <= breakpoints[k], and the last region is unbounded.
class DiodeModel {
 public:
  DiodeModel(std::vector<double> breakpoints, std::vector<double> slopes);

  [[nodiscard]] std::span<const double> breakpoints() const { return breakpoints_; }
  [[nodiscard]] std::span<const double> slopes() const { return slopes_; }
  [[nodiscard]] std::size_t region_count() const { return slopes_.size(); }

  /// Index of the region containing |v|.
  [[nodiscard]] std::size_t region_of(double v) const;

  /// Current into the diode at voltage v. Throws DomainError for non-finite v.
  [[nodiscard]] double current(double v) const;

  /// Current at v >= 0 evaluated on region `region` extended as a line.
  /// The value at region boundaries is where continuity is enforced.
  [[nodiscard]] double current_on_region(double v, std::size_t region) const;

  /// g at the inner edge of `region` (0 for region 0).
  [[nodiscard]] double offset_of(std::size_t region) const { return offsets_[region]; }

  friend bool operator==(const DiodeModel&, const DiodeModel&) = default;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> slopes_;
  std::vector<double> offsets_;  // g(breakpoints[k-1]) for region k
};

/// Component values of one circuit. SI units.
struct CircuitParams {
  double l{};
  double c1{};
  double c2{};
  double r0{};
  DiodeModel diode;

  void validate() const;

  friend bool operator==(const CircuitParams&, const CircuitParams&) = default;
};

/// (V_C1, V_C2, I_L). Also used for time derivatives of the same quantities.
struct State {
  double v_c1{};
  double v_c2{};
  double i_l{};

  [[nodiscard]] bool finite() const {
    return std::isfinite(v_c1) && std::isfinite(v_c2) && std::isfinite(i_l);
  }

  State& operator+=(const State& o) {
    v_c1 += o.v_c1;
    v_c2 += o.v_c2;
    i_l += o.i_l;
    return *this;
  }
  State& operator-=(const State& o) {
    v_c1 -= o.v_c1;
    v_c2 -= o.v_c2;
    i_l -= o.i_l;
    return *this;
  }
  State& operator*=(double k) {
    v_c1 *= k;
    v_c2 *= k;
    i_l *= k;
    return *this;
  }

  friend State operator+(State a, const State& b) { return a += b; }
  friend State operator-(State a, const State& b) { return a -= b; }
  friend State operator*(State a, double k) { return a *= k; }
  friend State operator*(double k, State a) { return a *= k; }
  friend State operator-(const State& a) { return {-a.v_c1, -a.v_c2, -a.i_l}; }
  friend bool operator==(const State&, const State&) = default;
};

/// Current drawn by a single op-amp cell at input voltage v.
[[nodiscard]] double cell_current(double v, const CellParams& cell);

/// Parallel combination of two cells as a canonical five-segment diode.
/// Throws DegenerateModelError when both knees coincide.
[[nodiscard]] DiodeModel build_diode(const CellParams& cell_a, const CellParams& cell_b);

[[nodiscard]] double diode_current(double v, const DiodeModel& d);

/// Right-hand side (dV_C1/dt, dV_C2/dt, dI_L/dt).
[[nodiscard]] State vector_field(const State& s, const CircuitParams& p);

/// Same as vector_field with the coupling resistor overridden.
[[nodiscard]] State vector_field(const State& s, const CircuitParams& p, double r0);

namespace nominal {

inline constexpr double kInductance = 18e-3;
inline constexpr double kC1 = 10e-9;
inline constexpr double kC2 = 100e-9;

[[nodiscard]] CellParams cell_a(double e_sat = kDefaultSaturation);  // R1, R2, R3
[[nodiscard]] CellParams cell_b(double e_sat = kDefaultSaturation);  // R4, R5, R6

/// Reference circuit with the given coupling resistor.
[[nodiscard]] CircuitParams circuit(double r0, double e_sat = kDefaultSaturation);

}  // namespace nominal

}  // namespace chua
