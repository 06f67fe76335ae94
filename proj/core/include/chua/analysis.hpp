#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chua/circuit.hpp"
#include "chua/integrator.hpp"

namespace chua {

/// Segments of the five-segment diode, counted outward from the origin.
enum class Region : std::size_t { inner = 0, middle = 1, outer = 2 };

[[nodiscard]] const char* to_string(Region r);

/// Dense 3x3 matrix, row-major.
class Matrix3 {
 public:
  Matrix3() = default;
  explicit Matrix3(const std::array<double, 9>& entries) : m_(entries) {}

  double& operator()(std::size_t r, std::size_t c) { return m_[3 * r + c]; }
  double operator()(std::size_t r, std::size_t c) const { return m_[3 * r + c]; }

  [[nodiscard]] double trace() const { return m_[0] + m_[4] + m_[8]; }
  [[nodiscard]] double determinant() const;
  [[nodiscard]] double frobenius_norm() const;

 private:
  std::array<double, 9> m_{};
};

using Eigenvalues = std::array<std::complex<double>, 3>;

struct EigenReport {
  Eigenvalues eigenvalues;
  bool stable{};  // every real part < 0
  Region region{};
};

struct Equilibrium {
  State state;
  Region region{};
};

/// Every zero of the vector field, origin first, then +/- pairs by region.
[[nodiscard]] std::vector<Equilibrium> equilibria(const CircuitParams& p);

/// Linearization of the state equations on one diode segment.
/// Throws DomainError if the diode has no such segment.
[[nodiscard]] Matrix3 jacobian(const CircuitParams& p, Region region);

/// Roots of the characteristic cubic, real roots first in ascending order,
/// then any complex pair (positive imaginary part first).
[[nodiscard]] Eigenvalues eigenvalues3(const Matrix3& m);

[[nodiscard]] EigenReport eigen_report(const CircuitParams& p, Region region);

/// Benettin two-trajectory estimate of the largest Lyapunov exponent.
struct LyapunovConfig {
  double d0{1e-8};          // initial separation, V
  double tau{1e-4};         // renormalization interval, s
  double total{0.4};        // averaging time after the transient, s
  double transient{0.1};    // discarded lead-in, s
  double dt{kDefaultStep};
};

/// Separations are measured in volts; the inductor current is converted with
/// the characteristic impedance sqrt(l / c2).
[[nodiscard]] double largest_lyapunov(const CircuitParams& p, const State& init,
                                      const LyapunovConfig& cfg = {});

enum class RegimeTag { equilibrium, period_n, spiral_chaos, double_scroll, saturated_cycle };

struct RegimeEvidence {
  double lambda1{};
  std::size_t distinct_maxima{};
  int visits_positive{};
  int visits_negative{};
  double min_v_c1{};
  double max_v_c1{};
};

struct RegimeClass {
  RegimeTag tag{RegimeTag::equilibrium};
  int period{};  // only for period_n
  RegimeEvidence evidence;

  /// "Equilibrium", "PeriodN(4)", "SpiralChaos", ...
  [[nodiscard]] std::string name() const;

  friend bool operator==(const RegimeClass& a, const RegimeClass& b) {
    return a.tag == b.tag && a.period == b.period;
  }
};

struct ClassifierConfig {
  LyapunovConfig lyapunov;
  double lambda_chaos_min{200.0};     // 1/s
  double lambda_periodic_max{50.0};   // 1/s
  double cluster_tolerance{0.01};     // fraction of v_c1 peak-to-peak
  int max_period{16};
  double equilibrium_tolerance{1.0};  // scaled field norm, V/s
  double visit_radius{0.5};           // fraction of the first breakpoint
  int min_visits{5};
};

/// Full output of one classification run.
struct RegimeAnalysis {
  RegimeClass regime;
  std::vector<double> maxima;  // local maxima of v_c1 in the analysis window
};

/// Throws InconclusiveError when the Lyapunov estimate and the maxima
/// pattern disagree.
[[nodiscard]] RegimeAnalysis analyze_regime(const CircuitParams& p, const State& init,
                                            const ClassifierConfig& cfg = {});

[[nodiscard]] RegimeClass classify_regime(const CircuitParams& p, const State& init,
                                          const ClassifierConfig& cfg = {});

/// Default sweep initial condition: a small kick on C1.
inline constexpr State kDefaultInit{0.1, 0.0, 0.0};

struct SweepPoint {
  double r0{};
  std::optional<RegimeClass> regime;
  std::vector<double> maxima;
  std::string error;  // non-empty when classification failed
};

/// Classifies every r0 on its own copy of `p`. Points run concurrently on up
/// to `parallelism` threads (0 = hardware concurrency); results keep the
/// input order.
[[nodiscard]] std::vector<SweepPoint> sweep_bifurcation(const CircuitParams& p,
                                                        std::span<const double> r0_values,
                                                        const ClassifierConfig& cfg = {},
                                                        const State& init = kDefaultInit,
                                                        unsigned parallelism = 0);

/// Position on the route to chaos:
/// Equilibrium < P1 < P2 < P4 < P8 < P16 < SpiralChaos < DoubleScroll < SaturatedCycle.
/// Periodic windows (periods that are not powers of two) have no rank.
[[nodiscard]] std::optional<double> route_rank(const RegimeClass& r);

/// Inserts bisection points between neighbours of a monotone sweep whose
/// ranks skip a stage of the route, down to a spacing of `min_spacing` ohms.
/// Returns the merged sweep sorted in the input's direction.
[[nodiscard]] std::vector<SweepPoint> refine_sweep(const CircuitParams& p, std::vector<SweepPoint> points,
                                                   double min_spacing, const ClassifierConfig& cfg = {},
                                                   const State& init = kDefaultInit,
                                                   unsigned parallelism = 0);

/// `r0,regime,n,lambda1,maxima...`
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);

/// `r0,maximum_v_c1`, one row per maximum.
void write_bifurcation_csv(std::ostream& out, std::span<const SweepPoint> points);

}  // namespace chua
