#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rebound/errors.hpp"

namespace rebound {

// Near-wall body profile psi(r) = gamma * r^(1 + alpha).  dim selects the
// planar (2) or axisymmetric (3) lubrication geometry.
struct BodyGeometry {
  double alpha = 1.0;  // profile exponent, > 0
  double gamma = 2.5;  // profile coefficient, > 0
  int dim = 3;         // 2 or 3
  void validate() const;
};

// D(h, xi) = (c1 * h^(-c2 xi - 3/2) + c3) / shell_mass.
struct PowerLawCoupled {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double shell_mass = 1.0;
};

// D(h, xi) = h^(-c xi - 3/2).
struct PrototypeD1 {
  double c = 1.0;
};

// D(h, xi) = h^(-max(xi, 0) - 1).
struct PrototypeD2 {};

// D(h) = coefficient * h^(-alpha), xi-independent.
struct RigidPower {
  double coefficient = 1.0;
  double alpha = 1.5;
};

// D(h) = prefactor(alpha, gamma, dim) * h^exponent, obtained by quadrature of
// the lubrication film integral.  The h-independent prefactor is computed
// once on first use and shared between copies.
class LubricationDrag {
 public:
  explicit LubricationDrag(BodyGeometry geometry, double quad_tol = 1e-8);

  const BodyGeometry& geometry() const { return geometry_; }
  double quad_tol() const { return quad_tol_; }

  double prefactor() const;  // forces the cached quadrature
  double exponent() const;
  double operator()(double h) const;

 private:
  struct Cache;
  BodyGeometry geometry_;
  double quad_tol_;
  std::shared_ptr<Cache> cache_;
};

// Closed-form lubrication factors for a ball of the given radius:
// dim 2: 3 sqrt(2) pi (R/h)^(3/2);  dim 3: 6 pi R^2 / h.
struct AnalyticBall {
  double radius = 1.0;
  int dim = 3;
};

using DragLaw = std::variant<PowerLawCoupled, PrototypeD1, PrototypeD2,
                             RigidPower, LubricationDrag, AnalyticBall>;

// Evaluate any law at gap h and deformation xi.  Throws
// NONPOSITIVE_DISTANCE for h <= 0 and OVERFLOW when h^p leaves double range.
double evaluate(const DragLaw& law, double h, double xi);

bool depends_on_xi(const DragLaw& law);
std::string describe(const DragLaw& law);

// One-off quadrature evaluation (no caching); LubricationDrag wraps this.
double lubrication_shape_factor(const BodyGeometry& geometry, double h,
                                double quad_tol = 1e-8);

double analytic_ball_shape_factor(double radius, double h, int dim);

// Small-h decay classification of the lubrication factor.
enum class DecayRegime { power_law, logarithmic, bounded };

struct AsymptoticDecay {
  DecayRegime regime = DecayRegime::power_law;
  double exponent = 0.0;  // D ~ h^exponent; meaningful for power_law only
};

AsymptoticDecay asymptotic_exponent(double alpha, int dim);

// ---------------------------------------------------------------------------
// Structural-assumption audit.  Checks the sampled inequalities that the
// model analysis relies on; grids are caller data, results are data.

struct AuditParams {
  double delta1 = 0.02;          // compression probed by the lower-bound check
  double delta2 = 0.05;          // compression probed by the vanishing-integral check
  double gamma1 = 1.0;           // comparison exponent for the compressed bound
  double c_lower = 1.0;          // comparison coefficient
  double integral_floor = 1e-12; // lower integration limit standing in for 0
};

struct AuditWitness {
  double h = 0.0;
  double xi1 = 0.0;
  double xi2 = 0.0;
  double value1 = 0.0;
  double value2 = 0.0;
  std::string detail;
};

struct AuditCheck {
  std::string name;
  bool pass = false;
  std::optional<AuditWitness> witness;  // first violation, when !pass
};

struct TrendPoint {
  double h = 0.0;
  double integral = 0.0;
};

struct AuditReport {
  double alpha_used = 0.0;        // decay exponent the lower bound is tested against
  AuditCheck lower_bound;         // D(h, xi) >= c h^(-alpha) on the grid
  AuditCheck monotone_in_xi;      // D(h, xi) non-decreasing in xi
  AuditCheck compressed_lower;    // D(h, -delta1) >= c h^(-gamma1)
  AuditCheck vanishing_integral;  // integral of D(y,-delta2) y^(gamma1 - 1) dy -> 0
  std::vector<TrendPoint> integral_trend;
  double trend_slope = 0.0;       // log-log slope of the trend tail
  bool all_pass() const;
};

AuditReport assumption_audit(const DragLaw& law, std::span<const double> h_grid,
                             std::span<const double> xi_grid,
                             const AuditParams& params = {});

}  // namespace rebound
