#include "rebound/drag.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "rebound/quadrature.hpp"

namespace rebound {

namespace {

constexpr double kLogDoubleMax = 709.0;  // just under log(DBL_MAX)

// h^p via exp(p log h).  Overflow raises; underflow degrades to 0.
double pow_checked(double h, double p) {
  if (!(h > 0.0)) {
    fail(Errc::nonpositive_distance,
         "power-law drag needs h > 0, got h = " + std::to_string(h));
  }
  const double t = p * std::log(h);
  if (t > kLogDoubleMax) {
    std::ostringstream msg;
    msg << "h^p overflows double range (h = " << h << ", p = " << p << ")";
    fail(Errc::overflow, msg.str());
  }
  if (t < -745.0) return 0.0;
  return std::exp(t);
}

void check_dim(int dim) {
  if (dim != 2 && dim != 3) {
    fail_validation("dim", "must be 2 or 3, got " + std::to_string(dim));
  }
}

}  // namespace

void BodyGeometry::validate() const {
  if (!(alpha > 0.0)) fail_validation("alpha", "must be > 0");
  if (!(gamma > 0.0)) fail_validation("gamma", "must be > 0");
  check_dim(dim);
}

double analytic_ball_shape_factor(double radius, double h, int dim) {
  if (!(radius > 0.0)) fail_validation("radius", "must be > 0");
  check_dim(dim);
  if (!(h > 0.0)) {
    fail(Errc::nonpositive_distance,
         "ball drag needs h > 0, got h = " + std::to_string(h));
  }
  if (dim == 2) {
    return 3.0 * std::numbers::sqrt2 * std::numbers::pi *
           pow_checked(radius / h, 1.5);
  }
  return 6.0 * std::numbers::pi * radius * radius / h;
}

AsymptoticDecay asymptotic_exponent(double alpha, int dim) {
  if (!(alpha > 0.0)) fail_validation("alpha", "must be > 0");
  check_dim(dim);
  if (dim == 2) return {DecayRegime::power_law, -3.0 * alpha / (1.0 + alpha)};
  if (alpha > 1.0 / 3.0) {
    return {DecayRegime::power_law, (1.0 - 3.0 * alpha) / (1.0 + alpha)};
  }
  if (alpha == 1.0 / 3.0) return {DecayRegime::logarithmic, 0.0};
  return {DecayRegime::bounded, 0.0};
}

namespace {

// Dimensionless film integral I_p = int_0^inf u^p / (1 + gamma u^(1+alpha))^3 du
// with p = dim.  Substituting r = h^(1/(1+alpha)) u in the physical integral
// int r^(p-1) r / (h + gamma r^(1+alpha))^3 dr pulls every h out, so the shape
// factor is prefactor * h^exponent with
//   dim 2: prefactor = 24   * I_2, exponent = -3 alpha / (1+alpha)
//   dim 3: prefactor = 6 pi * I_3, exponent = (1 - 3 alpha) / (1+alpha).
// The tail of I_p past U behaves like gamma^-3 u^(p - 3 - 3 alpha), giving the
// analytic bounds used to stop extending the truncated range.
double film_integral(const BodyGeometry& g, double quad_tol) {
  const double p = static_cast<double>(g.dim);
  const double expo = 1.0 + g.alpha;
  const auto f = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double t = g.gamma * std::pow(u, expo);
    const double log_den =
        std::isinf(t) ? 3.0 * (std::log(g.gamma) + expo * std::log(u))
                      : 3.0 * std::log1p(t);
    const double log_f = p * std::log(u) - log_den;
    return log_f < -745.0 ? 0.0 : std::exp(log_f);
  };

  const auto tail_bound = [&](double U) {
    const double g3 = std::pow(g.gamma, -3.0);
    if (g.dim == 2) {
      return g3 * std::pow(U, -3.0 * g.alpha) / (3.0 * g.alpha);
    }
    return g3 * std::pow(U, 1.0 - 3.0 * g.alpha) / (3.0 * g.alpha - 1.0);
  };

  // Crossover scale where gamma u^(1+alpha) = 1.
  const double u_scale = std::pow(1.0 / g.gamma, 1.0 / expo);
  const double seg_rel = 0.25 * quad_tol;
  double acc = integrate_adaptive(f, 0.0, u_scale, seg_rel, 0.0).value;
  double U = u_scale;
  bool converged = false;
  for (int iter = 0; iter < 4000; ++iter) {
    if (tail_bound(U) <= 0.25 * quad_tol * acc) {
      converged = true;
      break;
    }
    acc += integrate_adaptive(f, U, 2.0 * U, seg_rel, 0.0).value;
    U *= 2.0;
  }
  if (!converged) {
    fail(Errc::quadrature_failure,
         "film integral tail did not fall below tolerance (alpha = " +
             std::to_string(g.alpha) + ", dim = " + std::to_string(g.dim) + ")");
  }
  return acc;
}

void check_convergent(const BodyGeometry& g) {
  if (g.dim == 3 && !(g.alpha > 1.0 / 3.0)) {
    std::ostringstream msg;
    msg << "dim-3 film integral diverges for alpha <= 1/3 (alpha = " << g.alpha
        << (g.alpha == 1.0 / 3.0 ? ", marginal logarithmic case)" : ")");
    fail(Errc::divergent_integral, msg.str());
  }
}

double film_prefactor(const BodyGeometry& g, double quad_tol) {
  const double integral = film_integral(g, quad_tol);
  return g.dim == 2 ? 24.0 * integral : 6.0 * std::numbers::pi * integral;
}

}  // namespace

double lubrication_shape_factor(const BodyGeometry& geometry, double h,
                                double quad_tol) {
  geometry.validate();
  check_convergent(geometry);
  if (!(quad_tol > 0.0)) fail_validation("quad_tol", "must be > 0");
  if (!(h > 0.0)) {
    fail(Errc::nonpositive_distance,
         "lubrication factor needs h > 0, got h = " + std::to_string(h));
  }
  const double e = asymptotic_exponent(geometry.alpha, geometry.dim).exponent;
  return film_prefactor(geometry, quad_tol) * pow_checked(h, e);
}

struct LubricationDrag::Cache {
  std::once_flag once;
  double prefactor = 0.0;
};

LubricationDrag::LubricationDrag(BodyGeometry geometry, double quad_tol)
    : geometry_(geometry),
      quad_tol_(quad_tol),
      cache_(std::make_shared<Cache>()) {
  geometry_.validate();
  check_convergent(geometry_);
  if (!(quad_tol_ > 0.0)) fail_validation("quad_tol", "must be > 0");
}

double LubricationDrag::prefactor() const {
  std::call_once(cache_->once, [this] {
    cache_->prefactor = film_prefactor(geometry_, quad_tol_);
  });
  return cache_->prefactor;
}

double LubricationDrag::exponent() const {
  return asymptotic_exponent(geometry_.alpha, geometry_.dim).exponent;
}

double LubricationDrag::operator()(double h) const {
  const double k = prefactor();
  return k * pow_checked(h, exponent());
}

double evaluate(const DragLaw& law, double h, double xi) {
  if (!(h > 0.0)) {
    fail(Errc::nonpositive_distance,
         "drag evaluation needs h > 0, got h = " + std::to_string(h));
  }
  return std::visit(
      [&](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, PowerLawCoupled>) {
          const double tail =
              l.c1 == 0.0 ? 0.0 : l.c1 * pow_checked(h, -l.c2 * xi - 1.5);
          return (tail + l.c3) / l.shell_mass;
        } else if constexpr (std::is_same_v<T, PrototypeD1>) {
          return pow_checked(h, -l.c * xi - 1.5);
        } else if constexpr (std::is_same_v<T, PrototypeD2>) {
          return pow_checked(h, -std::max(xi, 0.0) - 1.0);
        } else if constexpr (std::is_same_v<T, RigidPower>) {
          return l.coefficient * pow_checked(h, -l.alpha);
        } else if constexpr (std::is_same_v<T, LubricationDrag>) {
          return l(h);
        } else {
          return analytic_ball_shape_factor(l.radius, h, l.dim);
        }
      },
      law);
}

bool depends_on_xi(const DragLaw& law) {
  return std::visit(
      [](const auto& l) -> bool {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, PowerLawCoupled>) {
          return l.c1 != 0.0 && l.c2 != 0.0;
        } else if constexpr (std::is_same_v<T, PrototypeD1>) {
          return l.c != 0.0;
        } else if constexpr (std::is_same_v<T, PrototypeD2>) {
          return true;
        } else {
          return false;
        }
      },
      law);
}

std::string describe(const DragLaw& law) {
  std::ostringstream out;
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, PowerLawCoupled>) {
          out << "power_law_coupled{c1=" << l.c1 << ", c2=" << l.c2
              << ", c3=" << l.c3 << ", M=" << l.shell_mass << "}";
        } else if constexpr (std::is_same_v<T, PrototypeD1>) {
          out << "prototype_d1{c=" << l.c << "}";
        } else if constexpr (std::is_same_v<T, PrototypeD2>) {
          out << "prototype_d2";
        } else if constexpr (std::is_same_v<T, RigidPower>) {
          out << "rigid_power{C=" << l.coefficient << ", alpha=" << l.alpha
              << "}";
        } else if constexpr (std::is_same_v<T, LubricationDrag>) {
          const auto& g = l.geometry();
          out << "lubrication{alpha=" << g.alpha << ", gamma=" << g.gamma
              << ", dim=" << g.dim << "}";
        } else {
          out << "analytic_ball{R=" << l.radius << ", dim=" << l.dim << "}";
        }
      },
      law);
  return out.str();
}

// ---------------------------------------------------------------------------
// Assumption audit

namespace {

// Decay exponent the lower-bound check compares against, per law family.
double audit_alpha(const DragLaw& law) {
  return std::visit(
      [](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, PowerLawCoupled>) {
          return 1.5;
        } else if constexpr (std::is_same_v<T, PrototypeD1>) {
          return 1.5;
        } else if constexpr (std::is_same_v<T, PrototypeD2>) {
          return 1.0;
        } else if constexpr (std::is_same_v<T, RigidPower>) {
          return l.alpha;
        } else if constexpr (std::is_same_v<T, LubricationDrag>) {
          return -l.exponent();
        } else {
          return l.dim == 2 ? 1.5 : 1.0;
        }
      },
      law);
}

constexpr double kSlack = 1.0 - 1e-12;  // tolerate equality under roundoff

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

}  // namespace

bool AuditReport::all_pass() const {
  return lower_bound.pass && monotone_in_xi.pass && compressed_lower.pass &&
         vanishing_integral.pass;
}

AuditReport assumption_audit(const DragLaw& law,
                             std::span<const double> h_grid,
                             std::span<const double> xi_grid,
                             const AuditParams& params) {
  if (h_grid.empty()) fail_validation("h_grid", "must not be empty");
  if (xi_grid.empty()) fail_validation("xi_grid", "must not be empty");
  if (!(params.integral_floor > 0.0)) {
    fail_validation("integral_floor", "must be > 0");
  }
  std::vector<double> hs(h_grid.begin(), h_grid.end());
  std::sort(hs.begin(), hs.end());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
  if (!(hs.front() > 0.0)) fail_validation("h_grid", "values must be > 0");
  std::vector<double> xis(xi_grid.begin(), xi_grid.end());
  std::sort(xis.begin(), xis.end());
  xis.erase(std::unique(xis.begin(), xis.end()), xis.end());

  AuditReport report;
  report.alpha_used = audit_alpha(law);

  // Lower bound D(h, xi) >= c h^(-alpha) everywhere on the grid.
  report.lower_bound.name = "lower_bound";
  report.lower_bound.pass = true;
  for (double h : hs) {
    const double bound = params.c_lower * pow_checked(h, -report.alpha_used);
    for (double xi : xis) {
      const double d = evaluate(law, h, xi);
      if (!(d >= bound * kSlack)) {
        report.lower_bound.pass = false;
        report.lower_bound.witness =
            AuditWitness{h, xi, xi, d, bound,
                         "D(h, xi) = " + fmt(d) + " < " + fmt(params.c_lower) +
                             " h^-" + fmt(report.alpha_used) + " = " +
                             fmt(bound)};
        break;
      }
    }
    if (!report.lower_bound.pass) break;
  }

  // Monotone non-decreasing in xi at fixed h.
  report.monotone_in_xi.name = "monotone_in_xi";
  report.monotone_in_xi.pass = true;
  for (double h : hs) {
    for (std::size_t j = 0; j + 1 < xis.size(); ++j) {
      const double lo = evaluate(law, h, xis[j]);
      const double hi = evaluate(law, h, xis[j + 1]);
      if (!(hi >= lo * kSlack)) {
        report.monotone_in_xi.pass = false;
        report.monotone_in_xi.witness =
            AuditWitness{h, xis[j], xis[j + 1], lo, hi,
                         "D decreases in xi: D(h=" + fmt(h) + ", " +
                             fmt(xis[j]) + ") = " + fmt(lo) + " > D(h, " +
                             fmt(xis[j + 1]) + ") = " + fmt(hi)};
        break;
      }
    }
    if (!report.monotone_in_xi.pass) break;
  }

  // Compressed-state lower bound D(h, -delta1) >= c h^(-gamma1).
  report.compressed_lower.name = "compressed_lower";
  report.compressed_lower.pass = true;
  for (double h : hs) {
    const double d = evaluate(law, h, -params.delta1);
    const double bound = params.c_lower * pow_checked(h, -params.gamma1);
    if (!(d >= bound * kSlack)) {
      report.compressed_lower.pass = false;
      report.compressed_lower.witness =
          AuditWitness{h, -params.delta1, -params.delta1, d, bound,
                       "D(h, -delta1) = " + fmt(d) + " < " +
                           fmt(params.c_lower) + " h^-" + fmt(params.gamma1) +
                           " = " + fmt(bound)};
      break;
    }
  }

  // Vanishing weighted integral: I(h) = int_floor^h D(y, -delta2) y^(gamma1-1) dy
  // should trend to zero as h decreases.  A limit is not grid-checkable, so we
  // report the cumulative integral on the grid plus a log-log tail slope and
  // pass on a clearly decreasing trend.
  report.vanishing_integral.name = "vanishing_integral";
  const auto weighted = [&](double y) {
    return evaluate(law, y, -params.delta2) * std::pow(y, params.gamma1 - 1.0);
  };
  double lower = params.integral_floor;
  double acc = 0.0;
  for (double h : hs) {
    if (h > lower) {
      acc += integrate_adaptive(weighted, lower, h, 1e-8, 0.0).value;
      lower = h;
    }
    report.integral_trend.push_back({h, acc});
  }
  if (hs.size() < 2) {
    report.vanishing_integral.pass = false;
    report.vanishing_integral.witness = AuditWitness{
        hs.front(), -params.delta2, -params.delta2, acc, acc,
        "trend needs at least two h grid points"};
  } else {
    const std::size_t n = report.integral_trend.size();
    const std::size_t k = std::min<std::size_t>(4, n);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& p = report.integral_trend[j];
      const double lx = std::log(p.h);
      const double ly = std::log(std::max(p.integral, 1e-300));
      sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const double denom = k * sxx - sx * sx;
    report.trend_slope = denom == 0.0 ? 0.0 : (k * sxy - sx * sy) / denom;
    const double first = report.integral_trend.front().integral;
    const double last = report.integral_trend.back().integral;
    report.vanishing_integral.pass =
        report.trend_slope > 0.01 && first <= 0.9 * last;
    if (!report.vanishing_integral.pass) {
      report.vanishing_integral.witness = AuditWitness{
          hs.front(), -params.delta2, -params.delta2, first, last,
          "integral not trending to zero (tail slope = " +
              fmt(report.trend_slope) + ", I(h_min) = " + fmt(first) +
              ", I(h_max) = " + fmt(last) + ")"};
    }
  }
  return report;
}

}  // namespace rebound
