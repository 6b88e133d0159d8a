#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rebound/errors.hpp"

namespace rebound {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::int64_t evaluations = 0;
};

namespace gk15 {

// Gauss 7 / Kronrod 15 nodes and weights on [-1, 1] (positive half; the rule
// is symmetric).  Even indices are Kronrod-only nodes, odd indices are the
// embedded Gauss nodes.
inline constexpr double nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
};

inline constexpr double kronrod_w[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};

inline constexpr double gauss_w[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

// One 15-point rule application on [a, b].  Returns the Kronrod value; the
// error estimate uses the usual (200 |K-G|)^(3/2) sharpening.
template <typename F>
QuadratureResult rule(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double kronrod = 0.0;
  double gauss = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double x = half * nodes[i];
    double fsum = f(c + x);
    if (i != 7) fsum += f(c - x);
    kronrod += kronrod_w[i] * fsum;
    if (i % 2 == 1) gauss += gauss_w[i / 2] * fsum;
  }
  kronrod *= half;
  gauss *= half;
  double err = std::abs(kronrod - gauss);
  const double scaled = std::pow(200.0 * err, 1.5);
  if (scaled < err) err = scaled;
  return {kronrod, err, 15};
}

}  // namespace gk15

// Adaptive bisection with a Gauss-Kronrod 15(7) base rule.  Each subinterval
// must meet the width-proportional share of the absolute budget or the local
// relative budget.  Throws QUADRATURE_FAILURE if the subdivision limit is hit
// before the estimate settles.
template <typename F>
QuadratureResult integrate_adaptive(F&& f, double a, double b,
                                    double rel_tol = 1e-10,
                                    double abs_tol = 1e-14,
                                    int max_intervals = 20000) {
  if (!(b >= a)) fail_validation("integration bounds", "need b >= a");
  if (a == b) return {0.0, 0.0, 0};

  struct Interval {
    double a, b, value, error;
  };

  const double width = b - a;
  QuadratureResult whole = gk15::rule(f, a, b);
  std::vector<Interval> stack{{a, b, whole.value, whole.error_estimate}};
  std::int64_t evals = whole.evaluations;

  std::vector<Interval> done;
  int splits = 0;
  while (!stack.empty()) {
    Interval cur = stack.back();
    stack.pop_back();
    const double share = abs_tol * (cur.b - cur.a) / width;
    const double local_tol = std::max(share, rel_tol * std::abs(cur.value));
    if (cur.error <= local_tol || cur.b - cur.a <= 16.0 * std::numeric_limits<double>::epsilon() * (std::abs(cur.a) + std::abs(cur.b))) {
      done.push_back(cur);
      continue;
    }
    if (++splits > max_intervals) {
      fail(Errc::quadrature_failure,
           "interval budget exhausted near [" + std::to_string(cur.a) + ", " +
               std::to_string(cur.b) + "]");
    }
    const double mid = 0.5 * (cur.a + cur.b);
    QuadratureResult left = gk15::rule(f, cur.a, mid);
    QuadratureResult right = gk15::rule(f, mid, cur.b);
    evals += left.evaluations + right.evaluations;
    stack.push_back({cur.a, mid, left.value, left.error_estimate});
    stack.push_back({mid, cur.b, right.value, right.error_estimate});
  }

  double value = 0.0;
  double error = 0.0;
  for (const Interval& seg : done) {
    value += seg.value;
    error += seg.error;
  }
  return {value, error, evals};
}

}  // namespace rebound
