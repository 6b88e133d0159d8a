#include "rebound/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>

namespace rebound {

namespace {

using Vec5 = std::array<double, 5>;

Vec5 pack(const State& s, double ledger) {
  return {s.h, s.h_dot, s.xi, s.xi_dot, ledger};
}

State unpack(const Vec5& y, double t) {
  return {t, y[0], y[1], y[2], y[3]};
}

struct Deriv {
  Vec5 f{};           // d/dt of (h, h_dot, xi, xi_dot, ledger)
  double lambda = 0;  // relaxation rate of the damped velocity mode
};

Deriv eval(const ModelConfig& cfg, double t, const Vec5& y) {
  const RhsEval r = full_rhs(unpack(y, t), cfg);
  return {{r.deriv.h_dot, r.deriv.h_ddot, r.deriv.xi_dot, r.deriv.xi_ddot,
           r.dissipation_rate},
          r.stiff_rate};
}

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// 5th-order minus embedded 4th-order weights.
constexpr double kE[7] = {71.0 / 57600,       0.0,          -71.0 / 16695,
                          71.0 / 1920,        -17253.0 / 339200,
                          22.0 / 525,         -1.0 / 40};
// Dense-output weights (Hairer's contd5).
constexpr double kD[7] = {-12715105075.0 / 11282082432.0,
                          0.0,
                          87487479700.0 / 32700410799.0,
                          -10690763975.0 / 1880347072.0,
                          701980252875.0 / 199316789632.0,
                          -1453857185.0 / 822651844.0,
                          69997945.0 / 29380423.0};

// L-stable SDIRK3 (Alexander).  gamma is the root of
// x^3 - 3x^2 + (3/2)x - 1/6 in (0, 1/2); the method is stiffly accurate.
constexpr double kG = 0.43586652150845899941601945;
constexpr double kSC2 = (1.0 + kG) / 2.0;
constexpr double kSA21 = (1.0 - kG) / 2.0;
constexpr double kSB1 = -(6.0 * kG * kG - 16.0 * kG + 1.0) / 4.0;
constexpr double kSB2 = (6.0 * kG * kG - 20.0 * kG + 5.0) / 4.0;
// Embedded order-2 weights sharing stages 1-2.
constexpr double kSBh2 = (0.5 - kG) / (kSC2 - kG);
constexpr double kSBh1 = 1.0 - kSBh2;

// Scheme-switch tuning: hand to the implicit companion after 25 consecutive
// stability-limited explicit steps (lambda dt > 2), hand back after 30
// consecutive implicit steps with lambda dt < 0.2.  Implicit segments run at
// a fraction of the user tolerance to keep the global energy-residual budget.
constexpr double kGrindThreshold = 2.0;
constexpr int kGrindSteps = 25;
constexpr double kCalmThreshold = 0.2;
constexpr int kCalmSteps = 30;
constexpr double kStiffTolFactor = 0.05;
constexpr std::int64_t kMaxTotalSteps = 50'000'000;

bool is_step_local(Errc code) {
  return code == Errc::nonpositive_distance || code == Errc::overflow;
}

// 5x5 LU with partial pivoting.
struct Lu {
  std::array<std::array<double, 5>, 5> a{};
  std::array<int, 5> piv{};
  bool ok = false;

  void factor(const std::array<std::array<double, 5>, 5>& in) {
    a = in;
    ok = true;
    for (int i = 0; i < 5; ++i) piv[i] = i;
    for (int col = 0; col < 5; ++col) {
      int p = col;
      for (int r = col + 1; r < 5; ++r) {
        if (std::abs(a[r][col]) > std::abs(a[p][col])) p = r;
      }
      if (a[p][col] == 0.0) {
        ok = false;
        return;
      }
      if (p != col) {
        std::swap(a[p], a[col]);
        std::swap(piv[p], piv[col]);
      }
      for (int r = col + 1; r < 5; ++r) {
        const double f = a[r][col] / a[col][col];
        a[r][col] = f;
        for (int c = col + 1; c < 5; ++c) a[r][c] -= f * a[col][c];
      }
    }
  }

  Vec5 solve(const Vec5& b) const {
    Vec5 x{};
    for (int i = 0; i < 5; ++i) x[i] = b[piv[i]];
    for (int i = 1; i < 5; ++i) {
      for (int j = 0; j < i; ++j) x[i] -= a[i][j] * x[j];
    }
    for (int i = 4; i >= 0; --i) {
      for (int j = i + 1; j < 5; ++j) x[i] -= a[i][j] * x[j];
      x[i] /= a[i][i];
    }
    return x;
  }
};

Vec5 axpy(const Vec5& y, double dt, const Vec5& k) {
  Vec5 out;
  for (int c = 0; c < 5; ++c) out[c] = y[c] + dt * k[c];
  return out;
}

double error_norm(const Vec5& err, const Vec5& y0, const Vec5& y1,
                  double rel_tol, double abs_tol) {
  double acc = 0.0;
  for (int c = 0; c < 5; ++c) {
    const double sc =
        abs_tol + rel_tol * std::max(std::abs(y0[c]), std::abs(y1[c]));
    const double q = err[c] / sc;
    acc += q * q;
  }
  return std::sqrt(acc / 5.0);
}

}  // namespace

void IntegratorSettings::validate() const {
  if (!(rel_tol > 0.0)) fail_validation("rel_tol", "must be > 0");
  if (!(abs_tol > 0.0)) fail_validation("abs_tol", "must be > 0");
  if (!(max_step > 0.0)) fail_validation("max_step", "must be > 0");
  if (!(initial_step >= 0.0)) fail_validation("initial_step", "must be >= 0");
  if (max_rejections < 1) fail_validation("max_rejections", "must be >= 1");
}

Trajectory integrate(const ModelConfig& cfg, double t_end,
                     const IntegratorSettings& settings) {
  cfg.validate();
  settings.validate();
  const double t0 = cfg.initial.t;
  if (!(t_end >= t0)) {
    fail_validation("t_end", "must be >= the initial time");
  }

  Trajectory traj;
  traj.cfg_ = cfg;
  traj.settings_ = settings;
  traj.initial_energy_ = energy(cfg.initial, cfg);
  Vec5 y = pack(cfg.initial, 0.0);
  double t = t0;
  traj.samples_.push_back({unpack(y, t), y[4]});
  if (t_end == t0) return traj;

  const double span = t_end - t0;
  double dt = settings.initial_step > 0.0 ? settings.initial_step : 1e-6 * span;
  dt = std::min({dt, span, settings.max_step});

  Deriv k = eval(cfg, t, y);  // genuine model failures at t0 propagate
  double facold = 1e-4;
  bool stiff_mode = false;
  int grind = 0;
  int calm = 0;
  int rejections = 0;
  std::int64_t total_accepted = 0;

  const auto fail_step = [&](const std::string& why) {
    std::ostringstream msg;
    msg << why << " at t = " << t << " (h = " << y[0] << ", h_dot = " << y[1]
        << ", xi = " << y[2] << ", xi_dot = " << y[3] << ")";
    fail(Errc::step_failure, msg.str());
  };

  const auto reject = [&](double shrink) {
    dt *= shrink;
    ++traj.rejected_;
    if (++rejections > settings.max_rejections) {
      fail_step("exceeded max_rejections (" +
                std::to_string(settings.max_rejections) + ")");
    }
  };

  const auto accept = [&](double t_new, const Vec5& y_new, const Deriv& k_new,
                          const DenseStep& ds) {
    traj.steps_.push_back(ds);
    traj.samples_.push_back({unpack(y_new, t_new), y_new[4]});
    t = t_new;
    y = y_new;
    k = k_new;
    rejections = 0;
    if (++total_accepted > kMaxTotalSteps) {
      fail_step("step budget exhausted; problem too stiff for the settings");
    }
    if (ds.dt < 1e-14 * span) traj.stiffness_warning_ = true;
  };

  while (t < t_end) {
    bool last = false;
    if (dt >= t_end - t) {
      dt = t_end - t;
      last = true;
    }
    if (t + dt == t) fail_step("step size underflow");

    if (!stiff_mode) {
      // ---- explicit Dormand-Prince 5(4) attempt ----
      Deriv ks[7];
      ks[0] = k;
      bool positivity_reject = false;
      Vec5 stage{};
      for (int i = 1; i < 7 && !positivity_reject; ++i) {
        for (int c = 0; c < 5; ++c) {
          double acc = 0.0;
          for (int j = 0; j < i; ++j) acc += kA[i][j] * ks[j].f[c];
          stage[c] = y[c] + dt * acc;
        }
        if (!(stage[0] > 0.0)) {
          positivity_reject = true;
          break;
        }
        try {
          ks[i] = eval(cfg, t + kC[i] * dt, stage);
        } catch (const Error& e) {
          if (!is_step_local(e.code())) throw;
          positivity_reject = true;
        }
      }
      if (positivity_reject) {
        reject(0.5);
        continue;
      }
      const Vec5& y_new = stage;  // stage 7 state is the 5th-order solution
      Vec5 err_v;
      for (int c = 0; c < 5; ++c) {
        double acc = 0.0;
        for (int j = 0; j < 7; ++j) acc += kE[j] * ks[j].f[c];
        err_v[c] = dt * acc;
      }
      const double err =
          error_norm(err_v, y, y_new, settings.rel_tol, settings.abs_tol);
      const double fac11 = std::pow(err, 0.17);
      if (err <= 1.0) {
        DenseStep ds;
        ds.kind = DenseStep::Kind::explicit_rk;
        ds.t0 = t;
        ds.dt = dt;
        for (int c = 0; c < 5; ++c) {
          const double delta = y_new[c] - y[c];
          double dsum = 0.0;
          for (int j = 0; j < 7; ++j) dsum += kD[j] * ks[j].f[c];
          ds.coef[0][c] = y[c];
          ds.coef[1][c] = delta;
          ds.coef[2][c] = dt * ks[0].f[c] - delta;
          ds.coef[3][c] = delta - dt * ks[6].f[c] - ds.coef[2][c];
          ds.coef[4][c] = dt * dsum;
        }
        const double dt_used = dt;
        double fac = fac11 / std::pow(facold, 0.04);
        fac = std::max(0.1, std::min(5.0, fac / 0.9));
        facold = std::max(err, 1e-4);
        accept(last ? t_end : t + dt_used, y_new, ks[6], ds);
        dt = dt_used / fac;
        if (ks[6].lambda * dt_used > kGrindThreshold) {
          if (++grind >= kGrindSteps) {
            traj.stiffness_warning_ = true;
            grind = 0;
            if (settings.stiff_fallback) {
              stiff_mode = true;
              traj.used_stiff_fallback_ = true;
              calm = 0;
            }
          }
        } else {
          grind = 0;
        }
      } else {
        reject(1.0 / std::min(5.0, fac11 / 0.9));
      }
    } else {
      // ---- implicit SDIRK3 attempt ----
      const double rt = settings.rel_tol * kStiffTolFactor;
      const double at = settings.abs_tol * kStiffTolFactor;

      // Finite-difference Jacobian about the current state; the ledger
      // column is identically zero.
      std::array<std::array<double, 5>, 5> jac{};
      bool eval_failed = false;
      {
        constexpr double kTyp[4] = {0.0, 1e-3, 1e-5, 1e-3};
        for (int col = 0; col < 4 && !eval_failed; ++col) {
          const double typ = col == 0 ? std::abs(y[0]) : kTyp[col];
          const double delta =
              std::sqrt(std::numeric_limits<double>::epsilon()) *
              std::max(std::abs(y[col]), typ);
          Vec5 yp = y;
          yp[col] += delta;
          try {
            const Deriv fp = eval(cfg, t, yp);
            for (int r = 0; r < 5; ++r) {
              jac[r][col] = (fp.f[r] - k.f[r]) / delta;
            }
          } catch (const Error& e) {
            if (!is_step_local(e.code())) throw;
            eval_failed = true;
          }
        }
      }
      if (eval_failed) {
        reject(0.5);
        continue;
      }

      std::array<std::array<double, 5>, 5> w{};
      for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) w[r][c] = -dt * kG * jac[r][c];
        w[r][r] += 1.0;
      }
      Lu lu;
      lu.factor(w);
      if (!lu.ok) {
        reject(0.5);
        continue;
      }

      Deriv fs[3];
      Vec5 z{};
      bool stage_failed = false;
      for (int i = 0; i < 3 && !stage_failed; ++i) {
        Vec5 fixed = y;
        if (i == 1) {
          fixed = axpy(y, dt * kSA21, fs[0].f);
        } else if (i == 2) {
          for (int c = 0; c < 5; ++c) {
            fixed[c] = y[c] + dt * (kSB1 * fs[0].f[c] + kSB2 * fs[1].f[c]);
          }
        }
        z = axpy(fixed, dt * kG, k.f);  // predictor
        const double tc = t + (i == 0 ? kG : i == 1 ? kSC2 : 1.0) * dt;
        bool converged = false;
        for (int it = 0; it < 8; ++it) {
          if (!(z[0] > 0.0)) break;
          Deriv fz;
          try {
            fz = eval(cfg, tc, z);
          } catch (const Error& e) {
            if (!is_step_local(e.code())) throw;
            break;
          }
          Vec5 g;
          for (int c = 0; c < 5; ++c) {
            g[c] = z[c] - fixed[c] - dt * kG * fz.f[c];
          }
          const Vec5 dz = lu.solve(g);
          for (int c = 0; c < 5; ++c) z[c] -= dz[c];
          if (error_norm(dz, z, z, rt, at) < 1e-3) {
            converged = true;
            break;
          }
        }
        if (!converged || !(z[0] > 0.0)) {
          stage_failed = true;
          break;
        }
        try {
          fs[i] = eval(cfg, tc, z);
        } catch (const Error& e) {
          if (!is_step_local(e.code())) throw;
          stage_failed = true;
        }
      }
      if (stage_failed) {
        reject(0.5);
        continue;
      }

      const Vec5& y_new = z;  // stiffly accurate: last stage is the solution
      Vec5 raw;
      for (int c = 0; c < 5; ++c) {
        raw[c] = dt * ((kSB1 - kSBh1) * fs[0].f[c] +
                       (kSB2 - kSBh2) * fs[1].f[c] + kG * fs[2].f[c]);
      }
      const Vec5 err_v = lu.solve(raw);  // damp the estimate through W^-1
      const double err = error_norm(err_v, y, y_new, rt, at);
      if (err <= 1.0) {
        DenseStep ds;
        ds.kind = DenseStep::Kind::implicit_hermite;
        ds.t0 = t;
        ds.dt = dt;
        for (int c = 0; c < 5; ++c) {
          const double delta = y_new[c] - y[c];
          const double f0 = dt * k.f[c];
          const double f1 = dt * fs[2].f[c];
          ds.coef[0][c] = y[c];
          ds.coef[1][c] = f0;
          ds.coef[2][c] = 3.0 * delta - 2.0 * f0 - f1;
          ds.coef[3][c] = -2.0 * delta + f0 + f1;
          ds.coef[4][c] = 0.0;
        }
        const double dt_used = dt;
        accept(last ? t_end : t + dt_used, y_new, fs[2], ds);
        dt = dt_used /
             std::max(0.2, std::min(5.0, std::cbrt(err) / 0.9));
        if (fs[2].lambda * dt_used < kCalmThreshold) {
          if (++calm >= kCalmSteps) {
            stiff_mode = false;
            grind = 0;
            facold = 1e-4;
          }
        } else {
          calm = 0;
        }
      } else {
        reject(1.0 / std::max(1.1, std::min(5.0, std::cbrt(err) / 0.9)));
      }
    }
    dt = std::min(dt, settings.max_step);
  }
  return traj;
}

Sample Trajectory::at(double t) const {
  const double lo = t_begin();
  const double hi = t_end();
  const double slack = 1e-9 * std::max(1.0, hi - lo);
  if (!(t >= lo - slack && t <= hi + slack)) {
    fail_validation("t", "query outside the trajectory span");
  }
  const double tq = std::clamp(t, lo, hi);
  if (steps_.empty()) return samples_.front();

  // Find the step containing tq.
  std::size_t idx =
      std::upper_bound(steps_.begin(), steps_.end(), tq,
                       [](double v, const DenseStep& s) { return v < s.t0; }) -
      steps_.begin();
  idx = idx == 0 ? 0 : idx - 1;
  const DenseStep& s = steps_[idx];
  if (tq == samples_[idx].state.t) return samples_[idx];
  if (tq == samples_[idx + 1].state.t) return samples_[idx + 1];

  const double theta = std::clamp((tq - s.t0) / s.dt, 0.0, 1.0);
  Vec5 u;
  if (s.kind == DenseStep::Kind::explicit_rk) {
    const double th1 = 1.0 - theta;
    for (int c = 0; c < 5; ++c) {
      u[c] = s.coef[0][c] +
             theta * (s.coef[1][c] +
                      th1 * (s.coef[2][c] +
                             theta * (s.coef[3][c] + th1 * s.coef[4][c])));
    }
  } else {
    for (int c = 0; c < 5; ++c) {
      u[c] = s.coef[0][c] +
             theta * (s.coef[1][c] +
                      theta * (s.coef[2][c] + theta * s.coef[3][c]));
    }
  }
  return {unpack(u, tq), u[4]};
}

EnergyResidual energy_residual(const Trajectory& traj) {
  EnergyResidual out;
  out.initial = traj.initial_energy();
  for (const Sample& s : traj.samples()) {
    const double f = energy(s.state, traj.config());
    const double r = std::abs(f + s.ledger - out.initial);
    if (r >= out.value) {
      out.value = r;
      out.t = s.state.t;
    }
  }
  return out;
}

std::vector<double> sign_change_times(
    const Trajectory& traj, const std::function<double(const State&)>& f,
    double t_lo, double t_hi) {
  std::vector<double> roots;
  const double lo = std::max(t_lo, traj.t_begin());
  const double hi = std::min(t_hi, traj.t_end());
  if (!(hi > lo)) return roots;

  const auto value = [&](double t) { return f(traj.state_at(t)); };

  const auto bisect = [&](double a, double b, double fa) {
    while (b - a > 1e-12) {
      const double mid = 0.5 * (a + b);
      const double fm = value(mid);
      if (fm == 0.0) return mid;
      if ((fa < 0.0) != (fm < 0.0)) {
        b = mid;
      } else {
        a = mid;
        fa = fm;
      }
    }
    return 0.5 * (a + b);
  };

  constexpr int kSub = 8;
  double prev_t = lo;
  double prev_v = value(lo);
  for (const DenseStep& s : traj.dense_steps()) {
    const double a = std::max(s.t0, lo);
    const double b = std::min(s.t0 + s.dt, hi);
    if (!(b > a)) continue;
    for (int j = 1; j <= kSub; ++j) {
      const double tj = a + (b - a) * j / kSub;
      if (!(tj > prev_t)) continue;
      const double vj = value(tj);
      if (prev_v == 0.0) {
        roots.push_back(prev_t);
      } else if (vj != 0.0 && (prev_v < 0.0) != (vj < 0.0)) {
        roots.push_back(bisect(prev_t, tj, prev_v));
      }
      prev_t = tj;
      prev_v = vj;
    }
  }
  if (prev_v == 0.0) roots.push_back(prev_t);

  std::sort(roots.begin(), roots.end());
  std::vector<double> dedup;
  for (double r : roots) {
    if (dedup.empty() || r - dedup.back() > 1e-11) dedup.push_back(r);
  }
  return dedup;
}

std::vector<Event> locate_events(const Trajectory& traj, EventKind kind,
                                 double threshold) {
  std::vector<Event> events;
  const auto h_dot = [](const State& s) { return s.h_dot; };
  switch (kind) {
    case EventKind::min_distance: {
      std::vector<double> candidates =
          sign_change_times(traj, h_dot, traj.t_begin(), traj.t_end());
      candidates.push_back(traj.t_begin());
      candidates.push_back(traj.t_end());
      // Sample minima catch anything the velocity scan might miss.
      double best_sample_t = traj.t_begin();
      double best_sample_h = traj.samples().front().state.h;
      for (const Sample& s : traj.samples()) {
        if (s.state.h < best_sample_h) {
          best_sample_h = s.state.h;
          best_sample_t = s.state.t;
        }
      }
      candidates.push_back(best_sample_t);
      double best_t = candidates.front();
      double best_h = std::numeric_limits<double>::infinity();
      for (double tc : candidates) {
        const double hc = traj.state_at(tc).h;
        if (hc < best_h) {
          best_h = hc;
          best_t = tc;
        }
      }
      events.push_back({kind, best_t, traj.state_at(best_t)});
      break;
    }
    case EventKind::zero_velocity: {
      for (double r :
           sign_change_times(traj, h_dot, traj.t_begin(), traj.t_end())) {
        events.push_back({kind, r, traj.state_at(r)});
      }
      break;
    }
    case EventKind::threshold_crossing: {
      const auto level = [threshold](const State& s) {
        return s.h - threshold;
      };
      for (double r :
           sign_change_times(traj, level, traj.t_begin(), traj.t_end())) {
        events.push_back({kind, r, traj.state_at(r)});
      }
      break;
    }
  }
  return events;
}

}  // namespace rebound
