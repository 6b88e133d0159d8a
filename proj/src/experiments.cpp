#include "rebound/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

#include "rebound/quadrature.hpp"

namespace rebound {

void SweepConfig::validate() const {
  ModelConfig probe = base;
  probe.mu = mu_values.empty() ? 0.0 : mu_values.front();
  probe.validate();
  if (mu_values.size() < 2) {
    fail_validation("mu_values", "needs at least 2 entries");
  }
  for (std::size_t i = 0; i < mu_values.size(); ++i) {
    if (!(mu_values[i] > 0.0) || !std::isfinite(mu_values[i])) {
      fail_validation("mu_values", "entries must be finite and > 0");
    }
    if (i > 0 && !(mu_values[i] < mu_values[i - 1])) {
      fail_validation("mu_values", "must be strictly decreasing");
    }
  }
  if (!(t_end >= base.initial.t) || !std::isfinite(t_end)) {
    fail_validation("t_end", "must be finite and >= the initial time");
  }
  if (audit_grid_size < 2) {
    fail_validation("audit_grid_size", "must be >= 2");
  }
}

bool SweepResult::complete() const {
  return std::all_of(members.begin(), members.end(),
                     [](const SweepMember& m) { return m.trajectory.has_value(); });
}

SweepResult run_sweep(const SweepConfig& cfg,
                      const IntegratorSettings& settings) {
  cfg.validate();
  settings.validate();
  SweepResult out;
  out.config = cfg;
  out.settings = settings;

  std::vector<std::future<Trajectory>> futures;
  futures.reserve(cfg.mu_values.size());
  for (double mu : cfg.mu_values) {
    futures.push_back(std::async(std::launch::async, [&cfg, &settings, mu] {
      ModelConfig member = cfg.base;
      member.mu = mu;
      return integrate(member, cfg.t_end, settings);
    }));
  }
  for (std::size_t i = 0; i < futures.size(); ++i) {
    SweepMember m;
    m.mu = cfg.mu_values[i];
    try {
      m.trajectory = futures[i].get();
    } catch (const Error& e) {
      m.error = std::string(errc_name(e.code())) + ": " + e.what();
    } catch (const std::exception& e) {
      m.error = e.what();
    }
    out.members.push_back(std::move(m));
  }
  return out;
}

double LimitProfiles::H(double t) const {
  return std::max(0.0, h0 + hdot0 * t);
}

double LimitProfiles::xi(double t) const {
  if (t <= t0) return 0.0;
  return (-hdot0 / omega) * std::sin(omega * (t - t0));
}

LimitProfiles make_limit_profiles(const SpringParams& p, double h0,
                                  double hdot0) {
  p.validate();
  if (!(p.stiffness > 0.0)) {
    fail_validation("stiffness", "must be > 0 for the limit oscillator");
  }
  if (!(h0 > 0.0)) fail_validation("h0", "must be > 0");
  if (!(hdot0 < 0.0)) {
    fail(Errc::undefined_t0,
         "the wall-contact time t0 = -h0/hdot0 requires hdot0 < 0 (got " +
             std::to_string(hdot0) + ")");
  }
  LimitProfiles out;
  out.h0 = h0;
  out.hdot0 = hdot0;
  out.t0 = -h0 / hdot0;
  out.omega = std::sqrt(p.stiffness / p.internal_mass);
  return out;
}

std::vector<double> xi_limit_solve(const SpringParams& p, double h0,
                                   double hdot0,
                                   const std::vector<double>& t_grid) {
  const LimitProfiles profiles = make_limit_profiles(p, h0, hdot0);
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back(profiles.xi(t));
  return out;
}

TurningPoints turning_points(const SpringParams& p, double hdot0) {
  p.validate();
  if (!(p.stiffness > 0.0)) fail_validation("stiffness", "must be > 0");
  if (hdot0 == 0.0 || !std::isfinite(hdot0)) {
    fail_validation("hdot0", "must be finite and nonzero");
  }
  // Root of 2aB(y) = hdot0^2 with the quadratic spring energy: the stored
  // energy (k/m) y^2 matches the launch kinetic energy at |y| = |hdot0|
  // sqrt(m/k).
  const double w2 = p.stiffness / p.internal_mass;  // omega^2 = a k / M
  const double y_amp = std::abs(hdot0) / std::sqrt(w2);

  // Traversal time 2|int_0^y_turn dy / sqrt(hdot0^2 - 2aB(y))|.  With y =
  // y_turn sin^2(theta) the endpoint singularity cancels; the radicand
  // hdot0^2 - w2 y^2 = w2 (y_turn - y)(y_turn + y) is evaluated in factored
  // form so the near-turning-point cancellation never occurs.
  const auto traversal = [&](double y_turn) {
    const auto integrand = [&](double theta) {
      const double s = std::sin(theta);
      const double c = std::cos(theta);
      const double y = y_turn * s * s;
      const double radicand = w2 * (y_turn - y) * (y_turn + y);
      return 2.0 * std::abs(y_turn) * s * c / std::sqrt(radicand);
    };
    const QuadratureResult q =
        integrate_adaptive(integrand, 0.0, std::asin(1.0), 1e-12, 1e-300);
    return 2.0 * q.value;
  };

  TurningPoints out;
  out.y_plus = y_amp;
  out.y_minus = -y_amp;
  out.t_plus = traversal(out.y_plus);
  out.t_minus = traversal(out.y_minus);
  return out;
}

Deviation limit_deviation(const Trajectory& traj, const LimitProfiles& profiles,
                          double t_lo, double t_hi, int grid_size) {
  if (!(t_hi >= t_lo)) fail_validation("interval", "needs t_hi >= t_lo");
  if (t_lo < traj.t_begin() || t_hi > traj.t_end()) {
    fail_validation("interval", "must lie inside the trajectory span");
  }
  if (grid_size < 1) fail_validation("grid_size", "must be >= 1");

  Deviation out;
  const int n = (t_hi == t_lo) ? 1 : std::max(2, grid_size);
  for (int i = 0; i < n; ++i) {
    const double t =
        n == 1 ? t_lo : t_lo + (t_hi - t_lo) * static_cast<double>(i) / (n - 1);
    const State s = traj.state_at(t);
    out.dev_h = std::max(out.dev_h, std::abs(s.h - profiles.H(t)));
    out.dev_xi = std::max(out.dev_xi, std::abs(s.xi - profiles.xi(t)));
  }
  return out;
}

ReboundReport detect_rebound(const Trajectory& traj, double h_floor_fraction) {
  if (!(h_floor_fraction >= 0.0)) {
    fail_validation("h_floor_fraction", "must be >= 0");
  }
  const std::vector<Event> min_ev =
      locate_events(traj, EventKind::min_distance);
  ReboundReport out;
  out.t_min = min_ev.front().t;
  out.h_min = min_ev.front().state.h;

  // Post-minimum apex: candidates are step endpoints, velocity zeros, and
  // the final time.
  out.max_post_min_h = out.h_min;
  out.t_of_max = out.t_min;
  const auto consider = [&](double t, double h) {
    if (t >= out.t_min && h > out.max_post_min_h) {
      out.max_post_min_h = h;
      out.t_of_max = t;
    }
  };
  for (const Sample& s : traj.samples()) consider(s.state.t, s.state.h);
  for (const Event& e :
       locate_events(traj, EventKind::zero_velocity)) {
    consider(e.t, e.state.h);
  }
  consider(traj.t_end(), traj.state_at(traj.t_end()).h);

  const double threshold =
      std::max(h_floor_fraction * traj.config().initial.h,
               10.0 * traj.settings().abs_tol);
  out.rebounded = out.max_post_min_h > out.h_min + threshold;
  return out;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::physical:
      return "PHYSICAL";
    case Verdict::not_physical:
      return "NOT_PHYSICAL";
    case Verdict::inconclusive:
      return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

ReboundVerdict physical_rebound_verdict(const std::vector<double>& mu,
                                        const std::vector<double>& heights,
                                        double h0,
                                        const VerdictThresholds& thr) {
  if (mu.size() < 3) fail_validation("mu", "verdict needs at least 3 members");
  if (heights.size() != mu.size()) {
    fail_validation("heights", "must match mu in length");
  }
  if (!(h0 > 0.0)) fail_validation("h0", "must be > 0");
  if (!(thr.persistence_fraction > thr.vanishing_fraction) ||
      !(thr.vanishing_fraction > 0.0)) {
    fail_validation("thresholds",
                    "needs persistence_fraction > vanishing_fraction > 0");
  }

  ReboundVerdict out;
  out.thresholds = thr;
  out.h0 = h0;
  out.mu = mu;
  out.heights = heights;

  // Least-squares slope of height against position in the decreasing-mu
  // list; positive means the rebound grows as viscosity vanishes.
  const std::size_t n = heights.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += i;
    sy += heights[i];
    sxx += static_cast<double>(i) * i;
    sxy += i * heights[i];
  }
  out.trend_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

  const bool tail_up = heights[n - 1] >= thr.persistence_fraction * h0 &&
                       heights[n - 2] >= thr.persistence_fraction * h0;
  const bool dies_out =
      out.trend_slope < 0.0 && heights[n - 1] < thr.vanishing_fraction * h0;

  std::ostringstream note;
  note << "finite-sweep proxy for the vanishing-viscosity limit: tail heights "
       << heights[n - 2] << ", " << heights[n - 1] << " vs persistence "
       << thr.persistence_fraction * h0 << " and vanishing "
       << thr.vanishing_fraction * h0 << ", trend slope " << out.trend_slope;
  out.note = note.str();

  if (tail_up) {
    out.verdict = Verdict::physical;
  } else if (dies_out) {
    out.verdict = Verdict::not_physical;
  } else {
    out.verdict = Verdict::inconclusive;
  }
  return out;
}

ReboundVerdict physical_rebound_verdict(const SweepResult& sweep,
                                        const VerdictThresholds& thr) {
  std::vector<double> mu;
  std::vector<double> heights;
  for (const SweepMember& m : sweep.members) {
    if (!m.trajectory) continue;
    const ReboundReport r = detect_rebound(*m.trajectory);
    mu.push_back(m.mu);
    heights.push_back(r.max_post_min_h - r.h_min);
  }
  if (mu.size() < 3) {
    fail_validation("sweep", "verdict needs at least 3 completed members");
  }
  return physical_rebound_verdict(mu, heights,
                                  sweep.config.base.initial.h, thr);
}

std::vector<MemberMetrics> summarize(const SweepResult& sweep) {
  const ModelConfig& base = sweep.config.base;
  const LimitProfiles profiles =
      make_limit_profiles(base.spring, base.initial.h, base.initial.h_dot);
  const int grid = sweep.config.audit_grid_size;

  std::vector<MemberMetrics> rows;
  for (const SweepMember& m : sweep.members) {
    if (!m.trajectory) continue;
    const Trajectory& traj = *m.trajectory;
    MemberMetrics row;
    row.mu = m.mu;

    const ReboundReport r = detect_rebound(traj);
    row.h_min = r.h_min;
    row.t_min = r.t_min;
    row.rebound_height = r.max_post_min_h - r.h_min;
    row.rebounded = r.rebounded;
    row.energy_residual = energy_residual(traj).value;

    const double lo = traj.t_begin();
    const double hi = traj.t_end();
    row.dev_h =
        limit_deviation(traj, profiles, lo, std::clamp(profiles.t0, lo, hi),
                        grid)
            .dev_h;
    const double tail_lo = profiles.t0 + 0.05;
    if (tail_lo < hi) {
      row.dev_xi = limit_deviation(traj, profiles, tail_lo, hi, grid).dev_xi;
    }

    for (int i = 0; i < grid; ++i) {
      const double t = lo + (hi - lo) * static_cast<double>(i) / (grid - 1);
      row.sup_xi = std::max(row.sup_xi, std::abs(traj.state_at(t).xi));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rebound
