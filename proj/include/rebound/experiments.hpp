#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rebound/integrator.hpp"

namespace rebound {

struct SweepConfig {
  ModelConfig base;               // base.mu is ignored; set per member
  std::vector<double> mu_values;  // strictly decreasing, > 0, >= 2 entries
  double t_end = 2.0;
  int audit_grid_size = 10000;  // uniform grid used for sup-norm metrics
  void validate() const;
};

struct SweepMember {
  double mu = 0.0;
  std::optional<Trajectory> trajectory;  // empty iff the run failed
  std::string error;                     // failure description when empty
};

struct SweepResult {
  SweepConfig config;
  IntegratorSettings settings;
  std::vector<SweepMember> members;  // input order (decreasing mu)
  bool complete() const;
};

// Integrates one trajectory per viscosity, fanning out across threads and
// joining in input order.  A member failure is recorded on that member and
// does not abort the rest of the sweep.
SweepResult run_sweep(const SweepConfig& cfg,
                      const IntegratorSettings& settings = {});

// Vanishing-viscosity limit profiles: the shell height collapses onto the
// hit-and-stick ramp H(t) = max(0, h0 + hdot0*t), reaching the wall at
// t0 = -h0/hdot0, after which the internal elongation rings as a free
// oscillator started from rest position with speed -hdot0.
struct LimitProfiles {
  double h0 = 0.0;
  double hdot0 = 0.0;
  double t0 = 0.0;
  double omega = 0.0;  // sqrt(k/m)

  double H(double t) const;
  double xi(double t) const;
};

// UNDEFINED_T0 unless hdot0 < 0; requires k > 0.
LimitProfiles make_limit_profiles(const SpringParams& p, double h0,
                                  double hdot0);

// Samples the limit elongation profile on the given time grid.
std::vector<double> xi_limit_solve(const SpringParams& p, double h0,
                                   double hdot0,
                                   const std::vector<double>& t_grid);

// Elongations y- < 0 < y+ at which the spring stores all of the launch
// kinetic energy, and the times t-/t+ to traverse 0 -> y-/y+ and back,
// computed by adaptive quadrature of 2|int_0^{y} (hdot0^2 - 2aB)^{-1/2}|
// with the endpoint singularity removed by the substitution y = y_turn
// sin^2(theta).
struct TurningPoints {
  double y_minus = 0.0;
  double y_plus = 0.0;
  double t_minus = 0.0;
  double t_plus = 0.0;
};

TurningPoints turning_points(const SpringParams& p, double hdot0);

struct Deviation {
  double dev_h = 0.0;   // sup over the grid of |h(t) - H(t)|
  double dev_xi = 0.0;  // sup over the grid of |xi(t) - xi_limit(t)|
};

// Sup-norm deviation from the limit profiles over a uniform grid on
// [t_lo, t_hi] (inclusive), evaluated through dense output.
Deviation limit_deviation(const Trajectory& traj, const LimitProfiles& profiles,
                          double t_lo, double t_hi, int grid_size = 10000);

struct ReboundReport {
  bool rebounded = false;
  double t_min = 0.0;
  double h_min = 0.0;
  double max_post_min_h = 0.0;
  double t_of_max = 0.0;
};

// A trajectory rebounds when, after the global distance minimum, the gap
// re-opens by more than max(h_floor_fraction * h0, 10 * abs_tol).
ReboundReport detect_rebound(const Trajectory& traj,
                             double h_floor_fraction = 0.0);

enum class Verdict { physical, not_physical, inconclusive };

const char* verdict_name(Verdict v);

struct VerdictThresholds {
  double persistence_fraction = 0.10;  // "stays up": height vs h0, smallest 2 mu
  double vanishing_fraction = 0.01;    // "dies out": final height vs h0
};

struct ReboundVerdict {
  Verdict verdict = Verdict::inconclusive;
  VerdictThresholds thresholds;
  double h0 = 0.0;
  std::vector<double> mu;       // decreasing
  std::vector<double> heights;  // rebound height per mu
  double trend_slope = 0.0;     // least-squares slope of height vs index
  std::string note;
};

// Finite-sweep proxy for "the rebound withstands the vanishing-viscosity
// limit": physical if the heights at the two smallest viscosities both stay
// above persistence_fraction * h0; not_physical if the fitted trend decreases
// and the final height is below vanishing_fraction * h0; else inconclusive.
ReboundVerdict physical_rebound_verdict(const std::vector<double>& mu,
                                        const std::vector<double>& heights,
                                        double h0,
                                        const VerdictThresholds& thr = {});

ReboundVerdict physical_rebound_verdict(const SweepResult& sweep,
                                        const VerdictThresholds& thr = {});

struct MemberMetrics {
  double mu = 0.0;
  double h_min = 0.0;
  double t_min = 0.0;
  double rebound_height = 0.0;  // max_post_min_h - h_min
  double dev_h = 0.0;           // vs H on [0, t0]
  double dev_xi = 0.0;          // vs xi_limit on [t0 + 0.05, t_end]
  double energy_residual = 0.0;
  double sup_xi = 0.0;  // sup |xi| over the audit grid
  bool rebounded = false;
};

// Per-member headline numbers for completed members, in sweep order.
// Requires hdot0 < 0 (the limit profiles must exist).
std::vector<MemberMetrics> summarize(const SweepResult& sweep);

}  // namespace rebound
