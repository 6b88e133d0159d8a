#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "rebound/core_model.hpp"

namespace rebound {

struct IntegratorSettings {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  // 0 -> 1e-6 * (t_end - t0)
  int max_rejections = 50;    // per attempted step
  // The near-wall drag term can make the system arbitrarily stiff.  The
  // explicit pair detects sustained stability-limited stepping (recorded as a
  // stiffness warning) and, when this flag is set, hands the step loop to an
  // L-stable implicit companion scheme until the problem relaxes.
  bool stiff_fallback = true;
  void validate() const;
};

enum class Termination { time_end, failure };

struct Sample {
  State state;
  double ledger = 0.0;
};

// Dense-output record: one polynomial (in step-local theta) per component
// order [h, h_dot, xi, xi_dot, ledger].
struct DenseStep {
  enum class Kind { explicit_rk, implicit_hermite };
  Kind kind = Kind::explicit_rk;
  double t0 = 0.0;
  double dt = 0.0;
  std::array<std::array<double, 5>, 5> coef{};  // coef[i] = i-th coefficient row
};

class Trajectory {
 public:
  const ModelConfig& config() const { return cfg_; }
  const IntegratorSettings& settings() const { return settings_; }
  const std::vector<Sample>& samples() const { return samples_; }
  const std::vector<DenseStep>& dense_steps() const { return steps_; }
  Termination termination() const { return termination_; }
  bool stiffness_warning() const { return stiffness_warning_; }
  bool used_stiff_fallback() const { return used_stiff_fallback_; }
  std::int64_t rejected_steps() const { return rejected_; }

  double t_begin() const { return samples_.front().state.t; }
  double t_end() const { return samples_.back().state.t; }
  double initial_energy() const { return initial_energy_; }

  // Dense-output evaluation anywhere in [t_begin, t_end].  Queries exactly at
  // a stored sample time return the stored sample.
  Sample at(double t) const;
  State state_at(double t) const { return at(t).state; }

 private:
  friend Trajectory integrate(const ModelConfig&, double,
                              const IntegratorSettings&);
  ModelConfig cfg_;
  IntegratorSettings settings_;
  std::vector<Sample> samples_;
  std::vector<DenseStep> steps_;
  Termination termination_ = Termination::time_end;
  bool stiffness_warning_ = false;
  bool used_stiff_fallback_ = false;
  std::int64_t rejected_ = 0;
  double initial_energy_ = 0.0;
};

Trajectory integrate(const ModelConfig& cfg, double t_end,
                     const IntegratorSettings& settings = {});

struct EnergyResidual {
  double value = 0.0;    // max over samples of |F + ledger - F(0)|
  double t = 0.0;        // where the max occurs
  double initial = 0.0;  // F(0)
};

EnergyResidual energy_residual(const Trajectory& traj);

enum class EventKind { min_distance, zero_velocity, threshold_crossing };

struct Event {
  EventKind kind = EventKind::min_distance;
  double t = 0.0;
  State state;
};

// MIN_DISTANCE returns the single global minimizer of h; ZERO_VELOCITY all
// sign changes of h_dot; THRESHOLD_CROSSING all crossings of h = threshold.
std::vector<Event> locate_events(const Trajectory& traj, EventKind kind,
                                 double threshold = 0.0);

// All roots of f(state(t)) in [t_lo, t_hi], located by scanning dense output
// and bisecting sign changes to time tolerance 1e-12 s.
std::vector<double> sign_change_times(
    const Trajectory& traj, const std::function<double(const State&)>& f,
    double t_lo, double t_hi);

}  // namespace rebound
