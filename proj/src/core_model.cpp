#include "rebound/core_model.hpp"

#include <cmath>
#include <string>

namespace rebound {

void SpringParams::validate() const {
  if (!(shell_mass > 0.0)) fail_validation("M", "must be > 0");
  if (!(internal_mass > 0.0)) fail_validation("m", "must be > 0");
  if (!(stiffness >= 0.0)) fail_validation("k", "must be >= 0");
}

double spring_force(double xi, const SpringParams& p) {
  return p.stiffness * xi / p.shell_mass;
}

double spring_energy(double y, const SpringParams& p) {
  return p.stiffness * y * y / (2.0 * p.shell_mass);
}

void ModelConfig::validate() const {
  spring.validate();
  if (!(mu >= 0.0)) fail_validation("mu", "must be >= 0");
  if (!(initial.h > 0.0)) fail_validation("h0", "must be > 0");
  if (!std::isfinite(initial.h_dot)) fail_validation("hdot0", "must be finite");
  if (!std::isfinite(initial.xi)) fail_validation("xi0", "must be finite");
  if (!std::isfinite(initial.xi_dot)) {
    fail_validation("xidot0", "must be finite");
  }
  if (mode == SimMode::rigid_body &&
      (initial.xi != 0.0 || initial.xi_dot != 0.0)) {
    fail_validation("xi0/xidot0", "must be 0 in rigid_body mode");
  }
}

namespace {

void require_positive_gap(const State& s) {
  if (!(s.h > 0.0)) {
    fail(Errc::nonpositive_distance,
         "state reached h = " + std::to_string(s.h) + " at t = " +
             std::to_string(s.t));
  }
}

}  // namespace

RhsEval full_rhs(const State& s, const ModelConfig& cfg) {
  require_positive_gap(s);
  RhsEval out;
  const double a = cfg.spring.mass_ratio();
  Derivative& d = out.deriv;
  d.h_dot = s.h_dot;
  d.xi_dot = s.xi_dot;
  if (cfg.mode == SimMode::rigid_body) {
    out.drag = evaluate(cfg.drag, s.h, 0.0);
    out.stiff_rate = cfg.mu * out.drag / cfg.spring.internal_mass;
    d.h_ddot = -out.stiff_rate * s.h_dot;
    d.xi_dot = 0.0;
    d.xi_ddot = 0.0;
    out.dissipation_rate = 2.0 * (1.0 + a) * out.stiff_rate * s.h_dot * s.h_dot;
    return out;
  }
  const double b = spring_force(s.xi, cfg.spring);
  out.drag = evaluate(cfg.drag, s.h, s.xi);
  out.stiff_rate = cfg.mu * out.drag;
  d.h_ddot = -b - out.stiff_rate * s.h_dot;
  d.xi_ddot = d.h_ddot - a * b;
  out.dissipation_rate = 2.0 * a * out.stiff_rate * s.h_dot * s.h_dot;
  return out;
}

Derivative rhs(const State& s, const ModelConfig& cfg) {
  return full_rhs(s, cfg).deriv;
}

double energy(const State& s, const ModelConfig& cfg) {
  const double a = cfg.spring.mass_ratio();
  const double rel = s.h_dot - s.xi_dot;
  return rel * rel + a * s.h_dot * s.h_dot +
         2.0 * a * spring_energy(s.xi, cfg.spring);
}

double dissipation_rate(const State& s, const ModelConfig& cfg) {
  return full_rhs(s, cfg).dissipation_rate;
}

}  // namespace rebound
