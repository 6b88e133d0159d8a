#pragma once

#include "rebound/drag.hpp"
#include "rebound/errors.hpp"

namespace rebound {

// Shell of mass M connected by a linear spring (stiffness k) to an internal
// mass m.  a = M/m is the mass ratio appearing throughout the energy algebra.
struct SpringParams {
  double shell_mass = 1.0;     // M
  double internal_mass = 1.0;  // m
  double stiffness = 0.0;      // k

  double mass_ratio() const { return shell_mass / internal_mass; }
  void validate() const;
};

// Restoring acceleration on the shell: b(xi) = k xi / M.
double spring_force(double xi, const SpringParams& p);

// Potential per unit shell mass: B(y) = k y^2 / (2 M); the antiderivative of
// spring_force with B(0) = 0.
double spring_energy(double y, const SpringParams& p);

// h: shell-wall gap; xi: spring elongation (negative = compressed).
struct State {
  double t = 0.0;
  double h = 0.0;
  double h_dot = 0.0;
  double xi = 0.0;
  double xi_dot = 0.0;
};

struct Derivative {
  double h_dot = 0.0;
  double h_ddot = 0.0;
  double xi_dot = 0.0;
  double xi_ddot = 0.0;
};

// coupled: full shell + internal-mass dynamics.
// rigid_body: single body of mass m, xi frozen at 0, drag scaled by 1/m.
enum class SimMode { coupled, rigid_body };

struct ModelConfig {
  SpringParams spring;
  DragLaw drag = RigidPower{};
  double mu = 0.0;  // viscosity scale in front of the drag
  State initial;
  SimMode mode = SimMode::coupled;
  void validate() const;
};

// Equations of motion.  Coupled mode:
//   h''  = -b(xi) - mu D(h, xi) h'
//   xi'' = h'' - a b(xi)
// Rigid-body mode:
//   h''  = -(mu / m) D(h, 0) h',  xi'' = 0.
// Throws NONPOSITIVE_DISTANCE when s.h <= 0.
Derivative rhs(const State& s, const ModelConfig& cfg);

// Single-pass evaluation used by the integrator: derivative, dissipation
// rate, the drag factor itself, and the relaxation rate of the damped
// velocity mode (the stiffness scale mu D, or mu D / m in rigid mode).
struct RhsEval {
  Derivative deriv;
  double dissipation_rate = 0.0;
  double drag = 0.0;
  double stiff_rate = 0.0;
};

RhsEval full_rhs(const State& s, const ModelConfig& cfg);

// Mechanical energy functional F = (h' - xi')^2 + a h'^2 + 2 a B(xi).
double energy(const State& s, const ModelConfig& cfg);

// Instantaneous dissipation rate, i.e. d(ledger)/dt, chosen so that
// F(t) + ledger(t) is conserved exactly along solutions:
//   coupled:    2 a mu D(h, xi) h'^2
//   rigid_body: 2 (1 + a) (mu / m) D(h, 0) h'^2.
double dissipation_rate(const State& s, const ModelConfig& cfg);

}  // namespace rebound
