#pragma once

#include "fdia/common.hpp"
#include "fdia/rng.hpp"

#include <vector>

namespace fdia {

// Phase angles and frequency deviations of all buses at one integration step.
struct SystemState {
  Vec theta;  // rad
  Vec omega;  // rad/s deviation
  int step = 0;
};

struct Trajectory {
  std::vector<SystemState> states;  // steps+1 entries, states[t].step == t
};

// Bus-level parameters of the droop-controlled swing dynamics plus the time
// discretization. `injection` is always derived from `equilibrium_theta`
// through coupling_power() so the equilibrium cancels bit-exactly.
struct GridParams {
  int n_buses = 0;
  Vec inertia;            // M_i > 0
  Vec damping;            // D_i >= 0
  Mat susceptance;        // B, symmetric, zero diagonal
  Vec injection;          // p_i
  Vec droop_ref;          // k_i^ref
  Vec equilibrium_theta;  // theta*_i
  double dt = 0.01;       // s
  double t_f = 5.0;       // s
  int steps = 500;        // T, integration steps per episode

  // Throws ConfigError naming the first violated invariant.
  void validate() const;

  SystemState equilibrium_state() const;
};

struct StateDerivative {
  Vec dtheta;
  Vec domega;
};

// c_i = sum_j B_ij sin(theta_i - theta_j), vectorized through the angle
// addition identity. Shared by swing_rhs and the injection derivation.
Vec coupling_power(const Mat& susceptance, const Eigen::Ref<const Vec>& theta);

// dtheta_i = omega_i
// domega_i = (p_i - k'_i w_i - D_i w_i - sum_j B_ij sin(theta_i - theta_j)) / M_i
StateDerivative swing_rhs(const GridParams& params, const SystemState& state,
                          const Eigen::Ref<const Vec>& droop);

// Classical fourth-order Runge-Kutta advance by params.dt. Throws
// DivergenceError if the new state is non-finite or |theta| exceeds 1e6.
SystemState step_rk4(const GridParams& params, const SystemState& state,
                     const Eigen::Ref<const Vec>& droop);

// T applications of step_rk4 with the unaltered droop coefficients.
Trajectory simulate_reference(const GridParams& params, const SystemState& s0);

// Equilibrium state plus i.i.d. U(-magnitude, magnitude) disturbances on
// every theta component, then every omega component, in bus order.
SystemState sample_initial_state(const GridParams& params, Rng& rng,
                                 double magnitude = 0.2);

}  // namespace fdia
