#include "fdia/grid.hpp"

#include <cmath>
#include <sstream>

namespace fdia {

namespace {

void check_dim(const Vec& v, int n, const char* name) {
  if (v.size() != n) {
    std::ostringstream os;
    os << "grid: " << name << " must have length " << n << ", got " << v.size();
    throw ConfigError(os.str());
  }
}

}  // namespace

void GridParams::validate() const {
  if (n_buses <= 0) throw ConfigError("grid: n_buses must be positive");
  check_dim(inertia, n_buses, "inertia");
  check_dim(damping, n_buses, "damping");
  check_dim(injection, n_buses, "injection");
  check_dim(droop_ref, n_buses, "droop_ref");
  check_dim(equilibrium_theta, n_buses, "equilibrium_theta");
  if (susceptance.rows() != n_buses || susceptance.cols() != n_buses) {
    throw ConfigError("grid: susceptance must be n_buses x n_buses");
  }
  for (int i = 0; i < n_buses; ++i) {
    if (!(inertia[i] > 0.0)) {
      throw ConfigError("grid: inertia must be positive (M[" +
                        std::to_string(i) + "] = " + std::to_string(inertia[i]) + ")");
    }
  }
  for (int i = 0; i < n_buses; ++i) {
    if (!(damping[i] >= 0.0)) {
      throw ConfigError("grid: damping must be non-negative (D[" +
                        std::to_string(i) + "] = " + std::to_string(damping[i]) + ")");
    }
  }
  for (int i = 0; i < n_buses; ++i) {
    if (susceptance(i, i) != 0.0) {
      throw ConfigError("grid: susceptance diagonal must be zero (B[" +
                        std::to_string(i) + "][" + std::to_string(i) + "] != 0)");
    }
    for (int j = i + 1; j < n_buses; ++j) {
      if (susceptance(i, j) != susceptance(j, i)) {
        throw ConfigError("grid: susceptance must be symmetric (B[" +
                          std::to_string(i) + "][" + std::to_string(j) + "] != B[" +
                          std::to_string(j) + "][" + std::to_string(i) + "])");
      }
    }
  }
  if (!(dt > 0.0)) throw ConfigError("grid: dt must be positive");
  if (steps <= 0) throw ConfigError("grid: steps must be positive");
  // T * dt == t_f within one ULP of t_f.
  const double prod = static_cast<double>(steps) * dt;
  if (prod != t_f && std::nextafter(prod, t_f) != t_f) {
    std::ostringstream os;
    os << "grid: steps * dt must equal t_f (" << steps << " * " << dt
       << " = " << prod << " != " << t_f << ")";
    throw ConfigError(os.str());
  }
  // Equilibrium consistency: p must match the coupling at theta*.
  const Vec expected = coupling_power(susceptance, equilibrium_theta);
  for (int i = 0; i < n_buses; ++i) {
    if (std::abs(injection[i] - expected[i]) > 1e-9) {
      throw ConfigError(
          "grid: injection inconsistent with equilibrium_theta at bus " +
          std::to_string(i) + " (p[i] != sum_j B_ij sin(theta*_i - theta*_j))");
    }
  }
}

SystemState GridParams::equilibrium_state() const {
  return SystemState{equilibrium_theta, Vec::Zero(n_buses), 0};
}

Vec coupling_power(const Mat& susceptance, const Eigen::Ref<const Vec>& theta) {
  // sin(ti - tj) = sin(ti) cos(tj) - cos(ti) sin(tj)
  const Vec s = theta.array().sin();
  const Vec c = theta.array().cos();
  return s.cwiseProduct(susceptance * c) - c.cwiseProduct(susceptance * s);
}

StateDerivative swing_rhs(const GridParams& params, const SystemState& state,
                          const Eigen::Ref<const Vec>& droop) {
  const int n = params.n_buses;
  if (state.theta.size() != n || state.omega.size() != n) {
    throw std::invalid_argument("swing_rhs: state dimension mismatch");
  }
  if (droop.size() != n) {
    throw std::invalid_argument("swing_rhs: droop dimension mismatch");
  }
  StateDerivative d;
  d.dtheta = state.omega;
  d.domega = (params.injection - droop.cwiseProduct(state.omega) -
              params.damping.cwiseProduct(state.omega) -
              coupling_power(params.susceptance, state.theta))
                 .cwiseQuotient(params.inertia);
  return d;
}

SystemState step_rk4(const GridParams& params, const SystemState& state,
                     const Eigen::Ref<const Vec>& droop) {
  if (state.step >= params.steps) {
    throw std::invalid_argument("step_rk4: episode horizon exhausted (step " +
                                std::to_string(state.step) + ")");
  }
  const double dt = params.dt;
  const auto eval = [&](const Vec& th, const Vec& om) {
    SystemState s;
    s.theta = th;
    s.omega = om;
    s.step = state.step;
    return swing_rhs(params, s, droop);
  };

  const StateDerivative k1 = eval(state.theta, state.omega);
  const StateDerivative k2 = eval(state.theta + 0.5 * dt * k1.dtheta,
                                  state.omega + 0.5 * dt * k1.domega);
  const StateDerivative k3 = eval(state.theta + 0.5 * dt * k2.dtheta,
                                  state.omega + 0.5 * dt * k2.domega);
  const StateDerivative k4 =
      eval(state.theta + dt * k3.dtheta, state.omega + dt * k3.domega);

  SystemState next;
  next.theta = state.theta + (dt / 6.0) * (k1.dtheta + 2.0 * k2.dtheta +
                                           2.0 * k3.dtheta + k4.dtheta);
  next.omega = state.omega + (dt / 6.0) * (k1.domega + 2.0 * k2.domega +
                                           2.0 * k3.domega + k4.domega);
  next.step = state.step + 1;

  if (!next.theta.allFinite() || !next.omega.allFinite() ||
      next.theta.cwiseAbs().maxCoeff() > 1e6) {
    throw DivergenceError(
        "integration diverged at step " + std::to_string(next.step), next.step);
  }
  return next;
}

Trajectory simulate_reference(const GridParams& params, const SystemState& s0) {
  if (s0.step != 0) {
    throw std::invalid_argument("simulate_reference: initial state must have step 0");
  }
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(params.steps) + 1);
  traj.states.push_back(s0);
  for (int t = 0; t < params.steps; ++t) {
    traj.states.push_back(step_rk4(params, traj.states.back(), params.droop_ref));
  }
  return traj;
}

SystemState sample_initial_state(const GridParams& params, Rng& rng,
                                 double magnitude) {
  const int n = params.n_buses;
  SystemState s;
  s.theta = params.equilibrium_theta;
  s.omega = Vec::Zero(n);
  s.step = 0;
  for (int i = 0; i < n; ++i) s.theta[i] += rng.uniform(-magnitude, magnitude);
  for (int i = 0; i < n; ++i) s.omega[i] += rng.uniform(-magnitude, magnitude);
  return s;
}

}  // namespace fdia
