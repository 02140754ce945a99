#pragma once

#include "tethersim/integrator.hpp"
#include "tethersim/model.hpp"

// Position control with a flexible tether: output feedback linearization of
// the quadrotor position toward an intermediate point, then a switch to a
// linear state-feedback stabilizer of the upright configuration (q_i = -e3,
// quadrotor directly over the pivot) that damps the tether vibration out.
// Both phases command the inertial thrust vector directly.

namespace tethersim {

struct FlexConfig {
  double delta = 0.01;    // intermediate-point shrink factor, in (0, 1)
  double gamma = 1.0;     // reference time constant, 1/s
  double k_x = 4.0;       // tracking stiffness
  double k_xdot = 4.0;    // tracking damping (critically damped at 4/4)
  double t_switch = 3.0;  // phase switch time, s
  Vec3 x_target = Vec3::Zero();

  void validate() const;  // throws ConfigError on range violations
};

struct ReferencePoint {
  Vec3 y = Vec3::Zero();
  Vec3 ydot = Vec3::Zero();
  Vec3 yddot = Vec3::Zero();
};

// Exponential blend from x0 to (1 - delta) x_target; stays inside the open
// reachable ball D_x for all t by convexity.
ReferencePoint reference_yd(double t, const Vec3& x0, const FlexConfig& cfg);

// Feedback-linearizing thrust: the closed loop obeys
// e_x_ddot = -k_x e_x - k_xdot e_x_dot with e_x = x - y_d. Throws when the
// input map is near singular (taut chain, cond > 1e8).
Vec3 u_track(const SystemParams& params, const ChainState& chain, double t,
             const Vec3& x0, const FlexConfig& cfg);

// Small-angle model about the upright equilibrium in the chart
// q_i = -exp(hat(xi_i)) e3, xi_i . e3 = 0, reduced to the first two
// components: mass xdd + stiffness x = input (u - u_eq).
struct LinearizedModel {
  Eigen::MatrixXd mass;       // 2n x 2n, SPD
  Eigen::MatrixXd stiffness;  // 2n x 2n, diagonal
  Eigen::MatrixXd input;      // 2n x 3, third column zero
  Vec3 u_eq = Vec3::Zero();   // -m_T g e3
};

LinearizedModel linearize(const SystemParams& params);

struct StabilizerGains {
  Eigen::MatrixXd K_x;     // 3 x 2n
  Eigen::MatrixXd K_xdot;  // 3 x 2n
  double margin = 0.0;     // certified decay rate: max Re(eig) <= -margin
};

// First-order closed loop [[0, I], [-M^-1 (G + B K_x), -M^-1 B K_xdot]].
Eigen::MatrixXd closed_loop_matrix(const LinearizedModel& lin,
                                   const StabilizerGains& gains);

// LQR on a zero-order-hold discretization (1 ms), Riccati recursion to a
// fixed point, certified afterwards by a continuous-time eigenvalue check
// against the requested margin. Throws NumericalError on non-convergence or
// a failed certificate.
StabilizerGains synthesize_gains(const LinearizedModel& lin,
                                 const Eigen::MatrixXd& state_weight,
                                 const Eigen::MatrixXd& input_weight,
                                 double margin = 0.05);

// Default weights: state identity, input identity.
StabilizerGains synthesize_gains(const LinearizedModel& lin, double margin = 0.05);

// Rotation vector of the minimal rotation taking -e3 to q; lies in the
// e1-e2 plane. Throws near the antipode q = +e3 where the chart degenerates.
Vec3 tilt_coordinates(const UnitVector3& q);

// u = -K_x x - K_xdot xdot - m_T g e3 with the state reconstructed from the
// nonlinear chain through tilt_coordinates.
Vec3 u_stabilize(const SystemParams& params, const ChainState& chain,
                 const StabilizerGains& gains);

// u_track before t_switch, u_stabilize after; phase and position error are
// logged. x0 anchors the phase-1 reference.
Controller two_phase_controller(const SystemParams& params, const Vec3& x0,
                                const FlexConfig& cfg,
                                const StabilizerGains& gains);

// Minimum-potential chain shape subject to sum(l_i q_i) = x0 (the resting
// tether pinned at the origin with its free end held at x0), found by
// projected-gradient descent over the link directions with the closure
// constraint enforced; stops when the constrained gradient norm is <= 1e-10.
// Requires |x0| strictly inside the reachable ball.
ChainState hanging_chain_through_point(const SystemParams& params, const Vec3& x0);

}  // namespace tethersim
