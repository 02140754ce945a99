#pragma once

#include <optional>
#include <vector>

#include "tethersim/model.hpp"
#include "tethersim/taut_control.hpp"
#include "tethersim/trajectory.hpp"

// Post-hoc certificates and audits over recorded trajectories. Every check
// here is assembled independently of the code path it validates: link
// accelerations come from differencing the samples, never from the dynamics
// solver, and energies/parameters are the only model entry points used.

namespace tethersim {

// Quadratic forms sandwiching the direction-error Lyapunov function in
// z = [|e_q|, |e_omega|] and bounding its decay rate. The certificate holds
// only when all three matrices are positive-definite.
struct LyapunovCertificate {
  Eigen::Matrix2d P_lower;
  Eigen::Matrix2d P_upper;
  Eigen::Matrix2d W_q;
  double psi_q = 0.0;
  bool is_valid = false;
};

// Builds the certificate for the given gains over the domain 1 - q.q_d <
// psi_q. Gains are taken as-is (invalid combinations yield is_valid = false);
// psi_q outside (0, 2) is a ConfigError.
LyapunovCertificate lyapunov_certificate(const TautGains& gains, double psi_q);

// Residual of each link equation of motion, re-assembled from the inertia
// coefficients with centrally differenced link accelerations. Entry k covers
// interior sample k+1 and is the max residual norm over links; expected to
// shrink as O(dt^2) under sampling refinement.
std::vector<double> el_residual(const SystemParams& params,
                                const Trajectory& traj);

// Max relative total-energy drift over an unforced run, |E(t) - E(0)|/|E(0)|
// (absolute drift when E(0) = 0). Forced samples are a ConfigError.
double energy_audit(const SystemParams& params, const Trajectory& traj);

// Scans the tracking-phase samples and counts violations of either the
// monotone decay of U = |edot_x|^2/2 + k_x|e_x|^2/2 (beyond 1e-9) or the
// bound |e_x(t)| <= |edot_x(0)|/sqrt(2 k_x). Error rates come from
// differencing the logged position errors.
int tracking_bound_check(const Trajectory& traj, double k_x);

// Bundle the CLI serializes after a run.
struct AuditReport {
  double max_constraint_drift = 0.0;
  double energy_drift_rel = 0.0;  // 0 when the run is forced
  double max_el_residual = 0.0;
  int bound_violations = 0;       // 0 when no tracking phase was logged
};

AuditReport run_audit(const SystemParams& params, const Trajectory& traj,
                      std::optional<double> k_x = std::nullopt);

}  // namespace tethersim
