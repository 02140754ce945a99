#include "tethersim/verify.hpp"

#include <algorithm>
#include <cmath>

#include "tethersim/errors.hpp"

namespace tethersim {

namespace {

const Vec3 kE3 = Vec3::UnitZ();

// hat(q)^2 v = q (q.v) - v for unit q.
Vec3 hat2(const Vec3& q, const Vec3& v) { return q * q.dot(v) - v; }

bool positive_definite(const Eigen::Matrix2d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(m);
  return eig.eigenvalues().minCoeff() > 0.0;
}

ChainState chain_of(const TrajectorySample& s) {
  ChainState chain;
  for (size_t i = 0; i < s.q.size(); ++i) {
    chain.q.push_back(UnitVector3::normalized(s.q[i]));
    chain.omega.push_back(s.omega[i]);
  }
  return chain;
}

bool forced(const TrajectorySample& s) {
  return s.f != 0.0 || s.moment.norm() != 0.0 || s.u.norm() != 0.0;
}

}  // namespace

LyapunovCertificate lyapunov_certificate(const TautGains& gains,
                                         double psi_q) {
  if (!(psi_q > 0.0) || !(psi_q < 2.0))
    throw ConfigError("psi_q must lie in (0, 2)");

  // Lower form: k_q Psi >= (k_q/2)|e_q|^2 and the cross term >= -c_q z1 z2.
  LyapunovCertificate cert;
  cert.psi_q = psi_q;
  cert.P_lower << gains.k_q, -gains.c_q, -gains.c_q, 1.0;
  cert.P_lower *= 0.5;
  cert.P_upper << 2.0 * gains.k_q / (2.0 - psi_q), gains.c_q, gains.c_q, 1.0;
  cert.P_upper *= 0.5;
  cert.W_q << gains.c_q * gains.k_q, -gains.c_q * gains.k_omega / 2.0,
      -gains.c_q * gains.k_omega / 2.0, gains.k_omega - gains.c_q;
  cert.is_valid = positive_definite(cert.P_lower) &&
                  positive_definite(cert.P_upper) &&
                  positive_definite(cert.W_q);
  return cert;
}

std::vector<double> el_residual(const SystemParams& params,
                                const Trajectory& traj) {
  traj.validate();
  if (traj.n != params.n())
    throw ConfigError("trajectory link count does not match the parameters");
  const int count = static_cast<int>(traj.samples.size());
  if (count < 3)
    throw ConfigError("residual check needs at least three samples");

  const int n = params.n();
  std::vector<double> out;
  out.reserve(count - 2);
  std::vector<Vec3> qddot(n);
  for (int k = 1; k + 1 < count; ++k) {
    const TrajectorySample& prev = traj.samples[k - 1];
    const TrajectorySample& here = traj.samples[k];
    const TrajectorySample& next = traj.samples[k + 1];
    for (int i = 0; i < n; ++i)
      qddot[i] = (next.omega[i].cross(next.q[i]) -
                  prev.omega[i].cross(prev.q[i])) /
                 (2.0 * traj.dt);

    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec3& qi = here.q[i];
      const double li = params.link_lengths(i);
      Vec3 coupled = Vec3::Zero();
      for (int j = 0; j < n; ++j)
        if (j != i) coupled += params.link_inertia(i, j) * qddot[j];
      const Vec3 qdot_i = here.omega[i].cross(qi);
      const Vec3 residual =
          params.link_inertia(i, i) * (qddot[i] + qdot_i.squaredNorm() * qi) -
          hat2(qi, coupled) +
          hat2(qi, params.supported_mass(i) * li * params.gravity * kE3) +
          hat2(qi, li * here.u);
      worst = std::max(worst, residual.norm());
    }
    out.push_back(worst);
  }
  return out;
}

double energy_audit(const SystemParams& params, const Trajectory& traj) {
  traj.validate();
  if (traj.n != params.n())
    throw ConfigError("trajectory link count does not match the parameters");
  for (const TrajectorySample& s : traj.samples)
    if (forced(s))
      throw ConfigError("energy audit requires an unforced trajectory");

  BodyState body;
  body.R = traj.samples.front().R;
  body.Omega = traj.samples.front().Omega;
  const double initial =
      energies(params, chain_of(traj.samples.front()), body).total();
  double drift = 0.0;
  for (const TrajectorySample& s : traj.samples) {
    body.R = s.R;
    body.Omega = s.Omega;
    drift = std::max(
        drift, std::abs(energies(params, chain_of(s), body).total() - initial));
  }
  return std::abs(initial) > 1e-12 ? drift / std::abs(initial) : drift;
}

int tracking_bound_check(const Trajectory& traj, double k_x) {
  traj.validate();
  if (!(k_x > 0.0)) throw ConfigError("k_x must be positive");

  std::vector<Vec3> e;
  int first = -1, last = -1;
  for (int k = 0; k < static_cast<int>(traj.samples.size()); ++k) {
    const ControlLog& log = traj.samples[k].log;
    if (log.phase != 1 || !log.e_x) continue;
    if (first < 0) first = k;
    if (last >= 0 && k != last + 1)
      throw ConfigError("tracking-phase samples are not contiguous");
    last = k;
    e.push_back(*log.e_x);
  }
  const int m = static_cast<int>(e.size());
  if (m < 3)
    throw ConfigError("trajectory carries no tracking phase to check");

  // O(dt^2) rates: one-sided three-point stencils at the ends, central inside.
  const double dt = traj.dt;
  std::vector<Vec3> edot(m);
  edot[0] = (-3.0 * e[0] + 4.0 * e[1] - e[2]) / (2.0 * dt);
  for (int k = 1; k + 1 < m; ++k) edot[k] = (e[k + 1] - e[k - 1]) / (2.0 * dt);
  edot[m - 1] = (3.0 * e[m - 1] - 4.0 * e[m - 2] + e[m - 3]) / (2.0 * dt);

  const double bound = edot[0].norm() / std::sqrt(2.0 * k_x) + 1e-9;
  int violations = 0;
  double prev_u = 0.0;
  for (int k = 0; k < m; ++k) {
    const double u_k =
        0.5 * edot[k].squaredNorm() + 0.5 * k_x * e[k].squaredNorm();
    if (e[k].norm() > bound || (k > 0 && u_k > prev_u + 1e-9)) ++violations;
    prev_u = u_k;
  }
  return violations;
}

AuditReport run_audit(const SystemParams& params, const Trajectory& traj,
                      std::optional<double> k_x) {
  traj.validate();
  AuditReport report;

  for (const TrajectorySample& s : traj.samples) {
    double defect = (s.R.transpose() * s.R - Mat3::Identity()).norm();
    for (int i = 0; i < traj.n; ++i) {
      defect = std::max(defect, std::abs(s.q[i].norm() - 1.0));
      defect = std::max(defect, std::abs(s.q[i].dot(s.omega[i])));
    }
    report.max_constraint_drift = std::max(report.max_constraint_drift, defect);
  }

  if (traj.samples.size() >= 3) {
    const std::vector<double> residuals = el_residual(params, traj);
    report.max_el_residual =
        *std::max_element(residuals.begin(), residuals.end());
  }

  if (std::none_of(traj.samples.begin(), traj.samples.end(), forced))
    report.energy_drift_rel = energy_audit(params, traj);

  if (k_x) {
    const auto tracked = [](const TrajectorySample& s) {
      return s.log.phase == 1 && s.log.e_x.has_value();
    };
    if (std::count_if(traj.samples.begin(), traj.samples.end(), tracked) >= 3)
      report.bound_violations = tracking_bound_check(traj, *k_x);
  }
  return report;
}

}  // namespace tethersim
