#include "tethersim/model.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "tethersim/errors.hpp"

namespace tethersim {

SystemParams make_params(double quad_mass, const Mat3& inertia,
                         const Eigen::VectorXd& link_masses,
                         const Eigen::VectorXd& link_lengths,
                         double gravity) {
  if (link_masses.size() != link_lengths.size() || link_lengths.size() < 1) {
    throw ConfigError("params: link_masses and link_lengths must have equal size >= 1");
  }
  if (!(quad_mass > 0.0)) throw ConfigError("params: quad_mass must be positive");
  if (!(gravity > 0.0)) throw ConfigError("params: gravity must be positive");
  for (int i = 0; i < link_masses.size(); ++i) {
    if (!(link_masses[i] > 0.0))
      throw ConfigError("params: link_masses[" + std::to_string(i) + "] must be positive");
    if (!(link_lengths[i] > 0.0))
      throw ConfigError("params: link_lengths[" + std::to_string(i) + "] must be positive");
  }
  if ((inertia - inertia.transpose()).norm() > 1e-12 * std::max(1.0, inertia.norm())) {
    throw ConfigError("params: inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(inertia);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError("params: inertia must be positive definite");
  }

  SystemParams p;
  p.quad_mass = quad_mass;
  p.inertia = inertia;
  p.link_masses = link_masses;
  p.link_lengths = link_lengths;
  p.gravity = gravity;

  const auto coeff = inertia_coefficients(p);
  p.link_inertia = coeff.link_inertia;
  p.supported_mass = coeff.supported_mass;
  p.total_mass = coeff.total_mass;
  return p;
}

SystemParams aggregate_single_link(const SystemParams& params) {
  Eigen::VectorXd mass(1), len(1);
  mass << params.link_masses.sum();
  len << params.link_lengths.sum();
  return make_params(params.quad_mass, params.inertia, mass, len, params.gravity);
}

InertiaCoefficients inertia_coefficients(const SystemParams& params) {
  const int n = params.n();
  const double m = params.quad_mass;
  const auto& mi = params.link_masses;
  const auto& li = params.link_lengths;

  // tail[i] = mass strictly below ... strictly after link i in the chain
  Eigen::VectorXd tail = Eigen::VectorXd::Zero(n);
  for (int i = n - 2; i >= 0; --i) tail[i] = tail[i + 1] + mi[i + 1];

  InertiaCoefficients c;
  c.link_inertia.resize(n, n);
  c.supported_mass.resize(n);
  for (int i = 0; i < n; ++i) {
    c.supported_mass[i] = m + mi[i] / 2.0 + tail[i];
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        c.link_inertia(i, i) = (m + mi[i] / 3.0 + tail[i]) * li[i] * li[i];
      } else {
        const int k = std::max(i, j);
        c.link_inertia(i, j) = (m + mi[k] / 2.0 + tail[k]) * li[i] * li[j];
      }
    }
  }
  c.total_mass = m + mi.sum();
  return c;
}

void ChainState::validate() const {
  if (q.size() != omega.size() || q.empty()) {
    throw ConfigError("chain state: q and omega must have equal size >= 1");
  }
  for (size_t i = 0; i < q.size(); ++i) {
    if (std::abs(q[i].vec().norm() - 1.0) > 1e-10) {
      throw NumericalError("chain state: |q[" + std::to_string(i) + "]| drifted off 1");
    }
    if (std::abs(q[i].dot(omega[i])) > 1e-10) {
      throw NumericalError("chain state: omega[" + std::to_string(i) +
                           "] lost tangency: q.omega = " +
                           std::to_string(q[i].dot(omega[i])));
    }
    if (!omega[i].allFinite()) {
      throw NumericalError("chain state: omega[" + std::to_string(i) + "] not finite");
    }
  }
}

void BodyState::validate() const {
  if ((R.transpose() * R - Mat3::Identity()).norm() > 1e-10) {
    throw NumericalError("body state: R^T R drifted from identity");
  }
  if (R.determinant() < 0.0) throw NumericalError("body state: det R < 0");
  if (!Omega.allFinite()) throw NumericalError("body state: Omega not finite");
}

Vec3 thrust_vector(const ControlInput& input, const BodyState& body) {
  return -input.f * body.R.col(2);
}

std::vector<Vec3> positions(const SystemParams& params, const ChainState& chain) {
  std::vector<Vec3> x(chain.q.size());
  Vec3 acc = Vec3::Zero();
  for (int i = 0; i < chain.n(); ++i) {
    acc += params.link_lengths[i] * chain.q[i].vec();
    x[i] = acc;
  }
  return x;
}

Vec3 quad_position(const SystemParams& params, const ChainState& chain) {
  Vec3 x = Vec3::Zero();
  for (int i = 0; i < chain.n(); ++i) x += params.link_lengths[i] * chain.q[i].vec();
  return x;
}

Vec3 quad_velocity(const SystemParams& params, const ChainState& chain) {
  Vec3 v = Vec3::Zero();
  for (int i = 0; i < chain.n(); ++i) {
    v += params.link_lengths[i] * chain.omega[i].cross(chain.q[i].vec());
  }
  return v;
}

Eigen::MatrixXd mass_matrix(const SystemParams& params, const ChainState& chain) {
  const int n = chain.n();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    M.block<3, 3>(3 * i, 3 * i) = params.link_inertia(i, i) * Mat3::Identity();
    const Mat3 Qi2 = hat(chain.q[i].vec()) * hat(chain.q[i].vec());
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      M.block<3, 3>(3 * i, 3 * j) = -params.link_inertia(i, j) * Qi2;
    }
  }
  return M;
}

namespace {

// Gravity/centripetal part of the chain equations, one 3-vector per link:
// G_i = M_ii |qdot_i|^2 q_i + hat(q_i)^2 Mg_i l_i g e3.
Eigen::VectorXd drift_terms(const SystemParams& params, const ChainState& chain) {
  const int n = chain.n();
  const Vec3 ge3 = params.gravity * Vec3::UnitZ();
  Eigen::VectorXd G(3 * n);
  for (int i = 0; i < n; ++i) {
    const Vec3 qi = chain.q[i].vec();
    const Mat3 Qi = hat(qi);
    // |qdot| = |omega| for tangent omega
    G.segment<3>(3 * i) = params.link_inertia(i, i) * chain.omega[i].squaredNorm() * qi +
                          Qi * Qi * (params.supported_mass[i] * params.link_lengths[i] * ge3);
  }
  return G;
}

}  // namespace

std::vector<Vec3> link_accelerations(const SystemParams& params,
                                     const ChainState& chain, const Vec3& u) {
  const int n = chain.n();
  if (n != params.n()) throw ConfigError("link_accelerations: state/params size mismatch");

  // Row i: M_ii wdot_i - sum_j hat(q_i) M_ij hat(q_j) wdot_j
  //      = hat(q_i) [ sum_j M_ij |w_j|^2 q_j + Mg_i l_i g e3 + l_i u ]
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  Eigen::VectorXd b(3 * n);
  const Vec3 ge3 = params.gravity * Vec3::UnitZ();

  std::vector<Mat3> Q(n);
  for (int i = 0; i < n; ++i) Q[i] = hat(chain.q[i].vec());

  for (int i = 0; i < n; ++i) {
    A.block<3, 3>(3 * i, 3 * i) = params.link_inertia(i, i) * Mat3::Identity();
    Vec3 rhs = params.supported_mass[i] * params.link_lengths[i] * ge3 +
               params.link_lengths[i] * u;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      A.block<3, 3>(3 * i, 3 * j) = -params.link_inertia(i, j) * Q[i] * Q[j];
      rhs += params.link_inertia(i, j) * chain.omega[j].squaredNorm() * chain.q[j].vec();
    }
    b.segment<3>(3 * i) = Q[i] * rhs;
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const Eigen::VectorXd w = lu.solve(b);
  const double resid = (A * w - b).norm();
  if (!w.allFinite() || resid > 1e-8 * std::max(1.0, b.norm())) {
    throw NumericalError("link_accelerations: singular chain system (residual " +
                         std::to_string(resid) + ")");
  }

  std::vector<Vec3> wdot(n);
  for (int i = 0; i < n; ++i) {
    // exact solutions are tangent; strip rounding-level normal component
    wdot[i] = project_tangent(chain.q[i], w.segment<3>(3 * i));
  }
  return wdot;
}

Vec3 attitude_dynamics(const SystemParams& params, const BodyState& body,
                       const Vec3& moment) {
  return params.inertia.ldlt().solve(moment - body.Omega.cross(params.inertia * body.Omega));
}

double tension(const SystemParams& params, const UnitVector3& q,
               const Vec3& omega, const Vec3& u) {
  if (params.n() != 1) throw ConfigError("tension: defined for the single-link model");
  const double m = params.quad_mass;
  return m * params.gravity * q.dot(Vec3::UnitZ()) +
         m * params.link_lengths[0] * omega.squaredNorm() + q.dot(u);
}

QuadAccel quad_accel_decomposition(const SystemParams& params,
                                   const ChainState& chain) {
  const int n = chain.n();
  const Eigen::MatrixXd M = mass_matrix(params, chain);
  Eigen::MatrixXd rhs(3 * n, 4);
  rhs.col(0) = drift_terms(params, chain);
  for (int j = 0; j < n; ++j) {
    const Mat3 Qj = hat(chain.q[j].vec());
    rhs.block<3, 3>(3 * j, 1) = params.link_lengths[j] * Qj * Qj;
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  const Eigen::MatrixXd sol = lu.solve(rhs);
  if (!sol.allFinite() ||
      (M * sol - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm())) {
    throw NumericalError("quad_accel_decomposition: singular inertia operator");
  }

  QuadAccel out{Vec3::Zero(), Mat3::Zero()};
  for (int i = 0; i < n; ++i) {
    out.drift += params.link_lengths[i] * sol.block<3, 1>(3 * i, 0);
    out.input_map += params.link_lengths[i] * sol.block<3, 3>(3 * i, 1);
  }
  return out;
}

Energies energies(const SystemParams& params, const ChainState& chain,
                  const BodyState& body) {
  const int n = chain.n();
  Energies e;
  std::vector<Vec3> qdot(n);
  for (int i = 0; i < n; ++i) qdot[i] = chain.omega[i].cross(chain.q[i].vec());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      e.kinetic += 0.5 * params.link_inertia(i, j) * qdot[i].dot(qdot[j]);
    }
  }
  e.kinetic += 0.5 * body.Omega.dot(params.inertia * body.Omega);

  Vec3 weighted = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    weighted += params.supported_mass[i] * params.link_lengths[i] * chain.q[i].vec();
  }
  e.potential = -params.gravity * Vec3::UnitZ().dot(weighted);
  return e;
}

}  // namespace tethersim
