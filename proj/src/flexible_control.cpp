#include "tethersim/flexible_control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "tethersim/errors.hpp"

namespace tethersim {

namespace {

const Vec3 kE3 = Vec3::UnitZ();

Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& A, const Eigen::MatrixXd& rhs) {
  return A.llt().solve(rhs);
}

}  // namespace

void FlexConfig::validate() const {
  if (!(delta > 0.0) || !(delta < 1.0))
    throw ConfigError("delta must lie in (0, 1)");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(k_x > 0.0) || !(k_xdot > 0.0))
    throw ConfigError("tracking gains must be positive");
  if (!(t_switch >= 0.0)) throw ConfigError("t_switch must be nonnegative");
}

ReferencePoint reference_yd(double t, const Vec3& x0, const FlexConfig& cfg) {
  const double decay = std::exp(-cfg.gamma * t);
  ReferencePoint ref;
  ref.y = x0 * decay + (1.0 - cfg.delta) * (1.0 - decay) * cfg.x_target;
  ref.ydot = cfg.gamma * decay * ((1.0 - cfg.delta) * cfg.x_target - x0);
  ref.yddot = -cfg.gamma * ref.ydot;
  return ref;
}

Vec3 u_track(const SystemParams& params, const ChainState& chain, double t,
             const Vec3& x0, const FlexConfig& cfg) {
  const QuadAccel acc = quad_accel_decomposition(params, chain);
  const Eigen::JacobiSVD<Mat3> svd(acc.input_map,
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (!(smin > 0.0) || smax / smin > 1e8)
    throw NumericalError(
        "input map is near singular (chain close to taut); position "
        "linearization unavailable");

  const ReferencePoint ref = reference_yd(t, x0, cfg);
  const Vec3 e_x = quad_position(params, chain) - ref.y;
  const Vec3 e_xdot = quad_velocity(params, chain) - ref.ydot;
  // xdd = -drift - input_map u must equal yddot - k_x e_x - k_xdot e_xdot
  return svd.solve(-acc.drift - ref.yddot + cfg.k_x * e_x + cfg.k_xdot * e_xdot);
}

LinearizedModel linearize(const SystemParams& params) {
  const int n = params.n();
  LinearizedModel lin;
  lin.mass = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  lin.stiffness = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  lin.input = Eigen::MatrixXd::Zero(2 * n, 3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      lin.mass.block<2, 2>(2 * i, 2 * j) =
          params.link_inertia(i, j) * Eigen::Matrix2d::Identity();
    }
    const double li = params.link_lengths(i);
    lin.stiffness.block<2, 2>(2 * i, 2 * i) =
        (params.total_mass - params.supported_mass(i)) * params.gravity * li *
        Eigen::Matrix2d::Identity();
    lin.input(2 * i, 1) = li;
    lin.input(2 * i + 1, 0) = -li;
  }
  lin.u_eq = -params.total_mass * params.gravity * kE3;
  return lin;
}

Eigen::MatrixXd closed_loop_matrix(const LinearizedModel& lin,
                                   const StabilizerGains& gains) {
  const int n2 = static_cast<int>(lin.mass.rows());
  Eigen::MatrixXd acl = Eigen::MatrixXd::Zero(2 * n2, 2 * n2);
  acl.topRightCorner(n2, n2).setIdentity();
  acl.bottomLeftCorner(n2, n2) =
      -solve_spd(lin.mass, lin.stiffness + lin.input * gains.K_x);
  acl.bottomRightCorner(n2, n2) = -solve_spd(lin.mass, lin.input * gains.K_xdot);
  return acl;
}

StabilizerGains synthesize_gains(const LinearizedModel& lin,
                                 const Eigen::MatrixXd& state_weight,
                                 const Eigen::MatrixXd& input_weight,
                                 double margin) {
  const int n2 = static_cast<int>(lin.mass.rows());
  const int m = 2 * n2;
  if (state_weight.rows() != m || state_weight.cols() != m)
    throw ConfigError("state weight must be 4n x 4n");
  if (input_weight.rows() != 3 || input_weight.cols() != 3)
    throw ConfigError("input weight must be 3 x 3");
  if (!(margin > 0.0)) throw ConfigError("stability margin must be positive");

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  A.topRightCorner(n2, n2).setIdentity();
  A.bottomLeftCorner(n2, n2) = -solve_spd(lin.mass, lin.stiffness);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, 3);
  B.bottomRows(n2) = solve_spd(lin.mass, lin.input);

  // zero-order hold over 1 ms via one augmented exponential
  const double dt = 1e-3;
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(m + 3, m + 3);
  aug.topLeftCorner(m, m) = A * dt;
  aug.topRightCorner(m, 3) = B * dt;
  const Eigen::MatrixXd big = aug.exp();
  const Eigen::MatrixXd Ad = big.topLeftCorner(m, m);
  const Eigen::MatrixXd Bd = big.topRightCorner(m, 3);
  const Eigen::MatrixXd Qd = state_weight * dt;
  const Eigen::Matrix3d Rd = input_weight * dt;

  Eigen::MatrixXd P = Qd;
  bool converged = false;
  for (long iter = 0; iter < 2000000; ++iter) {
    const Eigen::MatrixXd PBd = P * Bd;
    const Eigen::Matrix3d S = Rd + Bd.transpose() * PBd;
    const Eigen::MatrixXd K = S.ldlt().solve(PBd.transpose() * Ad);
    Eigen::MatrixXd Pn = Qd + Ad.transpose() * P * (Ad - Bd * K);
    Pn = 0.5 * (Pn + Pn.transpose()).eval();
    const double rel = (Pn - P).norm() / std::max(1.0, P.norm());
    P = Pn;
    if (rel < 1e-13) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NumericalError("Riccati recursion did not reach a fixed point");

  const Eigen::MatrixXd PBd = P * Bd;
  const Eigen::Matrix3d S = Rd + Bd.transpose() * PBd;
  const Eigen::MatrixXd K = S.ldlt().solve(PBd.transpose() * Ad);

  StabilizerGains gains;
  gains.K_x = K.leftCols(n2);
  gains.K_xdot = K.rightCols(n2);

  const Eigen::MatrixXd acl = closed_loop_matrix(lin, gains);
  const Eigen::EigenSolver<Eigen::MatrixXd> eig(acl, false);
  const double max_re = eig.eigenvalues().real().maxCoeff();
  if (!(max_re < -margin)) {
    std::ostringstream msg;
    msg << "synthesized gains miss the stability margin (max Re = " << max_re
        << ", margin " << margin << ")";
    throw NumericalError(msg.str());
  }
  gains.margin = -max_re;
  return gains;
}

StabilizerGains synthesize_gains(const LinearizedModel& lin, double margin) {
  const int m = 2 * static_cast<int>(lin.mass.rows());
  return synthesize_gains(lin, Eigen::MatrixXd::Identity(m, m),
                          Eigen::Matrix3d::Identity(), margin);
}

Vec3 tilt_coordinates(const UnitVector3& q) {
  const Vec3 axis_sin = (-kE3).cross(q.vec());  // |.| = sin(angle), z = 0
  const double s = axis_sin.norm();
  const double c = -q.dot(kE3);
  if (s < 1e-12) {
    if (c > 0.0) return Vec3::Zero();
    throw NumericalError("tilt chart is singular at q = +e3");
  }
  return (std::atan2(s, c) / s) * axis_sin;
}

Vec3 u_stabilize(const SystemParams& params, const ChainState& chain,
                 const StabilizerGains& gains) {
  const int n = params.n();
  if (gains.K_x.cols() != 2 * n || gains.K_xdot.cols() != 2 * n)
    throw ConfigError("stabilizer gains sized for a different chain");
  Eigen::VectorXd xs(2 * n), xds(2 * n);
  for (int i = 0; i < n; ++i) {
    const Vec3 xi = tilt_coordinates(chain.q[i]);
    xs.segment<2>(2 * i) = xi.head<2>();
    xds.segment<2>(2 * i) = chain.omega[i].head<2>();
  }
  return -gains.K_x * xs - gains.K_xdot * xds -
         params.total_mass * params.gravity * kE3;
}

Controller two_phase_controller(const SystemParams& params, const Vec3& x0,
                                const FlexConfig& cfg,
                                const StabilizerGains& gains) {
  cfg.validate();
  if (!(x0.norm() < params.total_length()))
    throw ConfigError("initial quad position outside the reachable ball");
  return [params, x0, cfg, gains](const FullState& state) {
    ControlDecision d;
    if (state.t < cfg.t_switch) {
      d.command =
          StepCommand::direct_thrust(u_track(params, state.chain, state.t, x0, cfg));
      d.log.phase = 1;
      d.log.e_x =
          quad_position(params, state.chain) - reference_yd(state.t, x0, cfg).y;
    } else {
      d.command =
          StepCommand::direct_thrust(u_stabilize(params, state.chain, gains));
      d.log.phase = 2;
      d.log.e_x = quad_position(params, state.chain) - cfg.x_target;
    }
    return d;
  };
}

ChainState hanging_chain_through_point(const SystemParams& params, const Vec3& x0) {
  const int n = params.n();
  const double reach = params.total_length();
  if (!(x0.norm() < reach))
    throw ConfigError("requested endpoint outside the reachable ball");
  if (!(x0.norm() > 1e-9 * reach))
    throw ConfigError("requested endpoint coincides with the pivot");

  // Minimize U(q) = -sum w_i . q_i over the link directions with the closure
  // sum l_i q_i = x0 held fixed, where w_i = g M_gi l_i e3 is the weight each
  // link carries. Descent follows the potential gradient projected onto the
  // constraint tangent space, with the multiplier taken from its own least
  // squares problem; the stationarity measure doubles as the stop test.
  std::vector<Vec3> weight(n);
  for (int i = 0; i < n; ++i)
    weight[i] = params.gravity * params.supported_mass(i) *
                params.link_lengths(i) * kE3;

  auto potential = [&](const std::vector<Vec3>& q) {
    double u = 0.0;
    for (int i = 0; i < n; ++i) u -= weight[i].dot(q[i]);
    return u;
  };

  // Smallest tangent move of every link restoring the closure constraint.
  auto restore_closure = [&](std::vector<Vec3>& q) {
    for (int pass = 0; pass < 60; ++pass) {
      Vec3 defect = -x0;
      for (int i = 0; i < n; ++i) defect += params.link_lengths(i) * q[i];
      if (defect.norm() <= 1e-13 * std::max(1.0, x0.norm())) return true;
      Mat3 metric = Mat3::Zero();
      for (int i = 0; i < n; ++i)
        metric += params.link_lengths(i) * params.link_lengths(i) *
                  (Mat3::Identity() - q[i] * q[i].transpose());
      metric += 1e-12 * std::max(1.0, metric.trace()) * Mat3::Identity();
      const Vec3 shift = metric.ldlt().solve(defect);
      for (int i = 0; i < n; ++i) {
        const Vec3 tangent = shift - q[i].dot(shift) * q[i];
        q[i] = (q[i] - params.link_lengths(i) * tangent).normalized();
      }
    }
    return false;
  };

  auto constrained_gradient = [&](const std::vector<Vec3>& q,
                                  std::vector<Vec3>& grad) {
    Mat3 lhs = Mat3::Zero();
    Vec3 rhs = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
      const double li = params.link_lengths(i);
      const Mat3 proj = Mat3::Identity() - q[i] * q[i].transpose();
      lhs += li * li * proj;
      rhs += li * proj * weight[i];
    }
    lhs += 1e-14 * std::max(1.0, lhs.trace()) * Mat3::Identity();
    const Vec3 mu = lhs.ldlt().solve(rhs);
    double norm_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const Mat3 proj = Mat3::Identity() - q[i] * q[i].transpose();
      grad[i] = proj * (params.link_lengths(i) * mu - weight[i]);
      norm_sq += grad[i].squaredNorm();
    }
    return std::sqrt(norm_sq);
  };

  // Warm start: when every link hangs in tension, q_i is parallel to
  // g M_gi e3 - lambda for a shared end force lambda maximizing the concave
  // dual -sum l_i |g M_gi e3 - lambda| - lambda . x0. Newton ascent lands on
  // the minimizer directly; folded endpoints push lambda into a kink of the
  // dual (a link's force crossing zero) and are left to the descent below.
  const double gbar = params.gravity * params.supported_mass.mean();
  std::vector<Vec3> q(n);
  bool aligned = false;
  {
    auto dual = [&](const Vec3& lambda) {
      double phi = -lambda.dot(x0);
      for (int i = 0; i < n; ++i)
        phi -= params.link_lengths(i) *
               (params.gravity * params.supported_mass(i) * kE3 - lambda)
                   .norm();
      return phi;
    };

    Vec3 lambda = gbar * kE3 - 0.5 * gbar * x0.normalized();
    std::vector<Vec3> dirs(n);
    for (int iter = 0; iter < 200 && !aligned; ++iter) {
      Vec3 res = -x0;
      Mat3 curvature = Mat3::Zero();  // negated dual Hessian, PSD
      bool kink = false;
      for (int i = 0; i < n; ++i) {
        const Vec3 v =
            params.gravity * params.supported_mass(i) * kE3 - lambda;
        const double nv = v.norm();
        if (!(nv > 1e-9 * gbar)) {
          kink = true;
          break;
        }
        dirs[i] = v / nv;
        res += params.link_lengths(i) * dirs[i];
        curvature += params.link_lengths(i) / nv *
                     (Mat3::Identity() - dirs[i] * dirs[i].transpose());
      }
      if (kink) break;
      if (res.norm() <= 1e-12 * std::max(1.0, reach)) {
        aligned = true;
        break;
      }
      curvature += 1e-12 * std::max(1.0, curvature.trace()) * Mat3::Identity();
      Vec3 step = curvature.ldlt().solve(res);
      if (!(step.dot(res) > 0.0)) step = res;

      const double phi0 = dual(lambda);
      const double slope = step.dot(res);
      double tau = 1.0;
      while (dual(lambda + tau * step) < phi0 + 1e-4 * tau * slope &&
             tau > 1e-10)
        tau *= 0.5;
      if (tau <= 1e-10) break;
      lambda += tau * step;
    }
    if (aligned) q = dirs;
  }

  if (!aligned) {
    // Feasible start: lay the links out in the plane of x0 and gravity,
    // folding each so the remaining chain can still close the gap (the
    // reachable gap norms for links i+1..n form the interval [lo, tail]).
    const Vec3 axis = x0.normalized();
    Vec3 lateral = kE3 - kE3.dot(axis) * axis;
    if (lateral.norm() < 1e-9) lateral = Vec3::UnitX() - axis.x() * axis;
    lateral.normalize();
    Vec3 rest = x0;
    for (int i = 0; i < n; ++i) {
      const double li = params.link_lengths(i);
      const double rn = rest.norm();
      if (i == n - 1) {
        q[i] = rn > 1e-12 ? Vec3(rest / rn) : lateral;
        break;
      }
      if (rn < 1e-12) {
        q[i] = lateral;
        rest -= li * q[i];
        continue;
      }
      double tail = 0.0, tail_max = 0.0;
      for (int j = i + 1; j < n; ++j) {
        tail += params.link_lengths(j);
        tail_max = std::max(tail_max, params.link_lengths(j));
      }
      const double lo =
          std::max({0.0, 2.0 * tail_max - tail, std::abs(rn - li)});
      const double hi = std::min(tail, rn + li);
      const double target = 0.5 * (lo + hi);
      const double cosine = std::clamp(
          (rn * rn + li * li - target * target) / (2.0 * rn * li), -1.0, 1.0);
      const Vec3 rhat = rest / rn;
      Vec3 perp = lateral - lateral.dot(rhat) * rhat;
      if (perp.norm() < 1e-9) perp = axis - axis.dot(rhat) * rhat;
      perp.normalize();
      q[i] = cosine * rhat +
             std::sqrt(std::max(0.0, 1.0 - cosine * cosine)) * perp;
      rest -= li * q[i];
    }
  }
  if (!restore_closure(q))
    throw NumericalError("hanging chain has no feasible configuration");

  std::vector<Vec3> grad(n), trial(n);
  double value = potential(q);
  double step = 0.02;
  bool stationary = false;
  for (int iter = 0; iter < 100000 && !stationary; ++iter) {
    const double gnorm = constrained_gradient(q, grad);
    if (gnorm <= 1e-10) {
      stationary = true;
      break;
    }
    bool accepted = false;
    while (step > 1e-16) {
      for (int i = 0; i < n; ++i)
        trial[i] = (q[i] - step * grad[i]).normalized();
      if (restore_closure(trial)) {
        const double trial_value = potential(trial);
        if (trial_value <= value - 1e-4 * step * gnorm * gnorm) {
          q = trial;
          value = trial_value;
          accepted = true;
          step = std::min(step * 1.3, 0.5);
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  if (!stationary)
    throw NumericalError("hanging chain solve did not converge");

  ChainState chain;
  for (int i = 0; i < n; ++i) {
    chain.q.push_back(UnitVector3::normalized(q[i]));
    chain.omega.push_back(Vec3::Zero());
  }
  return chain;
}

}  // namespace tethersim
