#include "tethersim/taut_control.hpp"

#include <cmath>
#include <memory>
#include <sstream>
#include <utility>

#include "tethersim/errors.hpp"

namespace tethersim {

namespace {

constexpr double kThrustFloor = 1e-6;

// q-hat squared applied to v: q (q.v) - v.
Vec3 hat2(const Vec3& q, const Vec3& v) { return q * q.dot(v) - v; }

struct ReducedCoeffs {
  double alpha;  // gravity torque scale
  double beta;   // thrust torque scale
};

// Single-link rates follow omega_dot = alpha hat(q) e3 + beta hat(q) u.
ReducedCoeffs reduced_coeffs(const SystemParams& single) {
  const double l = single.link_lengths(0);
  const double m11 = single.link_inertia(0, 0);
  return {single.supported_mass(0) * l * single.gravity / m11, l / m11};
}

}  // namespace

void TautGains::validate() const {
  if (!(k_q > 0.0) || !(k_omega > 0.0) || !(k_R > 0.0) || !(k_Omega > 0.0))
    throw ConfigError("taut gains must be positive");
  if (!(eps > 0.0)) throw ConfigError("attitude scale eps must be positive");
  if (!(c_q > 0.0)) throw ConfigError("cross weight c_q must be positive");
  if (!(psi_bound > 0.0) || !(psi_bound < 2.0))
    throw ConfigError("psi_bound must lie in (0, 2)");

  // Certificate matrices for the direction loop; all three must be PD.
  const double w_det =
      c_q * k_q * (k_omega - c_q) - 0.25 * c_q * c_q * k_omega * k_omega;
  if (!(k_omega > c_q) || !(w_det > 0.0))
    throw ConfigError("rate matrix W_q is not positive definite");
  if (!(k_q - c_q * c_q > 0.0))
    throw ConfigError("lower Lyapunov bound is not positive definite");
  if (!(2.0 * k_q / (2.0 - psi_bound) - c_q * c_q > 0.0))
    throw ConfigError("upper Lyapunov bound is not positive definite");
}

TautReference figure_eight_reference(double T_d) {
  return [T_d](double t) {
    const double a_th = M_PI / 6.0, w_th = 0.2 * M_PI;
    const double a_ph = M_PI / 18.0, w_ph = 0.4 * M_PI;
    const double th = a_th * std::sin(w_th * t);
    const double ph = a_ph * std::sin(w_ph * t) + 0.5 * M_PI;
    const double thd = a_th * w_th * std::cos(w_th * t);
    const double phd = a_ph * w_ph * std::cos(w_ph * t);
    const double thdd = -a_th * w_th * w_th * std::sin(w_th * t);
    const double phdd = -a_ph * w_ph * w_ph * std::sin(w_ph * t);

    const double ct = std::cos(th), st = std::sin(th);
    const double cp = std::cos(ph), sp = std::sin(ph);
    const Vec3 q(ct * cp, st, -ct * sp);
    const Vec3 d_th(-st * cp, ct, st * sp);
    const Vec3 d_ph(-ct * sp, 0.0, -ct * cp);
    const Vec3 d_thth = -q;
    const Vec3 d_phph(-ct * cp, 0.0, ct * sp);
    const Vec3 d_thph(st * sp, 0.0, st * cp);

    const Vec3 qd = d_th * thd + d_ph * phd;
    const Vec3 qdd = d_th * thdd + d_ph * phdd + d_thth * thd * thd +
                     2.0 * d_thph * thd * phd + d_phph * phd * phd;

    ReferenceSample ref;
    ref.q_d = q;
    ref.omega_d = q.cross(qd);
    ref.omega_dot_d = q.cross(qdd);
    ref.T_d = T_d;
    return ref;
  };
}

TautReference constant_reference(const Vec3& q_d, double T_d) {
  const Vec3 q = UnitVector3::normalized(q_d).vec();
  return [q, T_d](double) {
    ReferenceSample ref;
    ref.q_d = q;
    ref.T_d = T_d;
    return ref;
  };
}

TautErrors direction_errors(const UnitVector3& q, const Vec3& omega,
                            const ReferenceSample& ref) {
  TautErrors err;
  err.e_q = ref.q_d.cross(q.vec());
  err.e_omega = omega + hat2(q.vec(), ref.omega_d);
  err.psi = 1.0 - q.dot(ref.q_d);
  return err;
}

Vec3 u_parallel(const SystemParams& single, const UnitVector3& q,
                const Vec3& omega, double T_d) {
  const double m = single.quad_mass;
  const double l = single.link_lengths(0);
  const double s =
      T_d - m * single.gravity * q.dot(Vec3::UnitZ()) - m * l * omega.squaredNorm();
  return s * q.vec();
}

Vec3 u_perp(const SystemParams& single, const UnitVector3& q, const Vec3& omega,
            const ReferenceSample& ref, const TautGains& gains) {
  const ReducedCoeffs c = reduced_coeffs(single);
  const TautErrors err = direction_errors(q, omega, ref);
  const Vec3 qv = q.vec();
  const Vec3 qdot = omega.cross(qv);
  const Vec3 braced = -gains.k_q * err.e_q - gains.k_omega * err.e_omega -
                      qv.dot(ref.omega_d) * qdot - hat2(qv, ref.omega_dot_d) -
                      c.alpha * qv.cross(Vec3::UnitZ());
  return -(1.0 / c.beta) * qv.cross(braced);
}

Vec3 u_total(const SystemParams& single, const UnitVector3& q, const Vec3& omega,
             const ReferenceSample& ref, const TautGains& gains) {
  return u_parallel(single, q, omega, ref.T_d) +
         u_perp(single, q, omega, ref, gains);
}

Mat3 attitude_from_thrust(const Vec3& u, const Vec3& b1_d) {
  const double nu = u.norm();
  if (!(nu >= kThrustFloor))
    throw NumericalError("commanded thrust below 1e-6; attitude undefined");
  const Vec3 b3 = -u / nu;
  const Vec3 c1 = b1_d - b3 * b3.dot(b1_d);  // -hat(b3)^2 b1_d
  const double n1 = c1.norm();
  if (!(n1 >= 1e-8))
    throw NumericalError("b1_d is parallel to the commanded thrust");
  Mat3 R;
  R.col(0) = c1 / n1;
  R.col(1) = b3.cross(b1_d) / n1;
  R.col(2) = b3;
  return R;
}

AttitudeSetpointFilter::AttitudeSetpointFilter(double h) : h_(h) {
  if (!(h > 0.0)) throw ConfigError("setpoint filter step must be positive");
}

AttitudeSetpoint AttitudeSetpointFilter::update(const Vec3& u, const Vec3& b1_d) {
  const Mat3 now = attitude_from_thrust(u, b1_d);
  AttitudeSetpoint sp;
  if (count_ == 0) {
    sp.R_c = now;
    prev1_ = prev2_ = now;
  } else if (count_ == 1) {
    sp.R_c = now;
    sp.Omega_c = log_so3(prev1_.transpose() * now) / h_;
    prev2_ = prev1_;
    prev1_ = now;
  } else {
    const Vec3 fwd = log_so3(prev1_.transpose() * now) / h_;
    const Vec3 bwd = log_so3(prev2_.transpose() * prev1_) / h_;
    sp.R_c = prev1_;
    sp.Omega_c = log_so3(prev2_.transpose() * now) / (2.0 * h_);
    sp.Omega_dot_c = (fwd - bwd) / h_;
    prev2_ = prev1_;
    prev1_ = now;
  }
  ++count_;
  return sp;
}

AttitudeErrors attitude_errors(const BodyState& body, const AttitudeSetpoint& sp) {
  AttitudeErrors err;
  err.e_R =
      0.5 * vee(sp.R_c.transpose() * body.R - body.R.transpose() * sp.R_c);
  err.e_Omega = body.Omega - body.R.transpose() * sp.R_c * sp.Omega_c;
  return err;
}

ControlInput thrust_moment(const SystemParams& params, const BodyState& body,
                           const Vec3& u, const AttitudeSetpoint& sp,
                           const TautGains& gains) {
  const AttitudeErrors err = attitude_errors(body, sp);
  const Mat3& J = params.inertia;
  const Mat3 Rd = body.R.transpose() * sp.R_c;
  ControlInput input;
  input.f = -u.dot(body.R.col(2));
  input.moment = -(gains.k_R / (gains.eps * gains.eps)) * err.e_R -
                 (gains.k_Omega / gains.eps) * err.e_Omega +
                 body.Omega.cross(J * body.Omega) -
                 J * (hat(body.Omega) * Rd * sp.Omega_c - Rd * sp.Omega_dot_c);
  return input;
}

TangentVector taut_direction(const SystemParams& params, const ChainState& chain) {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  for (int i = 0; i < chain.n(); ++i) {
    x += params.link_lengths(i) * chain.q[i].vec();
    v += params.link_lengths(i) * chain.omega[i].cross(chain.q[i].vec());
  }
  const double r = x.norm();
  if (!(r >= 1e-9 * params.total_length()))
    throw NumericalError("chain collapsed onto the pivot; chord undefined");
  const UnitVector3 q = UnitVector3::normalized(x);
  const Vec3 qdot = project_tangent(q, v) / r;
  return TangentVector::projected(q, q.vec().cross(qdot));
}

LyapunovSample lyapunov_rate(const SystemParams& single, const UnitVector3& q,
                             const Vec3& omega, const Vec3& u,
                             const ReferenceSample& ref, const TautGains& gains) {
  const ReducedCoeffs c = reduced_coeffs(single);
  const TautErrors err = direction_errors(q, omega, ref);
  const Vec3 qv = q.vec();
  const Vec3 qdot = omega.cross(qv);
  const Vec3 qd_dot = ref.omega_d.cross(ref.q_d);

  const Vec3 omega_dot =
      c.alpha * qv.cross(Vec3::UnitZ()) + c.beta * qv.cross(u);
  const Vec3 e_q_dot = qd_dot.cross(qv) + ref.q_d.cross(qdot);
  const Vec3 e_omega_dot = omega_dot + qv * qdot.dot(ref.omega_d) +
                           qdot * qv.dot(ref.omega_d) +
                           hat2(qv, ref.omega_dot_d);
  const double psi_dot = -qdot.dot(ref.q_d) - qv.dot(qd_dot);

  LyapunovSample out;
  out.value = 0.5 * err.e_omega.squaredNorm() + gains.c_q * err.e_omega.dot(err.e_q) +
              gains.k_q * err.psi;
  out.rate = err.e_omega.dot(e_omega_dot) +
             gains.c_q * (e_omega_dot.dot(err.e_q) + err.e_omega.dot(e_q_dot)) +
             gains.k_q * psi_dot;
  const double zq = err.e_q.norm();
  const double zw = err.e_omega.norm();
  out.bound = -(gains.c_q * gains.k_q * zq * zq -
                gains.c_q * gains.k_omega * zq * zw +
                (gains.k_omega - gains.c_q) * zw * zw);
  return out;
}

Controller make_taut_controller(const SystemParams& params, TautReference ref,
                                const TautGains& gains, double h,
                                bool simplified) {
  gains.validate();
  const SystemParams reduced =
      params.n() == 1 ? params : aggregate_single_link(params);
  auto filter = std::make_shared<AttitudeSetpointFilter>(h);
  return [params, reduced, ref = std::move(ref), gains, filter,
          simplified](const FullState& state) {
    const ReferenceSample r = ref(state.t);
    const TangentVector chord =
        params.n() == 1
            ? TangentVector::projected(state.chain.q[0], state.chain.omega[0])
            : taut_direction(params, state.chain);
    const TautErrors err = direction_errors(chord.base(), chord.vec(), r);
    if (err.psi >= gains.psi_bound) {
      std::ostringstream msg;
      msg << "link direction left the controller domain (psi = " << err.psi
          << ")";
      throw NumericalError(msg.str());
    }
    const Vec3 u = u_total(reduced, chord.base(), chord.vec(), r, gains);

    ControlDecision decision;
    decision.log.e_q = err.e_q;
    decision.log.e_omega = err.e_omega;
    decision.log.phase = 1;
    if (simplified) {
      decision.command = StepCommand::direct_thrust(u);
    } else {
      const AttitudeSetpoint sp = filter->update(u, r.b1_d);
      const AttitudeErrors ae = attitude_errors(state.body, sp);
      decision.log.e_R = ae.e_R;
      decision.log.e_Omega = ae.e_Omega;
      decision.command =
          StepCommand::thrust_moment(thrust_moment(params, state.body, u, sp, gains));
    }
    return decision;
  };
}

}  // namespace tethersim
