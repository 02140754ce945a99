#pragma once

#include <functional>

#include "tethersim/integrator.hpp"
#include "tethersim/model.hpp"

// Tracking control of the taut tether: a geometric direction/tension
// controller for the single-link model plus the attitude loop that realizes
// the commanded thrust vector on the full quadrotor dynamics. For multi-link
// chains the same law acts on the pivot-to-quad chord direction.

namespace tethersim {

struct TautGains {
  double k_q = 9.0;
  double k_omega = 6.0;
  double k_R = 8.0;
  double k_Omega = 2.0;
  double eps = 0.1;        // attitude time-scale separation
  double c_q = 0.5;        // Lyapunov cross-term weight
  double psi_bound = 1.9;  // operating domain: 1 - q.q_d < psi_bound

  // Positivity plus positive-definiteness of the certificate matrices the
  // defaults were chosen for; throws ConfigError.
  void validate() const;
};

struct ReferenceSample {
  Vec3 q_d = -Vec3::UnitZ();
  Vec3 omega_d = Vec3::Zero();
  Vec3 omega_dot_d = Vec3::Zero();
  double T_d = 0.0;
  Vec3 b1_d = Vec3::UnitX();
};

using TautReference = std::function<ReferenceSample(double)>;

// Lissajous sweep of the link direction used by the tracking scenarios;
// starts at -e3 and stays in the upper cone.
TautReference figure_eight_reference(double T_d);

TautReference constant_reference(const Vec3& q_d, double T_d);

struct TautErrors {
  Vec3 e_q = Vec3::Zero();
  Vec3 e_omega = Vec3::Zero();
  double psi = 0.0;  // 1 - q.q_d
};

TautErrors direction_errors(const UnitVector3& q, const Vec3& omega,
                            const ReferenceSample& ref);

// Tension component along the link: makes tension() equal T_d exactly.
Vec3 u_parallel(const SystemParams& single, const UnitVector3& q,
                const Vec3& omega, double T_d);

// Transverse component steering the link direction toward the reference.
Vec3 u_perp(const SystemParams& single, const UnitVector3& q, const Vec3& omega,
            const ReferenceSample& ref, const TautGains& gains);

Vec3 u_total(const SystemParams& single, const UnitVector3& q, const Vec3& omega,
             const ReferenceSample& ref, const TautGains& gains);

struct AttitudeSetpoint {
  Mat3 R_c = Mat3::Identity();
  Vec3 Omega_c = Vec3::Zero();
  Vec3 Omega_dot_c = Vec3::Zero();
};

// Attitude whose third body axis carries the commanded thrust, first axis
// steered toward b1_d. Throws on |u| < 1e-6 or b1_d parallel to the thrust.
Mat3 attitude_from_thrust(const Vec3& u, const Vec3& b1_d);

// Produces setpoints with Omega_c, Omega_dot_c from central log-map
// differences of the commanded attitude over +-h. Central differencing of a
// feedback-dependent reference needs one step of future, so the emitted
// setpoint is the one centered at t - h; the first two calls fall back to a
// static and a one-sided estimate. Holds per-run state: one instance per
// simulation loop.
class AttitudeSetpointFilter {
 public:
  explicit AttitudeSetpointFilter(double h);
  AttitudeSetpoint update(const Vec3& u, const Vec3& b1_d);

 private:
  double h_;
  long count_ = 0;
  Mat3 prev1_ = Mat3::Identity();  // R_c one call back
  Mat3 prev2_ = Mat3::Identity();  // R_c two calls back
};

struct AttitudeErrors {
  Vec3 e_R = Vec3::Zero();
  Vec3 e_Omega = Vec3::Zero();
};

AttitudeErrors attitude_errors(const BodyState& body, const AttitudeSetpoint& sp);

// Thrust magnitude and body moment tracking the setpoint: f = -u . R e3,
// moment with gains k_R/eps^2, k_Omega/eps plus the gyroscopic feedforward.
ControlInput thrust_moment(const SystemParams& params, const BodyState& body,
                           const Vec3& u, const AttitudeSetpoint& sp,
                           const TautGains& gains);

// Chord direction and its angular velocity for a (possibly slack) chain.
TangentVector taut_direction(const SystemParams& params, const ChainState& chain);

// V_q = |e_omega|^2/2 + c_q e_omega.e_q + k_q (1 - q.q_d) evaluated with the
// model acceleration under the applied thrust u, plus the certificate bound
// -z^T W_q z it must stay under.
struct LyapunovSample {
  double value = 0.0;
  double rate = 0.0;
  double bound = 0.0;  // -z^T W_q z
};

LyapunovSample lyapunov_rate(const SystemParams& single, const UnitVector3& q,
                             const Vec3& omega, const Vec3& u,
                             const ReferenceSample& ref, const TautGains& gains);

// Closed-loop controller for simulate(). simplified=true applies the thrust
// vector directly (no attitude dynamics); otherwise the full (f, M) pipeline
// runs. Multi-link params are collapsed onto the chord internally.
Controller make_taut_controller(const SystemParams& params, TautReference ref,
                                const TautGains& gains, double h,
                                bool simplified);

}  // namespace tethersim
