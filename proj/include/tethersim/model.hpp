#pragma once

#include <vector>

#include "tethersim/manifold.hpp"

// Dynamics of a quadrotor tethered to a fixed point through a chain of n
// serially linked rigid rods. Link directions q_i point from joint i-1 toward
// joint i; e3 points down, so a chain hanging straight below the pivot has
// q_i = e3 and the taut hover configuration has q_i = -e3.

namespace tethersim {

struct SystemParams {
  double quad_mass = 0.0;
  Mat3 inertia = Mat3::Zero();      // quadrotor body inertia, SPD
  Eigen::VectorXd link_masses;      // per-rod mass, uniform density
  Eigen::VectorXd link_lengths;
  double gravity = 9.81;

  // filled by make_params
  Eigen::MatrixXd link_inertia;     // n x n pair coefficients
  Eigen::VectorXd supported_mass;   // mass whose weight loads link i
  double total_mass = 0.0;

  int n() const { return static_cast<int>(link_lengths.size()); }
  double total_length() const { return link_lengths.sum(); }
};

// Validates (positive masses/lengths, SPD inertia, matching sizes, g > 0) and
// precomputes the derived coefficients.
SystemParams make_params(double quad_mass, const Mat3& inertia,
                         const Eigen::VectorXd& link_masses,
                         const Eigen::VectorXd& link_lengths,
                         double gravity = 9.81);

// Collapses the tether into one rod of the summed mass and length; this is
// the internal model used when the single-link controller drives a chain.
SystemParams aggregate_single_link(const SystemParams& params);

struct InertiaCoefficients {
  Eigen::MatrixXd link_inertia;
  Eigen::VectorXd supported_mass;
  double total_mass;
};

InertiaCoefficients inertia_coefficients(const SystemParams& params);

struct ChainState {
  std::vector<UnitVector3> q;   // directions
  std::vector<Vec3> omega;      // angular velocities, tangent at q

  int n() const { return static_cast<int>(q.size()); }
  void validate() const;        // |q_i| = 1 within 1e-10, |q_i.omega_i| < 1e-10
};

struct BodyState {
  Mat3 R = Mat3::Identity();    // body-to-inertial
  Vec3 Omega = Vec3::Zero();    // body rates

  void validate() const;
};

struct FullState {
  ChainState chain;
  BodyState body;
  double t = 0.0;
};

struct ControlInput {
  double f = 0.0;               // thrust magnitude along -R e3
  Vec3 moment = Vec3::Zero();   // body-frame moment
};

// Inertial thrust force u = -f R e3.
Vec3 thrust_vector(const ControlInput& input, const BodyState& body);

// Joint positions x_1 .. x_n (x_n is the quadrotor position).
std::vector<Vec3> positions(const SystemParams& params, const ChainState& chain);

Vec3 quad_position(const SystemParams& params, const ChainState& chain);
Vec3 quad_velocity(const SystemParams& params, const ChainState& chain);

// Configuration-dependent 3n x 3n inertia operator: diagonal blocks M_ii I,
// off-diagonal blocks -hat(q_i)^2 M_ij. Invertible for every valid chain.
Eigen::MatrixXd mass_matrix(const SystemParams& params, const ChainState& chain);

// Angular accelerations of all links under inertial thrust force u at the
// quadrotor. Solves the coupled system; the result is tangent at each q_i.
std::vector<Vec3> link_accelerations(const SystemParams& params,
                                     const ChainState& chain, const Vec3& u);

// Body rate derivative from J Omega_dot + Omega x J Omega = moment.
Vec3 attitude_dynamics(const SystemParams& params, const BodyState& body,
                       const Vec3& moment);

// Rod tension at the pivot for the single-link model (n == 1). Negative
// values mean compression.
double tension(const SystemParams& params, const UnitVector3& q,
               const Vec3& omega, const Vec3& u);

// Quadrotor acceleration split xdd = -drift - input_map * u. input_map has
// null direction q when all links are parallel to q (taut chain).
struct QuadAccel {
  Vec3 drift;
  Mat3 input_map;
};

QuadAccel quad_accel_decomposition(const SystemParams& params,
                                   const ChainState& chain);

struct Energies {
  double kinetic = 0.0;
  double potential = 0.0;
  double total() const { return kinetic + potential; }
};

Energies energies(const SystemParams& params, const ChainState& chain,
                  const BodyState& body);

}  // namespace tethersim
