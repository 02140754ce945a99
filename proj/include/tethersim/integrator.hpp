#pragma once

#include <functional>

#include "tethersim/model.hpp"
#include "tethersim/trajectory.hpp"

namespace tethersim {

struct IntegratorConfig {
  enum class Scheme { rk4_manifold, euler_manifold };

  double h = 1e-3;            // step, must satisfy 0 < h <= 0.01
  Scheme scheme = Scheme::rk4_manifold;
  int renormalize_every = 1;  // cadence of the unit/tangency/orthonormal sweep
  double omega_limit = 1e3;   // per-link rate bound; beyond this the run aborts
};

// One step's actuation. Full-model commands hold (f, moment) fixed across the
// step while the inertial thrust -f R e3 follows the stage attitude; direct
// commands apply u as given and leave the body state untouched.
struct StepCommand {
  static StepCommand thrust_moment(const ControlInput& input) {
    StepCommand c;
    c.input = input;
    return c;
  }
  static StepCommand direct_thrust(const Vec3& u) {
    StepCommand c;
    c.direct = true;
    c.u = u;
    return c;
  }

  bool direct = false;
  ControlInput input;
  Vec3 u = Vec3::Zero();
};

struct ControlDecision {
  StepCommand command;
  ControlLog log;
};

using Controller = std::function<ControlDecision(const FullState&)>;

// Advance one step. Configurations move by exponential maps driven by local
// rotation-vector coordinates, velocities by the RK tableau (order 4 overall
// for the rk4_manifold scheme); unit norm, tangency and R orthonormality are
// re-enforced every renormalize_every steps.
FullState step(const SystemParams& params, const FullState& state,
               const StepCommand& command, const IntegratorConfig& cfg);

// Closed-loop rollout. The controller runs once per step on the pre-step
// state; its command is held for the step. Samples are stored every
// store_every steps plus the final state. Aborts with a timestamped error on
// NaN or rate divergence.
Trajectory simulate(const SystemParams& params, const FullState& initial,
                    const Controller& controller, double duration,
                    const IntegratorConfig& cfg, int store_every = 1);

// Unforced rollout (zero thrust, zero moment).
Trajectory simulate_free(const SystemParams& params, const FullState& initial,
                         double duration, const IntegratorConfig& cfg,
                         int store_every = 1);

}  // namespace tethersim
