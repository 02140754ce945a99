#include "tethersim/integrator.hpp"

#include <cmath>
#include <string>

#include "tethersim/errors.hpp"

namespace tethersim {

namespace {

void check_config(const IntegratorConfig& cfg) {
  if (!(cfg.h > 0.0) || cfg.h > 0.01) {
    throw ConfigError("integrator: step h = " + std::to_string(cfg.h) +
                      " outside (0, 0.01]");
  }
  if (cfg.renormalize_every < 1) {
    throw ConfigError("integrator: renormalize_every must be >= 1");
  }
}

// Truncated inverse differential of exp on so(3); the double-commutator term
// is enough for a fourth-order scheme since |a| = O(h).
Vec3 dexpinv(const Vec3& a, const Vec3& w) {
  return w - 0.5 * a.cross(w) + (1.0 / 12.0) * a.cross(a.cross(w));
}

struct StageRates {
  std::vector<Vec3> sigma_dot;  // local coordinates of each q_i
  std::vector<Vec3> omega_dot;
  Vec3 phi_dot = Vec3::Zero();  // local coordinates of R
  Vec3 Omega_dot = Vec3::Zero();
};

struct StageValues {
  std::vector<Vec3> sigma;
  std::vector<Vec3> omega;
  Vec3 phi = Vec3::Zero();
  Vec3 Omega = Vec3::Zero();
};

StageRates eval_rates(const SystemParams& params, const FullState& base,
                      const StepCommand& command, const StageValues& s) {
  const int n = base.chain.n();
  ChainState chain;
  chain.q.reserve(n);
  chain.omega = s.omega;
  for (int i = 0; i < n; ++i) {
    chain.q.push_back(
        UnitVector3::normalized(exp_so3(s.sigma[i]) * base.chain.q[i].vec()));
  }

  Vec3 u;
  Mat3 R = base.body.R;
  if (command.direct) {
    u = command.u;
  } else {
    R = base.body.R * exp_so3(s.phi);
    u = -command.input.f * R.col(2);
  }

  StageRates r;
  r.omega_dot = link_accelerations(params, chain, u);
  r.sigma_dot.resize(n);
  for (int i = 0; i < n; ++i) r.sigma_dot[i] = dexpinv(s.sigma[i], s.omega[i]);
  if (!command.direct) {
    r.phi_dot = dexpinv(-s.phi, s.Omega);
    BodyState body{R, s.Omega};
    r.Omega_dot = attitude_dynamics(params, body, command.input.moment);
  }
  return r;
}

StageValues advance(const FullState& base, const StageRates& k, double tau) {
  const int n = base.chain.n();
  StageValues s;
  s.sigma.resize(n);
  s.omega.resize(n);
  for (int i = 0; i < n; ++i) {
    s.sigma[i] = tau * k.sigma_dot[i];
    s.omega[i] = base.chain.omega[i] + tau * k.omega_dot[i];
  }
  s.phi = tau * k.phi_dot;
  s.Omega = base.body.Omega + tau * k.Omega_dot;
  return s;
}

FullState apply(const SystemParams&, const FullState& base,
                const StageValues& final, bool direct) {
  const int n = base.chain.n();
  FullState next;
  next.chain.q.reserve(n);
  next.chain.omega = final.omega;
  for (int i = 0; i < n; ++i) {
    next.chain.q.push_back(
        UnitVector3::normalized(exp_so3(final.sigma[i]) * base.chain.q[i].vec()));
  }
  if (direct) {
    next.body = base.body;
  } else {
    next.body.R = base.body.R * exp_so3(final.phi);
    next.body.Omega = final.Omega;
  }
  return next;
}

FullState step_rk4(const SystemParams& params, const FullState& state,
                   const StepCommand& command, double h) {
  const int n = state.chain.n();
  StageValues s0;
  s0.sigma.assign(n, Vec3::Zero());
  s0.omega = state.chain.omega;
  s0.Omega = state.body.Omega;

  const StageRates k1 = eval_rates(params, state, command, s0);
  const StageRates k2 = eval_rates(params, state, command, advance(state, k1, h / 2));
  const StageRates k3 = eval_rates(params, state, command, advance(state, k2, h / 2));
  const StageRates k4 = eval_rates(params, state, command, advance(state, k3, h));

  StageValues f;
  f.sigma.resize(n);
  f.omega.resize(n);
  for (int i = 0; i < n; ++i) {
    f.sigma[i] = h / 6.0 * (k1.sigma_dot[i] + 2 * k2.sigma_dot[i] +
                            2 * k3.sigma_dot[i] + k4.sigma_dot[i]);
    f.omega[i] = state.chain.omega[i] +
                 h / 6.0 * (k1.omega_dot[i] + 2 * k2.omega_dot[i] +
                            2 * k3.omega_dot[i] + k4.omega_dot[i]);
  }
  f.phi = h / 6.0 * (k1.phi_dot + 2 * k2.phi_dot + 2 * k3.phi_dot + k4.phi_dot);
  f.Omega = state.body.Omega + h / 6.0 * (k1.Omega_dot + 2 * k2.Omega_dot +
                                          2 * k3.Omega_dot + k4.Omega_dot);
  return apply(params, state, f, command.direct);
}

FullState step_euler(const SystemParams& params, const FullState& state,
                     const StepCommand& command, double h) {
  const int n = state.chain.n();
  StageValues s0;
  s0.sigma.assign(n, Vec3::Zero());
  s0.omega = state.chain.omega;
  s0.Omega = state.body.Omega;
  const StageRates k = eval_rates(params, state, command, s0);
  return apply(params, state, advance(state, k, h), command.direct);
}

void renormalize(FullState& s) {
  for (int i = 0; i < s.chain.n(); ++i) {
    s.chain.q[i] = UnitVector3::normalized(s.chain.q[i].vec());
    s.chain.omega[i] = project_tangent(s.chain.q[i], s.chain.omega[i]);
  }
  s.body.R = RotationMatrix::orthonormalized(s.body.R).mat();
}

void check_divergence(const FullState& s, double omega_limit) {
  for (int i = 0; i < s.chain.n(); ++i) {
    const double w = s.chain.omega[i].norm();
    if (!std::isfinite(w) || w > omega_limit || !s.chain.q[i].vec().allFinite()) {
      throw NumericalError("integration diverged at t = " + std::to_string(s.t) +
                           ": |omega[" + std::to_string(i) + "]| = " +
                           std::to_string(w));
    }
  }
  if (!s.body.Omega.allFinite() || !s.body.R.allFinite()) {
    throw NumericalError("integration diverged at t = " + std::to_string(s.t) +
                         ": body state not finite");
  }
}

TrajectorySample make_sample(const SystemParams& params, const FullState& s,
                             const StepCommand& cmd, const ControlLog& log) {
  TrajectorySample row;
  row.t = s.t;
  row.q.reserve(s.chain.n());
  for (const auto& q : s.chain.q) row.q.push_back(q.vec());
  row.omega = s.chain.omega;
  row.R = s.body.R;
  row.Omega = s.body.Omega;
  if (cmd.direct) {
    row.u = cmd.u;
    row.f = 0.0;
  } else {
    row.f = cmd.input.f;
    row.moment = cmd.input.moment;
    row.u = thrust_vector(cmd.input, s.body);
  }
  if (params.n() == 1) {
    row.tension = tension(params, s.chain.q[0], s.chain.omega[0], row.u);
  }
  row.log = log;
  return row;
}

}  // namespace

FullState step(const SystemParams& params, const FullState& state,
               const StepCommand& command, const IntegratorConfig& cfg) {
  check_config(cfg);
  FullState next = cfg.scheme == IntegratorConfig::Scheme::rk4_manifold
                       ? step_rk4(params, state, command, cfg.h)
                       : step_euler(params, state, command, cfg.h);
  next.t = state.t + cfg.h;
  return next;
}

Trajectory simulate(const SystemParams& params, const FullState& initial,
                    const Controller& controller, double duration,
                    const IntegratorConfig& cfg, int store_every) {
  check_config(cfg);
  if (!(duration > 0.0)) throw ConfigError("simulate: duration must be positive");
  if (store_every < 1) throw ConfigError("simulate: store_every must be >= 1");
  initial.chain.validate();
  initial.body.validate();
  if (initial.chain.n() != params.n()) {
    throw ConfigError("simulate: state has " + std::to_string(initial.chain.n()) +
                      " links, params " + std::to_string(params.n()));
  }

  const long steps = std::llround(duration / cfg.h);
  if (steps < 1 || std::abs(steps * cfg.h - duration) > 1e-9) {
    throw ConfigError("simulate: duration is not an integer number of steps");
  }

  Trajectory traj;
  traj.n = params.n();
  traj.dt = cfg.h * store_every;
  traj.samples.reserve(static_cast<size_t>(steps / store_every) + 2);

  FullState state = initial;
  state.t = 0.0;

  auto decide = [&](const FullState& s) -> ControlDecision {
    try {
      return controller(s);
    } catch (const std::exception& e) {
      throw NumericalError("controller failed at t = " + std::to_string(s.t) +
                           ": " + e.what());
    }
  };

  for (long k = 0; k < steps; ++k) {
    const ControlDecision d = decide(state);
    if (k % store_every == 0) {
      traj.samples.push_back(make_sample(params, state, d.command, d.log));
    }
    const FullState scratch = cfg.scheme == IntegratorConfig::Scheme::rk4_manifold
                                  ? step_rk4(params, state, d.command, cfg.h)
                                  : step_euler(params, state, d.command, cfg.h);
    state = scratch;
    state.t = (k + 1) * cfg.h;
    if ((k + 1) % cfg.renormalize_every == 0) renormalize(state);
    check_divergence(state, cfg.omega_limit);
  }

  if (steps % store_every == 0) {
    const ControlDecision d = decide(state);
    traj.samples.push_back(make_sample(params, state, d.command, d.log));
  }
  return traj;
}

Trajectory simulate_free(const SystemParams& params, const FullState& initial,
                         double duration, const IntegratorConfig& cfg,
                         int store_every) {
  Controller zero = [](const FullState&) {
    ControlDecision d;
    d.command = StepCommand::thrust_moment(ControlInput{});
    return d;
  };
  return simulate(params, initial, zero, duration, cfg, store_every);
}

}  // namespace tethersim
