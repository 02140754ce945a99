#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tethersim/errors.hpp"
#include "tethersim/integrator.hpp"
#include "test_helpers.hpp"

using namespace tethersim;

namespace {

const Vec3 e2 = Vec3::UnitY();
const Vec3 e3 = Vec3::UnitZ();

SystemParams uniform_params(int n) {
  return make_params(0.755, Vec3(0.0043, 0.0043, 0.0103).asDiagonal(),
                     Eigen::VectorXd::Constant(n, 0.3 / n),
                     Eigen::VectorXd::Constant(n, 5.0 / n));
}

FullState tilted_state(int n) {
  FullState s;
  for (int i = 0; i < n; ++i) {
    const double ang = 0.4 + 0.25 * i;
    s.chain.q.push_back(UnitVector3(exp_so3(ang * e2) * e3));
    s.chain.omega.push_back(Vec3::Zero());
  }
  s.body.Omega = Vec3(0.1, -0.2, 0.3);
  return s;
}

double state_distance(const FullState& a, const FullState& b) {
  double d = 0.0;
  for (int i = 0; i < a.chain.n(); ++i) {
    d += (a.chain.q[i].vec() - b.chain.q[i].vec()).squaredNorm();
    d += (a.chain.omega[i] - b.chain.omega[i]).squaredNorm();
  }
  d += (a.body.R - b.body.R).squaredNorm();
  d += (a.body.Omega - b.body.Omega).squaredNorm();
  return std::sqrt(d);
}

FullState roll(const SystemParams& p, FullState s, const StepCommand& cmd,
               const IntegratorConfig& cfg, double duration) {
  const long steps = std::llround(duration / cfg.h);
  for (long k = 0; k < steps; ++k) s = step(p, s, cmd, cfg);
  return s;
}

}  // namespace

TEST_CASE("config limits are enforced") {
  const SystemParams p = uniform_params(1);
  const FullState s = tilted_state(1);
  IntegratorConfig cfg;
  cfg.h = 0.02;
  CHECK_THROWS_AS(step(p, s, StepCommand::direct_thrust(Vec3::Zero()), cfg),
                  ConfigError);
  cfg.h = -1e-3;
  CHECK_THROWS_AS(step(p, s, StepCommand::direct_thrust(Vec3::Zero()), cfg),
                  ConfigError);
  cfg.h = 1e-3;
  cfg.renormalize_every = 0;
  CHECK_THROWS_AS(step(p, s, StepCommand::direct_thrust(Vec3::Zero()), cfg),
                  ConfigError);

  IntegratorConfig ok;
  CHECK_THROWS_AS(simulate_free(p, s, 1.0, IntegratorConfig{3e-4}), ConfigError);
  CHECK_NOTHROW(simulate_free(p, s, 0.01, ok));
}

TEST_CASE("unforced chain conserves energy and constraints") {
  const SystemParams p = uniform_params(3);
  const FullState s0 = tilted_state(3);
  IntegratorConfig cfg;
  cfg.h = 1e-4;
  const Trajectory traj = simulate_free(p, s0, 2.0, cfg);

  const Energies E0 = energies(p, s0.chain, s0.body);
  double max_drift = 0.0, max_unit = 0.0, max_tan = 0.0;
  for (const auto& row : traj.samples) {
    ChainState c;
    for (int i = 0; i < 3; ++i) {
      c.q.push_back(UnitVector3::normalized(row.q[i]));
      c.omega.push_back(row.omega[i]);
      max_unit = std::max(max_unit, std::abs(row.q[i].norm() - 1.0));
      max_tan = std::max(max_tan, std::abs(row.q[i].normalized().dot(row.omega[i])));
    }
    BodyState b{row.R, row.Omega};
    max_drift = std::max(max_drift,
                         std::abs(energies(p, c, b).total() - E0.total()));
  }
  CHECK(max_drift / std::abs(E0.total()) < 1e-8);
  CHECK(max_unit < 1e-12);
  CHECK(max_tan < 1e-12);
}

TEST_CASE("small-angle swing period matches the pendulum frequency") {
  const SystemParams p = uniform_params(1);
  FullState s;
  s.chain.q.push_back(UnitVector3(exp_so3(0.02 * e2) * e3));  // 0.02 rad tilt
  s.chain.omega.push_back(Vec3::Zero());

  IntegratorConfig cfg;
  cfg.h = 1e-4;
  const Trajectory traj = simulate_free(p, s, 10.0, cfg);

  // zero crossings of q_x by linear interpolation
  std::vector<double> crossings;
  for (size_t k = 1; k < traj.samples.size(); ++k) {
    const double a = traj.samples[k - 1].q[0].x();
    const double b = traj.samples[k].q[0].x();
    if (a == 0.0 || a * b >= 0.0) continue;
    crossings.push_back(traj.samples[k - 1].t + traj.dt * a / (a - b));
  }
  REQUIRE(crossings.size() >= 4);
  double gap = 0.0;
  for (size_t k = 1; k < crossings.size(); ++k) {
    gap += crossings[k] - crossings[k - 1];
  }
  gap /= static_cast<double>(crossings.size() - 1);

  const double alpha = p.supported_mass[0] * p.gravity * p.link_lengths[0] /
                       p.link_inertia(0, 0);
  const double period_ref = 2.0 * M_PI / std::sqrt(alpha);
  CHECK(std::abs(2.0 * gap - period_ref) / period_ref < 0.005);
}

TEST_CASE("free dynamics are time reversible") {
  const SystemParams p = uniform_params(2);
  const FullState s0 = tilted_state(2);
  IntegratorConfig cfg;
  cfg.h = 1e-4;

  const StepCommand free = StepCommand::thrust_moment(ControlInput{});
  FullState fwd = roll(p, s0, free, cfg, 2.0);
  for (auto& w : fwd.chain.omega) w = -w;
  fwd.body.Omega = -fwd.body.Omega;
  FullState back = roll(p, fwd, free, cfg, 2.0);
  for (auto& w : back.chain.omega) w = -w;
  back.body.Omega = -back.body.Omega;

  CHECK(state_distance(back, s0) < 1e-6);
}

TEST_CASE("fourth-order convergence on the full model") {
  const SystemParams p = uniform_params(2);
  FullState s0 = tilted_state(2);
  s0.chain.omega[0] = project_tangent(s0.chain.q[0], Vec3(0.3, 0.1, 0.0));
  s0.chain.omega[1] = project_tangent(s0.chain.q[1], Vec3(-0.2, 0.4, 0.0));

  ControlInput in;
  in.f = 5.0;
  in.moment = Vec3(0.001, -0.002, 0.0005);
  const StepCommand cmd = StepCommand::thrust_moment(in);

  std::vector<FullState> finals;
  for (double h : {2e-3, 1e-3, 5e-4}) {
    IntegratorConfig cfg;
    cfg.h = h;
    finals.push_back(roll(p, s0, cmd, cfg, 0.5));
  }
  const double e1 = state_distance(finals[0], finals[1]);
  const double e2d = state_distance(finals[1], finals[2]);
  const double rate = std::log2(e1 / e2d);
  CHECK(rate > 3.5);
  CHECK(rate < 4.5);
}

TEST_CASE("euler scheme exists and drifts much faster than rk4") {
  const SystemParams p = uniform_params(1);
  const FullState s0 = tilted_state(1);
  const Energies E0 = energies(p, s0.chain, s0.body);

  auto drift = [&](IntegratorConfig::Scheme scheme) {
    IntegratorConfig cfg;
    cfg.h = 1e-3;
    cfg.scheme = scheme;
    const Trajectory traj = simulate_free(p, s0, 2.0, cfg);
    double worst = 0.0;
    for (const auto& row : traj.samples) {
      ChainState c;
      c.q.push_back(UnitVector3::normalized(row.q[0]));
      c.omega.push_back(row.omega[0]);
      worst = std::max(worst, std::abs(energies(p, c, BodyState{row.R, row.Omega})
                                            .total() - E0.total()));
    }
    return worst / std::abs(E0.total());
  };

  const double rk4 = drift(IntegratorConfig::Scheme::rk4_manifold);
  const double euler = drift(IntegratorConfig::Scheme::euler_manifold);
  CHECK(rk4 < 1e-9);
  CHECK(euler > 1e-6);
  CHECK(euler > 100.0 * rk4);
}

TEST_CASE("identical runs are bit identical") {
  const SystemParams p = uniform_params(3);
  const FullState s0 = tilted_state(3);
  IntegratorConfig cfg;
  cfg.h = 1e-3;
  const Trajectory a = simulate_free(p, s0, 1.0, cfg);
  const Trajectory b = simulate_free(p, s0, 1.0, cfg);
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t k = 0; k < a.samples.size(); ++k) {
    CHECK(a.samples[k].t == b.samples[k].t);
    for (int i = 0; i < 3; ++i) {
      CHECK((a.samples[k].q[i] - b.samples[k].q[i]).norm() == 0.0);
      CHECK((a.samples[k].omega[i] - b.samples[k].omega[i]).norm() == 0.0);
    }
    CHECK((a.samples[k].R - b.samples[k].R).norm() == 0.0);
  }
}

TEST_CASE("divergence and controller failures abort with a timestamp") {
  const SystemParams p = uniform_params(1);
  FullState s = tilted_state(1);
  s.chain.omega[0] = project_tangent(s.chain.q[0], Vec3(1.0, 0.2, 0.0));

  IntegratorConfig cfg;
  cfg.h = 1e-3;
  cfg.omega_limit = 0.5;  // already exceeded
  try {
    simulate_free(p, s, 0.1, cfg);
    FAIL("expected divergence abort");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("t = ") != std::string::npos);
  }

  Controller bad = [](const FullState& st) -> ControlDecision {
    if (st.t > 0.004) throw std::runtime_error("attitude singularity");
    ControlDecision d;
    d.command = StepCommand::direct_thrust(Vec3::Zero());
    return d;
  };
  IntegratorConfig ok;
  ok.h = 1e-3;
  try {
    simulate(p, tilted_state(1), bad, 0.1, ok);
    FAIL("expected controller abort");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("t = ") != std::string::npos);
    CHECK(msg.find("attitude singularity") != std::string::npos);
  }
}

TEST_CASE("storage decimation keeps uniform spacing") {
  const SystemParams p = uniform_params(1);
  const FullState s0 = tilted_state(1);
  IntegratorConfig cfg;
  cfg.h = 1e-3;

  const Trajectory t3 = simulate_free(p, s0, 0.01, cfg, 3);
  CHECK(t3.samples.size() == 4);  // k = 0, 3, 6, 9; final step 10 off-cadence
  CHECK(t3.dt == doctest::Approx(3e-3));
  CHECK_NOTHROW(t3.validate());

  const Trajectory t5 = simulate_free(p, s0, 0.01, cfg, 5);
  CHECK(t5.samples.size() == 3);  // k = 0, 5, 10
  CHECK(t5.samples.back().t == doctest::Approx(0.01));
  CHECK_NOTHROW(t5.validate());
}
