// Acceptance harness: one self-contained check per criterion, each printing a
// single [PASS]/[FAIL] line with the measured quantities. Run all criteria
// (default) or a single one with --criterion N.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "tethersim/errors.hpp"
#include "tethersim/flexible_control.hpp"
#include "tethersim/integrator.hpp"
#include "tethersim/manifold.hpp"
#include "tethersim/model.hpp"
#include "tethersim/scenario.hpp"
#include "tethersim/taut_control.hpp"
#include "tethersim/verify.hpp"
#include "test_helpers.hpp"

namespace {

using namespace tethersim;
using tethersim::testing::random_tangent;
using tethersim::testing::random_unit;
using tethersim::testing::random_vec;

const Vec3 kE1 = Vec3::UnitX();
const Vec3 kE3 = Vec3::UnitZ();

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

SystemParams canonical(int n) {
  return make_params(0.755, Vec3(0.0043, 0.0043, 0.0103).asDiagonal(),
                     Eigen::VectorXd::Constant(n, 0.3 / n),
                     Eigen::VectorXd::Constant(n, 5.0 / n));
}

FullState aligned_start(int n, const Vec3& direction) {
  FullState state;
  const UnitVector3 q = UnitVector3::normalized(direction);
  for (int i = 0; i < n; ++i) {
    state.chain.q.push_back(q);
    state.chain.omega.push_back(Vec3::Zero());
  }
  return state;
}

ChainState chain_of(const TrajectorySample& s) {
  ChainState chain;
  for (size_t i = 0; i < s.q.size(); ++i) {
    chain.q.push_back(UnitVector3::normalized(s.q[i]));
    chain.omega.push_back(s.omega[i]);
  }
  return chain;
}

double seconds_since(
    const std::chrono::steady_clock::time_point& from) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - from)
      .count();
}

// decay exponent: -slope of the least-squares line through (t, ln|e|),
// restricted to samples above the noise floor
double fitted_decay(const Trajectory& traj,
                    const std::optional<Vec3> ControlLog::*field,
                    double floor) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  int count = 0;
  for (const TrajectorySample& s : traj.samples) {
    const auto& v = s.log.*field;
    if (!v) continue;
    const double norm = v->norm();
    if (norm <= floor) continue;
    const double y = std::log(norm);
    st += s.t;
    sy += y;
    stt += s.t * s.t;
    sty += s.t * y;
    ++count;
  }
  if (count < 2) return 0.0;
  const double det = count * stt - st * st;
  return det > 0.0 ? -(count * sty - st * sy) / det : 0.0;
}

// --- criterion 1: conservation of the unforced three-link chain ---

Outcome criterion1() {
  const SystemParams p = canonical(3);
  IntegratorConfig cfg;
  cfg.h = 1e-4;
  const auto start = std::chrono::steady_clock::now();
  const Trajectory traj = simulate_free(p, aligned_start(3, kE1), 10.0, cfg, 1);
  const double elapsed = seconds_since(start);
  const AuditReport report = run_audit(p, traj);

  Outcome out;
  out.pass = report.energy_drift_rel < 1e-6 &&
             report.max_constraint_drift < 1e-9 && elapsed < 30.0;
  out.detail = "energy drift " + num(report.energy_drift_rel) +
               " (<1e-6), constraint drift " +
               num(report.max_constraint_drift) + " (<1e-9), " + num(elapsed) +
               " s (<30 s)";
  return out;
}

// --- criterion 2: single-link closed form ---

Outcome criterion2() {
  const SystemParams p = canonical(1);
  const double alpha = p.supported_mass[0] * p.gravity * p.link_lengths[0] /
                       p.link_inertia(0, 0);
  const double beta = p.link_lengths[0] / p.link_inertia(0, 0);
  const bool constants_ok = std::abs(alpha - 2.0767368421052633) < 1e-12 &&
                            std::abs(beta - 0.23391812865497078) < 1e-12;

  std::mt19937 rng(11);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    ChainState c;
    const UnitVector3 q = random_unit(rng);
    c.q.push_back(q);
    c.omega.push_back(random_tangent(rng, q, 3.0).vec());
    const Vec3 u = random_vec(rng, 20.0);
    const Vec3 got = link_accelerations(p, c, u)[0];
    const Vec3 ref = alpha * q.vec().cross(kE3) + beta * q.vec().cross(u);
    worst = std::max(worst,
                     (got - ref).norm() / std::max(1.0, ref.norm()));
  }

  Outcome out;
  out.pass = constants_ok && worst < 1e-12;
  out.detail = "alpha " + num(alpha) + ", beta " + num(beta) +
               ", worst residual " + num(worst) + " over 10^4 states (<1e-12)";
  return out;
}

// --- criterion 3: simplified-model tracking with exact tension ---

Outcome criterion3() {
  ScenarioConfig cfg = load_scenario("fig2");
  cfg.simplified = true;
  cfg.decimate = 1;
  const RunResult run = run_scenario(cfg);
  const SystemParams p = cfg.make_system();
  const TautReference ref = figure_eight_reference(cfg.tension);

  double tension_worst = 0.0;
  int rate_violations = 0;
  for (const TrajectorySample& s : run.trajectory.samples) {
    tension_worst = std::max(tension_worst, std::abs(*s.tension - cfg.tension));
    const LyapunovSample ls =
        lyapunov_rate(p, UnitVector3::normalized(s.q[0]), s.omega[0], s.u,
                      ref(s.t), cfg.taut_gains);
    if (ls.rate > ls.bound + 1e-9) ++rate_violations;
  }
  const double lambda_q =
      fitted_decay(run.trajectory, &ControlLog::e_q, 1e-10);
  const double lambda_w =
      fitted_decay(run.trajectory, &ControlLog::e_omega, 1e-10);

  Outcome out;
  out.pass = tension_worst < 1e-10 && rate_violations == 0 && lambda_q > 0.0 &&
             lambda_w > 0.0;
  out.detail = "max |T-T_d| " + num(tension_worst) +
               " (<1e-10), Lyapunov rate violations " +
               std::to_string(rate_violations) + "/" +
               std::to_string(run.trajectory.samples.size()) + ", lambda_q " +
               num(lambda_q) + ", lambda_omega " + num(lambda_w) + " (>0)";
  return out;
}

// --- criterion 4: full-model tracking and the attitude time-scale sweep ---

Outcome criterion4() {
  const ScenarioConfig base = load_scenario("fig2");
  const RunResult run = run_scenario(base);

  double tail_err = 0.0, tail_tension = 0.0;
  for (const TrajectorySample& s : run.trajectory.samples) {
    if (s.t < 6.0) continue;
    for (const auto* e : {&s.log.e_q, &s.log.e_omega, &s.log.e_R, &s.log.e_Omega})
      if (*e) tail_err = std::max(tail_err, (*e)->norm());
    tail_tension = std::max(tail_tension, std::abs(*s.tension - base.tension));
  }

  // smaller attitude time scale -> tighter inner-loop tracking; measured as
  // the L2 norm of the attitude error over the run
  std::vector<double> sweep;
  for (const double eps : {0.4, 0.2, 0.1}) {
    ScenarioConfig cfg = base;
    cfg.taut_gains.eps = eps;
    const RunResult swept = run_scenario(cfg);
    double sum = 0.0;
    for (const TrajectorySample& s : swept.trajectory.samples)
      if (s.log.e_R) sum += s.log.e_R->squaredNorm() * swept.trajectory.dt;
    sweep.push_back(std::sqrt(sum));
  }

  Outcome out;
  out.pass = tail_err < 1e-2 && tail_tension < 1e-2 && sweep[0] > sweep[1] &&
             sweep[1] > sweep[2];
  out.detail = "errors past 6 s " + num(tail_err) + " (<1e-2), |T-T_d| " +
               num(tail_tension) + " (<1e-2), L2 e_R by eps " + num(sweep[0]) +
               " > " + num(sweep[1]) + " > " + num(sweep[2]);
  return out;
}

// --- criterion 5: linearization against central differences ---

Eigen::VectorXd chart_accel(const SystemParams& p, const Eigen::VectorXd& xs,
                            const Vec3& u) {
  ChainState c;
  for (int i = 0; i < p.n(); ++i) {
    const Vec3 xi(xs(2 * i), xs(2 * i + 1), 0.0);
    c.q.push_back(UnitVector3::normalized(-(exp_so3(xi) * kE3)));
    c.omega.push_back(Vec3::Zero());
  }
  const std::vector<Vec3> wd = link_accelerations(p, c, u);
  Eigen::VectorXd out(xs.size());
  for (int i = 0; i < p.n(); ++i) out.segment<2>(2 * i) = wd[i].head<2>();
  return out;
}

Outcome criterion5() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const int n : {1, 2, 3, 5}) {
    const SystemParams p = canonical(n);
    const LinearizedModel lin = linearize(p);
    const Eigen::MatrixXd state_block = -lin.mass.llt().solve(lin.stiffness);
    const Eigen::MatrixXd input_block = lin.mass.llt().solve(lin.input);

    const double eps = 1e-5;
    Eigen::MatrixXd fd_state(2 * n, 2 * n);
    for (int j = 0; j < 2 * n; ++j) {
      Eigen::VectorXd xp = Eigen::VectorXd::Zero(2 * n);
      xp(j) = eps;
      fd_state.col(j) =
          (chart_accel(p, xp, lin.u_eq) - chart_accel(p, -xp, lin.u_eq)) /
          (2.0 * eps);
    }
    worst = std::max(worst,
                     (fd_state - state_block).norm() / state_block.norm());

    const double ueps = 1e-2;
    Eigen::MatrixXd fd_input(2 * n, 3);
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(2 * n);
    for (int k = 0; k < 3; ++k) {
      const Vec3 du = ueps * Vec3::Unit(k);
      fd_input.col(k) = (chart_accel(p, origin, lin.u_eq + du) -
                         chart_accel(p, origin, lin.u_eq - du)) /
                        (2.0 * ueps);
    }
    worst = std::max(worst,
                     (fd_input - input_block).norm() / input_block.norm());
  }
  const double elapsed = seconds_since(start);

  Outcome out;
  out.pass = worst < 1e-5 && elapsed < 10.0;
  out.detail = "worst relative block mismatch " + num(worst) +
               " (<1e-5) over n in {1,2,3,5}, " + num(elapsed) + " s (<10 s)";
  return out;
}

// --- criterion 6: phase-1 tracking bound, domain, and exact linearization ---

Outcome criterion6() {
  ScenarioConfig cfg = load_scenario("fig5");
  cfg.decimate = 1;
  const RunResult run = run_scenario(cfg);
  const SystemParams p = cfg.make_system();
  const int bound_violations =
      tracking_bound_check(run.trajectory, cfg.flex.k_x);

  const Vec3 x0 = quad_position(p, cfg.make_initial(p).chain);
  const double reach = p.total_length();
  double max_radius = 0.0, max_residual = 0.0;
  for (const TrajectorySample& s : run.trajectory.samples) {
    if (s.log.phase != 1) continue;
    const ChainState chain = chain_of(s);
    const Vec3 x = quad_position(p, chain);
    max_radius = std::max(max_radius, x.norm());
    const ReferencePoint rp = reference_yd(s.t, x0, cfg.flex);
    const QuadAccel acc = quad_accel_decomposition(p, chain);
    const Vec3 xdd = -acc.drift - acc.input_map * s.u;
    const Vec3 residual = xdd - rp.yddot + cfg.flex.k_x * (x - rp.y) +
                          cfg.flex.k_xdot * (quad_velocity(p, chain) - rp.ydot);
    max_residual = std::max(max_residual, residual.norm());
  }

  Outcome out;
  out.pass =
      bound_violations == 0 && max_radius < reach && max_residual < 1e-8;
  out.detail = "bound violations " + std::to_string(bound_violations) +
               ", max |x| " + num(max_radius) + " (<" + num(reach) +
               "), max linearization residual " + num(max_residual) +
               " (<1e-8)";
  return out;
}

// --- criterion 7: certified stabilizer and nonlinear convergence ---

Outcome criterion7() {
  const SystemParams p = canonical(5);
  const LinearizedModel lin = linearize(p);
  const StabilizerGains gains = synthesize_gains(lin);
  const Eigen::MatrixXd closed = closed_loop_matrix(lin, gains);
  const Eigen::EigenSolver<Eigen::MatrixXd> eig(closed, false);
  const double max_real = eig.eigenvalues().real().maxCoeff();
  const bool hurwitz = closed.rows() == 20 && max_real < -0.05;

  Controller stabilize = [&](const FullState& state) {
    ControlDecision d;
    d.command = StepCommand::direct_thrust(u_stabilize(p, state.chain, gains));
    return d;
  };

  std::mt19937 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  IntegratorConfig cfg;
  cfg.h = 1e-3;
  int converged = 0;
  double worst_final = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    // planar tilt vectors with total magnitude drawn up to 0.2 rad
    std::vector<Vec3> xi(5);
    double total = 0.0;
    for (Vec3& v : xi) {
      const double angle = 2.0 * M_PI * unit(rng);
      const double r = unit(rng);
      v = r * Vec3(std::cos(angle), std::sin(angle), 0.0);
      total += r;
    }
    const double scale = (0.02 + 0.18 * unit(rng)) / total;
    FullState init;
    for (const Vec3& v : xi) {
      init.chain.q.push_back(UnitVector3::normalized(-(exp_so3(scale * v) * kE3)));
      init.chain.omega.push_back(Vec3::Zero());
    }
    const Trajectory traj = simulate(p, init, stabilize, 20.0, cfg, 20000);
    const TrajectorySample& last = traj.samples.back();
    double err_sq = 0.0;
    for (int i = 0; i < 5; ++i)
      err_sq += (last.q[i] + kE3).squaredNorm() + last.omega[i].squaredNorm();
    const double err = std::sqrt(err_sq);
    worst_final = std::max(worst_final, err);
    if (err < 1e-4) ++converged;
  }

  Outcome out;
  out.pass = hurwitz && converged >= 95;
  out.detail = "max Re(eig) " + num(max_real) + " (<-0.05), " +
               std::to_string(converged) +
               "/100 trials below 1e-4 at 20 s (worst " + num(worst_final) +
               ")";
  return out;
}

// --- criterion 8: vibration trends across the presets ---

Outcome criterion8() {
  const double tau_v = 0.015;
  const RunResult fig3 = run_scenario(load_scenario("fig3"));
  const RunResult fig4 = run_scenario(load_scenario("fig4"));
  const ScenarioConfig cfg5 = load_scenario("fig5");
  const RunResult fig5 = run_scenario(cfg5);

  const double v3 = fig3.metrics.vibration_index;
  const double v4 = fig4.metrics.vibration_index;
  const double v5 = fig5.metrics.vibration_index;  // window sits past switch+3 s
  const double rel = *fig5.metrics.final_position_rel;
  const double rel_budget = cfg5.flex.delta + 0.005;

  Outcome out;
  out.pass = v4 < v3 && v3 > tau_v && v4 > tau_v && v5 < tau_v &&
             rel <= rel_budget;
  out.detail = "vibration " + num(v3) + " (T=10) > " + num(v4) +
               " (T=20) > tau_v " + num(tau_v) + " > " + num(v5) +
               " (two-phase); final offset " + num(rel) + " (<=" +
               num(rel_budget) + ")";
  return out;
}

// --- criterion 9: integrator order by Richardson extrapolation ---

Outcome criterion9() {
  const SystemParams p = canonical(1);
  FullState init;
  init.chain.q.push_back(UnitVector3::normalized(exp_so3(0.4 * Vec3::UnitY()) * kE3));
  init.chain.omega.push_back(Vec3::Zero());

  const auto endpoint = [&](double h) {
    IntegratorConfig cfg;
    cfg.h = h;
    const int steps = static_cast<int>(std::llround(1.0 / h));
    const Trajectory traj = simulate_free(p, init, 1.0, cfg, steps);
    const TrajectorySample& last = traj.samples.back();
    Eigen::VectorXd state(6);
    state << last.q[0], last.omega[0];
    return state;
  };

  const Eigen::VectorXd coarse = endpoint(2e-3);
  const Eigen::VectorXd medium = endpoint(1e-3);
  const Eigen::VectorXd fine = endpoint(5e-4);
  const double order =
      std::log2((coarse - medium).norm() / (medium - fine).norm());

  Outcome out;
  out.pass = order >= 3.7 && order <= 4.3;
  out.detail = "observed order " + num(order) + " (in [3.7, 4.3])";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      only = std::atoi(argv[++i]);
    else if (std::strcmp(argv[i], "--all") == 0)
      only = 0;
    else if (std::strcmp(argv[i], "--help") == 0) {
      std::printf("usage: acceptance [--criterion N | --all]\n");
      return 0;
    }
  }

  Outcome (*criteria[])() = {criterion1, criterion2, criterion3,
                             criterion4, criterion5, criterion6,
                             criterion7, criterion8, criterion9};
  const int total = static_cast<int>(std::size(criteria));
  if (only < 0 || only > total) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }

  bool all_pass = true;
  for (int k = 1; k <= total; ++k) {
    if (only != 0 && k != only) continue;
    Outcome out;
    try {
      out = criteria[k - 1]();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s\n", out.pass ? "PASS" : "FAIL", k,
                out.detail.c_str());
    all_pass = all_pass && out.pass;
  }
  return all_pass ? 0 : 1;
}
