#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tethersim/errors.hpp"
#include "tethersim/report.hpp"
#include "tethersim/scenario.hpp"
#include "tethersim/verify.hpp"

namespace {

using namespace tethersim;

const Eigen::IOFormat kMatrixFormat(Eigen::FullPrecision, 0, "  ", "\n", "  ");

std::optional<double> tracking_k_x(const ScenarioConfig& cfg) {
  if (cfg.controller == ControllerKind::flexible_two_phase)
    return cfg.flex.k_x;
  return std::nullopt;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Exit-code-4 policy: hard invariants only. The EL residual is reported but
// not gated; its scale is set by the sampling interval, not by correctness.
void enforce_audit(const AuditReport& report) {
  std::vector<std::string> failures;
  if (report.max_constraint_drift > 1e-9)
    failures.push_back("constraint drift " + num(report.max_constraint_drift));
  if (report.energy_drift_rel > 1e-6)
    failures.push_back("energy drift " + num(report.energy_drift_rel));
  if (report.bound_violations > 0)
    failures.push_back("tracking bound violated at " +
                       std::to_string(report.bound_violations) + " samples");
  if (failures.empty()) return;
  std::string message = "audit failed: " + failures[0];
  for (size_t i = 1; i < failures.size(); ++i) message += ", " + failures[i];
  throw AuditError(message);
}

void print_audit(const AuditReport& report) {
  std::cout << "audit:\n"
            << "  max constraint drift:     " << report.max_constraint_drift << "\n"
            << "  energy drift (unforced):  " << report.energy_drift_rel << "\n"
            << "  max EL residual:          " << report.max_el_residual << "\n"
            << "  tracking bound violations: " << report.bound_violations << "\n";
}

int cmd_run(const std::string& source, std::string out_dir, bool svg,
            int decimate, bool audit) {
  ScenarioConfig cfg = load_scenario(source);
  if (decimate > 0) cfg.decimate = decimate;
  if (out_dir.empty()) out_dir = cfg.name + "_out";
  const SystemParams params = cfg.make_system();

  const RunResult result = run_scenario(cfg);

  std::optional<AuditReport> report;
  if (audit) report = run_audit(params, result.trajectory, tracking_k_x(cfg));

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  write_trajectory_csv((dir / "trajectory.csv").string(), result.trajectory);
  write_text((dir / "metrics.json").string(),
             metrics_json(cfg.name, result.metrics, report));
  write_text((dir / "resolved.cfg").string(), serialize_scenario(cfg));
  if (svg) {
    write_text((dir / "errors.svg").string(), errors_svg(result.trajectory));
    write_text((dir / "chain.svg").string(),
               chain_svg(params, result.trajectory));
  }

  std::cout << cfg.name << ": " << result.trajectory.samples.size()
            << " samples over " << result.trajectory.samples.back().t
            << " s -> " << dir.string() << "\n";
  if (result.metrics.final_e_q)
    std::cout << "  final |e_q| = " << *result.metrics.final_e_q << "\n";
  if (result.metrics.final_e_x)
    std::cout << "  final |e_x| = " << *result.metrics.final_e_x << "\n";
  if (result.metrics.max_tension_error)
    std::cout << "  max |T - T_d| = " << *result.metrics.max_tension_error << "\n";
  if (!result.metrics.vibration.empty())
    std::cout << "  vibration index = " << result.metrics.vibration_index << "\n";
  if (report) {
    print_audit(*report);
    enforce_audit(*report);
  }
  return 0;
}

int cmd_gains(const std::string& source) {
  const ScenarioConfig cfg = load_scenario(source);
  const SystemParams params = cfg.make_system();
  switch (cfg.controller) {
    case ControllerKind::flexible_two_phase: {
      const StabilizerGains gains = cfg.make_stabilizer(params);
      std::cout << "stabilizer for " << params.n() << " links ("
                << gains.K_x.cols() << " tilt coordinates)\n";
      std::cout << "K_x =\n" << gains.K_x.format(kMatrixFormat) << "\n";
      std::cout << "K_xdot =\n" << gains.K_xdot.format(kMatrixFormat) << "\n";
      std::cout << "certified decay margin = " << gains.margin << "\n";
      return 0;
    }
    case ControllerKind::taut_n1:
    case ControllerKind::taut_approx: {
      const TautGains& g = cfg.taut_gains;
      std::cout << "direction/attitude gains: k_q = " << g.k_q
                << ", k_omega = " << g.k_omega << ", k_R = " << g.k_R
                << ", k_Omega = " << g.k_Omega << ", eps = " << g.eps
                << ", c_q = " << g.c_q << "\n";
      const LyapunovCertificate cert = lyapunov_certificate(g, g.psi_bound);
      std::cout << "certificate (psi < " << cert.psi_q << "): "
                << (cert.is_valid ? "valid" : "INVALID") << "\n";
      std::cout << "P_lower =\n" << cert.P_lower.format(kMatrixFormat) << "\n";
      std::cout << "P_upper =\n" << cert.P_upper.format(kMatrixFormat) << "\n";
      std::cout << "W_q =\n" << cert.W_q.format(kMatrixFormat) << "\n";
      return 0;
    }
    case ControllerKind::none:
      break;
  }
  throw ConfigError("scenario '" + cfg.name + "' has no controller to synthesize");
}

int cmd_verify(const std::string& csv_path, std::string config_path) {
  if (config_path.empty()) {
    const auto sibling =
        std::filesystem::path(csv_path).parent_path() / "resolved.cfg";
    if (!std::filesystem::exists(sibling))
      throw ConfigError("no resolved.cfg next to '" + csv_path +
                        "'; pass --config");
    config_path = sibling.string();
  }
  const ScenarioConfig cfg = load_scenario(config_path);
  const Trajectory traj = read_trajectory_csv(csv_path);
  const AuditReport report =
      run_audit(cfg.make_system(), traj, tracking_k_x(cfg));
  print_audit(report);
  enforce_audit(report);
  std::cout << "audit passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tethered quadrotor simulation and control"};
  app.require_subcommand(1);

  std::string source, out_dir, config_path, csv_path;
  bool svg = false, audit = false;
  int decimate = 0;

  CLI::App* run = app.add_subcommand("run", "simulate a scenario");
  run->add_option("scenario", source, "config file or preset (fig2..fig5)")
      ->required();
  run->add_option("--out", out_dir, "output directory (default <name>_out)");
  run->add_flag("--svg", svg, "also write errors.svg and chain.svg");
  run->add_option("--decimate", decimate, "store every Nth step");
  run->add_flag("--audit", audit, "audit the run; failures exit 4");

  CLI::App* gains = app.add_subcommand("gains", "print the controller gains");
  gains->add_option("scenario", source, "config file or preset")->required();

  CLI::App* verify =
      app.add_subcommand("verify", "re-run the audits on a recorded run");
  verify->add_option("trajectory", csv_path, "trajectory.csv path")->required();
  verify->add_option("--config", config_path,
                     "scenario that produced it (default sibling resolved.cfg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(source, out_dir, svg, decimate, audit);
    if (gains->parsed()) return cmd_gains(source);
    return cmd_verify(csv_path, config_path);
  } catch (const tethersim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tethersim::AuditError& e) {
    std::cerr << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
}
