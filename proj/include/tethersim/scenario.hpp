#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tethersim/flexible_control.hpp"
#include "tethersim/integrator.hpp"
#include "tethersim/taut_control.hpp"

// Scenario ingestion and execution. Configs are flat "section.key = value"
// text files; the named presets fig2..fig5 are built in and parsed through
// the same path as user files.

namespace tethersim {

enum class ControllerKind { none, taut_n1, taut_approx, flexible_two_phase };
enum class ReferenceKind { figure_eight, hold };

struct ScenarioConfig {
  std::string name = "scenario";

  // system
  int links = 1;
  double quad_mass = 0.0;
  Vec3 inertia_diag = Vec3::Zero();
  double tether_mass = 0.0;   // total, split uniformly across links
  double tether_length = 0.0;
  double gravity = 9.81;

  // initial state (chain at rest, identity attitude)
  bool hanging_start = false;      // resting shape through x0
  Vec3 x0 = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();  // common link direction otherwise

  // controller
  ControllerKind controller = ControllerKind::none;
  bool simplified = false;  // taut: command the thrust vector directly
  double tension = 5.0;
  ReferenceKind reference = ReferenceKind::figure_eight;
  Vec3 q_d = -Vec3::UnitZ();  // hold target
  TautGains taut_gains;
  FlexConfig flex;
  double state_weight = 1.0;  // LQR Q = w I
  double input_weight = 1.0;  // LQR R = w I
  double margin = 0.05;

  // execution
  IntegratorConfig integrator;
  double duration = 10.0;
  int decimate = 10;  // stored-sample stride

  void validate() const;
  SystemParams make_system() const;
  FullState make_initial(const SystemParams& params) const;
  Controller make_controller(const SystemParams& params,
                             const FullState& initial) const;  // kind != none
  StabilizerGains make_stabilizer(const SystemParams& params) const;
};

// Accepts a preset name (fig2, fig3, fig4, fig5) or a config file path.
ScenarioConfig load_scenario(const std::string& source);

// Parses config text; origin only labels error messages.
ScenarioConfig parse_scenario(const std::string& text,
                              const std::string& origin);

// Full resolved key set; parse_scenario(serialize_scenario(c)) reproduces c.
std::string serialize_scenario(const ScenarioConfig& cfg);

const std::vector<std::string>& preset_names();

struct RunMetrics {
  std::optional<double> final_e_q;
  std::optional<double> final_e_omega;
  std::optional<double> final_e_R;
  std::optional<double> final_e_Omega;
  std::optional<double> final_e_x;
  std::optional<double> max_tension_error;  // vs the commanded tension
  std::optional<double> decay_rate;         // exponential fit to |e_q|(t)
  std::optional<double> final_position_rel; // |x - x_target|/|x_target|
  std::vector<double> vibration;            // per interior joint, last 2 s
  double vibration_index = 0.0;             // max of the above
  double max_thrust = 0.0;
};

struct RunResult {
  Trajectory trajectory;
  RunMetrics metrics;
};

RunResult run_scenario(const ScenarioConfig& cfg);

RunMetrics compute_metrics(const ScenarioConfig& cfg,
                           const SystemParams& params, const Trajectory& traj);

}  // namespace tethersim
