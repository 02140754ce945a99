#include "tethersim/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "tethersim/errors.hpp"

namespace tethersim {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const Vec3& v) {
  return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z());
}

std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string::npos) return "";
  return s.substr(from, s.find_last_not_of(" \t\r") - from + 1);
}

// Flat "key = value" lines; '#' starts a comment, blank lines are skipped.
class KeyValues {
 public:
  KeyValues(const std::string& text, const std::string& origin)
      : origin_(origin) {
    std::istringstream stream(text);
    std::string line;
    int number = 0;
    while (std::getline(stream, line)) {
      ++number;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail("expected 'key = value'", number);
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) fail("empty key", number);
      if (entries_.count(key)) fail("duplicate key '" + key + "'", number);
      entries_[key] = {trim(line.substr(eq + 1)), number};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key) {
    const Entry& e = lookup(key);
    return e.value;
  }

  double get_double(const std::string& key) {
    const Entry& e = lookup(key);
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *end != '\0')
      fail("field '" + key + "' is not a number", e.line);
    return v;
  }

  double get_double(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
  }

  int get_int(const std::string& key) {
    const Entry& e = lookup(key);
    char* end = nullptr;
    const long v = std::strtol(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0')
      fail("field '" + key + "' is not an integer", e.line);
    return static_cast<int>(v);
  }

  int get_int(const std::string& key, int fallback) {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Entry& e = lookup(key);
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    fail("field '" + key + "' must be true or false", e.line);
    return false;
  }

  Vec3 get_vec3(const std::string& key) {
    const Entry& e = lookup(key);
    std::istringstream stream(e.value);
    Vec3 v;
    std::string tail;
    if (!(stream >> v.x() >> v.y() >> v.z()) || (stream >> tail))
      fail("field '" + key + "' needs three numbers", e.line);
    return v;
  }

  Vec3 get_vec3(const std::string& key, const Vec3& fallback) {
    return has(key) ? get_vec3(key) : fallback;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? get_string(key) : fallback;
  }

  void require(const std::string& key) {
    if (!has(key))
      throw ConfigError(origin_ + ": missing field '" + key + "'");
  }

  void finish() const {
    for (const auto& [key, entry] : entries_)
      if (!entry.consumed)
        throw ConfigError(origin_ + " line " + std::to_string(entry.line) +
                          ": unknown field '" + key + "'");
  }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool consumed = false;
  };

  const Entry& lookup(const std::string& key) {
    require(key);
    const Entry& e = entries_.at(key);
    e.consumed = true;
    return e;
  }

  [[noreturn]] void fail(const std::string& what, int line) const {
    throw ConfigError(origin_ + " line " + std::to_string(line) + ": " + what);
  }

  std::string origin_;
  std::map<std::string, Entry> entries_;
};

template <typename T>
T pick_word(KeyValues& kv, const std::string& key,
            const std::vector<std::pair<std::string, T>>& table) {
  const std::string word = kv.get_string(key);
  for (const auto& [name, value] : table)
    if (word == name) return value;
  std::string allowed;
  for (const auto& [name, value] : table)
    allowed += (allowed.empty() ? "" : ", ") + name;
  throw ConfigError("field '" + key + "': unknown value '" + word +
                    "' (allowed: " + allowed + ")");
}

const std::map<std::string, const char*>& preset_table() {
  static const std::map<std::string, const char*> presets = {
      {"fig2", R"(scenario.name = fig2
system.links = 1
system.quad_mass = 0.755
system.inertia_diag = 0.0043 0.0043 0.0103
system.tether_mass = 0.3
system.tether_length = 5.0
initial.kind = link_directions
initial.direction = 1 0 0
controller.kind = taut_n1
controller.reference = figure_eight
controller.tension = 5
integrator.h = 2e-4
run.duration = 10
run.decimate = 10
)"},
      {"fig3", R"(scenario.name = fig3
system.links = 5
system.quad_mass = 0.755
system.inertia_diag = 0.0043 0.0043 0.0103
system.tether_mass = 0.3
system.tether_length = 5.0
initial.kind = link_directions
initial.direction = 1 0 0
controller.kind = taut_approx
controller.reference = figure_eight
controller.tension = 10
integrator.h = 2e-4
run.duration = 10
run.decimate = 10
)"},
      {"fig4", R"(scenario.name = fig4
system.links = 5
system.quad_mass = 0.755
system.inertia_diag = 0.0043 0.0043 0.0103
system.tether_mass = 0.3
system.tether_length = 5.0
initial.kind = link_directions
initial.direction = 1 0 0
controller.kind = taut_approx
controller.reference = figure_eight
controller.tension = 20
integrator.h = 2e-4
run.duration = 10
run.decimate = 10
)"},
      {"fig5", R"(scenario.name = fig5
system.links = 5
system.quad_mass = 0.755
system.inertia_diag = 0.0043 0.0043 0.0103
system.tether_mass = 0.3
system.tether_length = 5.0
initial.kind = hanging_through_point
initial.x0 = 2.46 0 -0.43
controller.kind = flexible_two_phase
flexible.delta = 0.01
flexible.gamma = 1
flexible.t_switch = 3
flexible.x_target = 0 0 -5
lqr.state_weight = 10
integrator.h = 1e-3
run.duration = 10
run.decimate = 10
)"},
  };
  return presets;
}

ChainState chain_of(const TrajectorySample& s) {
  ChainState chain;
  for (size_t i = 0; i < s.q.size(); ++i) {
    chain.q.push_back(UnitVector3::normalized(s.q[i]));
    chain.omega.push_back(s.omega[i]);
  }
  return chain;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (links < 1) throw ConfigError("system.links must be at least 1");
  if (!(quad_mass > 0.0)) throw ConfigError("system.quad_mass must be positive");
  if (!(inertia_diag.minCoeff() > 0.0))
    throw ConfigError("system.inertia_diag entries must be positive");
  if (!(tether_mass > 0.0))
    throw ConfigError("system.tether_mass must be positive");
  if (!(tether_length > 0.0))
    throw ConfigError("system.tether_length must be positive");
  if (!(gravity > 0.0)) throw ConfigError("system.gravity must be positive");
  if (!hanging_start && !(direction.norm() > 0.0))
    throw ConfigError("initial.direction must be a nonzero vector");
  if (!(duration > 0.0)) throw ConfigError("run.duration must be positive");
  if (decimate < 1) throw ConfigError("run.decimate must be at least 1");
  if (controller == ControllerKind::taut_n1 && links != 1)
    throw ConfigError("controller taut_n1 needs system.links = 1"
                      " (use taut_approx for a flexible tether)");
  if (controller == ControllerKind::taut_n1 ||
      controller == ControllerKind::taut_approx) {
    taut_gains.validate();
    if (!(tension > 0.0)) throw ConfigError("controller.tension must be positive");
    if (reference == ReferenceKind::hold && !(q_d.norm() > 0.0))
      throw ConfigError("controller.q_d must be a nonzero vector");
  }
  if (controller == ControllerKind::flexible_two_phase) {
    flex.validate();
    if (!(state_weight > 0.0) || !(input_weight > 0.0))
      throw ConfigError("lqr weights must be positive");
    if (!(margin > 0.0)) throw ConfigError("lqr.margin must be positive");
  }
}

SystemParams ScenarioConfig::make_system() const {
  return make_params(
      quad_mass, inertia_diag.asDiagonal(),
      Eigen::VectorXd::Constant(links, tether_mass / links),
      Eigen::VectorXd::Constant(links, tether_length / links), gravity);
}

FullState ScenarioConfig::make_initial(const SystemParams& params) const {
  FullState state;
  if (hanging_start) {
    state.chain = hanging_chain_through_point(params, x0);
  } else {
    const UnitVector3 q = UnitVector3::normalized(direction);
    for (int i = 0; i < params.n(); ++i) {
      state.chain.q.push_back(q);
      state.chain.omega.push_back(Vec3::Zero());
    }
  }
  return state;
}

Controller ScenarioConfig::make_controller(const SystemParams& params,
                                           const FullState& initial) const {
  switch (controller) {
    case ControllerKind::taut_n1:
    case ControllerKind::taut_approx: {
      const TautReference ref = reference == ReferenceKind::figure_eight
                                    ? figure_eight_reference(tension)
                                    : constant_reference(q_d.normalized(), tension);
      return make_taut_controller(params, ref, taut_gains, integrator.h,
                                  simplified);
    }
    case ControllerKind::flexible_two_phase: {
      const Vec3 start = quad_position(params, initial.chain);
      return two_phase_controller(params, start, flex, make_stabilizer(params));
    }
    case ControllerKind::none:
      break;
  }
  throw ConfigError("scenario has no controller");
}

StabilizerGains ScenarioConfig::make_stabilizer(
    const SystemParams& params) const {
  const LinearizedModel lin = linearize(params);
  const auto dim = 2 * lin.mass.rows();
  return synthesize_gains(
      lin,
      state_weight * Eigen::MatrixXd::Identity(dim, dim),
      input_weight * Eigen::MatrixXd::Identity(3, 3), margin);
}

ScenarioConfig parse_scenario(const std::string& text,
                              const std::string& origin) {
  KeyValues kv(text, origin);
  for (const char* key :
       {"system.links", "system.quad_mass", "system.inertia_diag",
        "system.tether_mass", "system.tether_length", "initial.kind",
        "controller.kind", "run.duration"})
    kv.require(key);

  ScenarioConfig cfg;
  cfg.name = kv.get_string("scenario.name", origin);
  cfg.links = kv.get_int("system.links");
  cfg.quad_mass = kv.get_double("system.quad_mass");
  cfg.inertia_diag = kv.get_vec3("system.inertia_diag");
  cfg.tether_mass = kv.get_double("system.tether_mass");
  cfg.tether_length = kv.get_double("system.tether_length");
  cfg.gravity = kv.get_double("system.gravity", cfg.gravity);

  cfg.hanging_start = pick_word<bool>(
      kv, "initial.kind",
      {{"link_directions", false}, {"hanging_through_point", true}});
  cfg.x0 = kv.get_vec3("initial.x0", cfg.x0);
  cfg.direction = kv.get_vec3("initial.direction", cfg.direction);
  if (cfg.hanging_start && !kv.has("initial.x0"))
    throw ConfigError(origin + ": missing field 'initial.x0'");

  cfg.controller = pick_word<ControllerKind>(
      kv, "controller.kind",
      {{"none", ControllerKind::none},
       {"taut_n1", ControllerKind::taut_n1},
       {"taut_approx", ControllerKind::taut_approx},
       {"flexible_two_phase", ControllerKind::flexible_two_phase}});
  cfg.simplified = kv.get_bool("controller.simplified", cfg.simplified);
  cfg.tension = kv.get_double("controller.tension", cfg.tension);
  if (kv.has("controller.reference"))
    cfg.reference = pick_word<ReferenceKind>(
        kv, "controller.reference",
        {{"figure_eight", ReferenceKind::figure_eight},
         {"hold", ReferenceKind::hold}});
  cfg.q_d = kv.get_vec3("controller.q_d", cfg.q_d);

  cfg.taut_gains.k_q = kv.get_double("gains.k_q", cfg.taut_gains.k_q);
  cfg.taut_gains.k_omega = kv.get_double("gains.k_omega", cfg.taut_gains.k_omega);
  cfg.taut_gains.k_R = kv.get_double("gains.k_R", cfg.taut_gains.k_R);
  cfg.taut_gains.k_Omega = kv.get_double("gains.k_Omega", cfg.taut_gains.k_Omega);
  cfg.taut_gains.eps = kv.get_double("gains.eps", cfg.taut_gains.eps);
  cfg.taut_gains.c_q = kv.get_double("gains.c_q", cfg.taut_gains.c_q);
  cfg.taut_gains.psi_bound =
      kv.get_double("gains.psi_bound", cfg.taut_gains.psi_bound);

  cfg.flex.delta = kv.get_double("flexible.delta", cfg.flex.delta);
  cfg.flex.gamma = kv.get_double("flexible.gamma", cfg.flex.gamma);
  cfg.flex.k_x = kv.get_double("flexible.k_x", cfg.flex.k_x);
  cfg.flex.k_xdot = kv.get_double("flexible.k_xdot", cfg.flex.k_xdot);
  cfg.flex.t_switch = kv.get_double("flexible.t_switch", cfg.flex.t_switch);
  cfg.flex.x_target = kv.get_vec3("flexible.x_target", cfg.flex.x_target);
  cfg.state_weight = kv.get_double("lqr.state_weight", cfg.state_weight);
  cfg.input_weight = kv.get_double("lqr.input_weight", cfg.input_weight);
  cfg.margin = kv.get_double("lqr.margin", cfg.margin);

  cfg.integrator.h = kv.get_double("integrator.h", cfg.integrator.h);
  if (kv.has("integrator.scheme"))
    cfg.integrator.scheme = pick_word<IntegratorConfig::Scheme>(
        kv, "integrator.scheme",
        {{"rk4", IntegratorConfig::Scheme::rk4_manifold},
         {"euler", IntegratorConfig::Scheme::euler_manifold}});
  cfg.duration = kv.get_double("run.duration");
  cfg.decimate = kv.get_int("run.decimate", cfg.decimate);

  kv.finish();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& source) {
  const auto& presets = preset_table();
  const auto preset = presets.find(source);
  if (preset != presets.end()) return parse_scenario(preset->second, source);

  std::ifstream file(source);
  if (!file)
    throw ConfigError("cannot open scenario '" + source +
                      "' (not a file, and not one of the presets)");
  std::ostringstream text;
  text << file.rdbuf();
  ScenarioConfig cfg =
      parse_scenario(text.str(), std::filesystem::path(source).stem().string());
  return cfg;
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  std::ostringstream out;
  out << "scenario.name = " << cfg.name << "\n";
  out << "system.links = " << cfg.links << "\n";
  out << "system.quad_mass = " << fmt(cfg.quad_mass) << "\n";
  out << "system.inertia_diag = " << fmt(cfg.inertia_diag) << "\n";
  out << "system.tether_mass = " << fmt(cfg.tether_mass) << "\n";
  out << "system.tether_length = " << fmt(cfg.tether_length) << "\n";
  out << "system.gravity = " << fmt(cfg.gravity) << "\n";
  out << "initial.kind = "
      << (cfg.hanging_start ? "hanging_through_point" : "link_directions")
      << "\n";
  out << "initial.x0 = " << fmt(cfg.x0) << "\n";
  out << "initial.direction = " << fmt(cfg.direction) << "\n";
  const char* kind = "none";
  switch (cfg.controller) {
    case ControllerKind::none: kind = "none"; break;
    case ControllerKind::taut_n1: kind = "taut_n1"; break;
    case ControllerKind::taut_approx: kind = "taut_approx"; break;
    case ControllerKind::flexible_two_phase: kind = "flexible_two_phase"; break;
  }
  out << "controller.kind = " << kind << "\n";
  out << "controller.simplified = " << (cfg.simplified ? "true" : "false")
      << "\n";
  out << "controller.tension = " << fmt(cfg.tension) << "\n";
  out << "controller.reference = "
      << (cfg.reference == ReferenceKind::figure_eight ? "figure_eight"
                                                       : "hold")
      << "\n";
  out << "controller.q_d = " << fmt(cfg.q_d) << "\n";
  out << "gains.k_q = " << fmt(cfg.taut_gains.k_q) << "\n";
  out << "gains.k_omega = " << fmt(cfg.taut_gains.k_omega) << "\n";
  out << "gains.k_R = " << fmt(cfg.taut_gains.k_R) << "\n";
  out << "gains.k_Omega = " << fmt(cfg.taut_gains.k_Omega) << "\n";
  out << "gains.eps = " << fmt(cfg.taut_gains.eps) << "\n";
  out << "gains.c_q = " << fmt(cfg.taut_gains.c_q) << "\n";
  out << "gains.psi_bound = " << fmt(cfg.taut_gains.psi_bound) << "\n";
  out << "flexible.delta = " << fmt(cfg.flex.delta) << "\n";
  out << "flexible.gamma = " << fmt(cfg.flex.gamma) << "\n";
  out << "flexible.k_x = " << fmt(cfg.flex.k_x) << "\n";
  out << "flexible.k_xdot = " << fmt(cfg.flex.k_xdot) << "\n";
  out << "flexible.t_switch = " << fmt(cfg.flex.t_switch) << "\n";
  out << "flexible.x_target = " << fmt(cfg.flex.x_target) << "\n";
  out << "lqr.state_weight = " << fmt(cfg.state_weight) << "\n";
  out << "lqr.input_weight = " << fmt(cfg.input_weight) << "\n";
  out << "lqr.margin = " << fmt(cfg.margin) << "\n";
  out << "integrator.h = " << fmt(cfg.integrator.h) << "\n";
  out << "integrator.scheme = "
      << (cfg.integrator.scheme == IntegratorConfig::Scheme::rk4_manifold
              ? "rk4"
              : "euler")
      << "\n";
  out << "run.duration = " << fmt(cfg.duration) << "\n";
  out << "run.decimate = " << cfg.decimate << "\n";
  return out.str();
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"fig2", "fig3", "fig4",
                                                 "fig5"};
  return names;
}

RunResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const SystemParams params = cfg.make_system();
  const FullState initial = cfg.make_initial(params);
  RunResult result;
  if (cfg.controller == ControllerKind::none)
    result.trajectory = simulate_free(params, initial, cfg.duration,
                                      cfg.integrator, cfg.decimate);
  else
    result.trajectory =
        simulate(params, initial, cfg.make_controller(params, initial),
                 cfg.duration, cfg.integrator, cfg.decimate);
  result.metrics = compute_metrics(cfg, params, result.trajectory);
  return result;
}

RunMetrics compute_metrics(const ScenarioConfig& cfg,
                           const SystemParams& params,
                           const Trajectory& traj) {
  RunMetrics metrics;
  if (traj.samples.empty()) return metrics;
  const TrajectorySample& last = traj.samples.back();

  const auto norm_of = [](const std::optional<Vec3>& v) {
    return v ? std::optional<double>(v->norm()) : std::nullopt;
  };
  metrics.final_e_q = norm_of(last.log.e_q);
  metrics.final_e_omega = norm_of(last.log.e_omega);
  metrics.final_e_R = norm_of(last.log.e_R);
  metrics.final_e_Omega = norm_of(last.log.e_Omega);
  metrics.final_e_x = norm_of(last.log.e_x);

  for (const TrajectorySample& s : traj.samples) {
    metrics.max_thrust = std::max(metrics.max_thrust, s.u.norm());
    if (s.tension) {
      const double err = std::abs(*s.tension - cfg.tension);
      metrics.max_tension_error =
          std::max(metrics.max_tension_error.value_or(0.0), err);
    }
  }

  // exponential envelope: least-squares slope of ln|e_q| against t
  double st = 0, sy = 0, stt = 0, sty = 0;
  int fitted = 0;
  for (const TrajectorySample& s : traj.samples) {
    if (!s.log.e_q) continue;
    const double norm = s.log.e_q->norm();
    if (norm < 1e-14) continue;
    const double y = std::log(norm);
    st += s.t;
    sy += y;
    stt += s.t * s.t;
    sty += s.t * y;
    ++fitted;
  }
  if (fitted >= 2) {
    const double det = fitted * stt - st * st;
    if (det > 0.0) metrics.decay_rate = -(fitted * sty - st * sy) / det;
  }

  if (cfg.controller == ControllerKind::flexible_two_phase) {
    const Vec3 x_end = quad_position(params, chain_of(last));
    const double scale = std::max(cfg.flex.x_target.norm(), 1e-12);
    metrics.final_position_rel = (x_end - cfg.flex.x_target).norm() / scale;
  }

  // Lateral vibration: RMS deviation of each interior joint from its station
  // on the chord to the quadrotor, over the last two seconds.
  const int n = params.n();
  if (n > 1) {
    std::vector<double> fraction(n - 1);
    double cum = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      cum += params.link_lengths(i);
      fraction[i] = cum / params.total_length();
    }
    std::vector<double> sum_sq(n - 1, 0.0);
    int window = 0;
    const double t_from = last.t - 2.0;
    for (const TrajectorySample& s : traj.samples) {
      if (s.t < t_from) continue;
      const std::vector<Vec3> joints = positions(params, chain_of(s));
      for (int i = 0; i + 1 < n; ++i)
        sum_sq[i] += (joints[i] - fraction[i] * joints[n - 1]).squaredNorm();
      ++window;
    }
    if (window > 0) {
      for (int i = 0; i + 1 < n; ++i) {
        metrics.vibration.push_back(std::sqrt(sum_sq[i] / window));
        metrics.vibration_index =
            std::max(metrics.vibration_index, metrics.vibration.back());
      }
    }
  }
  return metrics;
}

}  // namespace tethersim
