#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tethersim/errors.hpp"
#include "tethersim/flexible_control.hpp"
#include "tethersim/integrator.hpp"
#include "tethersim/model.hpp"
#include "tethersim/report.hpp"
#include "tethersim/scenario.hpp"
#include "tethersim/verify.hpp"

namespace py = pybind11;
using namespace tethersim;

namespace {

// Rows of q/omega are per-link; omega is projected tangent so float inputs
// from Python do not trip the exact-tangency checks.
ChainState to_chain(const Eigen::MatrixXd& q, const Eigen::MatrixXd& omega) {
  if (q.cols() != 3 || omega.cols() != 3 || q.rows() != omega.rows())
    throw ConfigError("q and omega must both be n x 3");
  ChainState chain;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const UnitVector3 qi = UnitVector3::normalized(q.row(i).transpose());
    chain.q.push_back(qi);
    chain.omega.push_back(project_tangent(qi, omega.row(i).transpose()));
  }
  return chain;
}

Eigen::MatrixXd stack_rows(const std::vector<Vec3>& rows) {
  Eigen::MatrixXd out(rows.size(), 3);
  for (size_t i = 0; i < rows.size(); ++i) out.row(i) = rows[i].transpose();
  return out;
}

Eigen::MatrixXd chain_directions(const ChainState& chain) {
  Eigen::MatrixXd out(chain.n(), 3);
  for (int i = 0; i < chain.n(); ++i) out.row(i) = chain.q[i].vec().transpose();
  return out;
}

Eigen::VectorXd sample_norms(const Trajectory& traj,
                             const std::optional<Vec3> ControlLog::*field) {
  Eigen::VectorXd out(traj.samples.size());
  for (size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& v = traj.samples[k].log.*field;
    out[k] = v ? v->norm() : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "geometric simulation and control of a tethered quadrotor";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<AuditError>(m, "AuditError", PyExc_RuntimeError);

  py::class_<SystemParams>(m, "SystemParams")
      .def_readonly("quad_mass", &SystemParams::quad_mass)
      .def_readonly("gravity", &SystemParams::gravity)
      .def_readonly("link_masses", &SystemParams::link_masses)
      .def_readonly("link_lengths", &SystemParams::link_lengths)
      .def_readonly("total_mass", &SystemParams::total_mass)
      .def_property_readonly("n", &SystemParams::n)
      .def_property_readonly("total_length", &SystemParams::total_length);

  m.def(
      "make_params",
      [](double quad_mass, const Vec3& inertia_diag,
         const Eigen::VectorXd& link_masses,
         const Eigen::VectorXd& link_lengths, double gravity) {
        return make_params(quad_mass, inertia_diag.asDiagonal(), link_masses,
                           link_lengths, gravity);
      },
      py::arg("quad_mass"), py::arg("inertia_diag"), py::arg("link_masses"),
      py::arg("link_lengths"), py::arg("gravity") = 9.81,
      "Validated system parameters; inertia is the diagonal of the quadrotor "
      "inertia matrix.");

  m.def(
      "positions",
      [](const SystemParams& p, const Eigen::MatrixXd& q) {
        return stack_rows(
            positions(p, to_chain(q, Eigen::MatrixXd::Zero(q.rows(), 3))));
      },
      py::arg("params"), py::arg("q"),
      "Joint positions, one row per link end; the last row is the quadrotor.");

  m.def(
      "link_accelerations",
      [](const SystemParams& p, const Eigen::MatrixXd& q,
         const Eigen::MatrixXd& omega, const Vec3& u) {
        return stack_rows(link_accelerations(p, to_chain(q, omega), u));
      },
      py::arg("params"), py::arg("q"), py::arg("omega"), py::arg("u"),
      "Angular accelerations of every link under inertial thrust u.");

  m.def(
      "energies",
      [](const SystemParams& p, const Eigen::MatrixXd& q,
         const Eigen::MatrixXd& omega) {
        const Energies e = energies(p, to_chain(q, omega), BodyState{});
        return py::make_tuple(e.kinetic, e.potential);
      },
      py::arg("params"), py::arg("q"), py::arg("omega"),
      "(kinetic, potential) of the chain with the body at rest.");

  m.def(
      "tension",
      [](const SystemParams& p, const Vec3& q, const Vec3& omega,
         const Vec3& u) {
        const UnitVector3 qu = UnitVector3::normalized(q);
        return tension(p, qu, project_tangent(qu, omega), u);
      },
      py::arg("params"), py::arg("q"), py::arg("omega"), py::arg("u"),
      "Rod tension at the pivot for the single-link model.");

  m.def(
      "hanging_chain",
      [](const SystemParams& p, const Vec3& x0) {
        return chain_directions(hanging_chain_through_point(p, x0));
      },
      py::arg("params"), py::arg("x0"),
      "Minimum-potential link directions with the free end held at x0.");

  py::class_<LinearizedModel>(m, "LinearizedModel")
      .def_readonly("mass", &LinearizedModel::mass)
      .def_readonly("stiffness", &LinearizedModel::stiffness)
      .def_readonly("input", &LinearizedModel::input)
      .def_readonly("u_eq", &LinearizedModel::u_eq);
  m.def("linearize", &linearize, py::arg("params"),
        "Small-angle model about the upright equilibrium.");

  py::class_<StabilizerGains>(m, "StabilizerGains")
      .def_readonly("K_x", &StabilizerGains::K_x)
      .def_readonly("K_xdot", &StabilizerGains::K_xdot)
      .def_readonly("margin", &StabilizerGains::margin);
  m.def(
      "synthesize_gains",
      [](const LinearizedModel& lin, double margin) {
        return synthesize_gains(lin, margin);
      },
      py::arg("lin"), py::arg("margin") = 0.05,
      "LQR stabilizer with identity weights, certified Hurwitz.");
  m.def("closed_loop_matrix", &closed_loop_matrix, py::arg("lin"),
        py::arg("gains"));

  py::class_<TautGains>(m, "TautGains")
      .def(py::init<>())
      .def_readwrite("k_q", &TautGains::k_q)
      .def_readwrite("k_omega", &TautGains::k_omega)
      .def_readwrite("k_R", &TautGains::k_R)
      .def_readwrite("k_Omega", &TautGains::k_Omega)
      .def_readwrite("eps", &TautGains::eps)
      .def_readwrite("c_q", &TautGains::c_q)
      .def_readwrite("psi_bound", &TautGains::psi_bound)
      .def("validate", &TautGains::validate);

  py::class_<LyapunovCertificate>(m, "LyapunovCertificate")
      .def_readonly("P_lower", &LyapunovCertificate::P_lower)
      .def_readonly("P_upper", &LyapunovCertificate::P_upper)
      .def_readonly("W_q", &LyapunovCertificate::W_q)
      .def_readonly("psi_q", &LyapunovCertificate::psi_q)
      .def_readonly("is_valid", &LyapunovCertificate::is_valid);
  m.def("lyapunov_certificate", &lyapunov_certificate, py::arg("gains"),
        py::arg("psi_q"));

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("n", &Trajectory::n)
      .def_readonly("dt", &Trajectory::dt)
      .def("__len__", [](const Trajectory& t) { return t.samples.size(); })
      .def("times",
           [](const Trajectory& t) {
             Eigen::VectorXd out(t.samples.size());
             for (size_t k = 0; k < t.samples.size(); ++k)
               out[k] = t.samples[k].t;
             return out;
           })
      .def(
          "link_direction",
          [](const Trajectory& t, int i) {
            if (i < 0 || i >= t.n) throw ConfigError("link index out of range");
            Eigen::MatrixXd out(t.samples.size(), 3);
            for (size_t k = 0; k < t.samples.size(); ++k)
              out.row(k) = t.samples[k].q[i].transpose();
            return out;
          },
          py::arg("i"), "Direction of link i over time, one row per sample.")
      .def("thrust",
           [](const Trajectory& t) {
             Eigen::MatrixXd out(t.samples.size(), 3);
             for (size_t k = 0; k < t.samples.size(); ++k)
               out.row(k) = t.samples[k].u.transpose();
             return out;
           })
      .def("error_norm",
           [](const Trajectory& t, const std::string& field) {
             if (field == "e_q") return sample_norms(t, &ControlLog::e_q);
             if (field == "e_omega")
               return sample_norms(t, &ControlLog::e_omega);
             if (field == "e_R") return sample_norms(t, &ControlLog::e_R);
             if (field == "e_Omega")
               return sample_norms(t, &ControlLog::e_Omega);
             if (field == "e_x") return sample_norms(t, &ControlLog::e_x);
             throw ConfigError("unknown error field '" + field + "'");
           },
           py::arg("field"),
           "|e|(t) for e_q, e_omega, e_R, e_Omega or e_x; NaN where absent.");

  m.def(
      "quad_positions",
      [](const SystemParams& p, const Trajectory& t) {
        Eigen::MatrixXd out(t.samples.size(), 3);
        for (size_t k = 0; k < t.samples.size(); ++k) {
          Eigen::MatrixXd q(t.n, 3), w(t.n, 3);
          for (int i = 0; i < t.n; ++i) {
            q.row(i) = t.samples[k].q[i].transpose();
            w.row(i) = t.samples[k].omega[i].transpose();
          }
          out.row(k) = quad_position(p, to_chain(q, w)).transpose();
        }
        return out;
      },
      py::arg("params"), py::arg("trajectory"));

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_readwrite("name", &ScenarioConfig::name)
      .def_readonly("links", &ScenarioConfig::links)
      .def_readwrite("duration", &ScenarioConfig::duration)
      .def_readwrite("decimate", &ScenarioConfig::decimate)
      .def_readwrite("simplified", &ScenarioConfig::simplified)
      .def_readwrite("tension", &ScenarioConfig::tension)
      .def_property(
          "step", [](const ScenarioConfig& c) { return c.integrator.h; },
          [](ScenarioConfig& c, double h) { c.integrator.h = h; })
      .def("make_system", &ScenarioConfig::make_system)
      .def("validate", &ScenarioConfig::validate);

  m.def("load_scenario", &load_scenario, py::arg("source"),
        "Load a preset name (fig2..fig5) or a config file.");
  m.def("parse_scenario", &parse_scenario, py::arg("text"),
        py::arg("origin") = "config");
  m.def("serialize_scenario", &serialize_scenario, py::arg("config"));
  m.def("preset_names", [] { return preset_names(); });

  py::class_<RunMetrics>(m, "RunMetrics")
      .def_readonly("final_e_q", &RunMetrics::final_e_q)
      .def_readonly("final_e_omega", &RunMetrics::final_e_omega)
      .def_readonly("final_e_R", &RunMetrics::final_e_R)
      .def_readonly("final_e_Omega", &RunMetrics::final_e_Omega)
      .def_readonly("final_e_x", &RunMetrics::final_e_x)
      .def_readonly("max_tension_error", &RunMetrics::max_tension_error)
      .def_readonly("decay_rate", &RunMetrics::decay_rate)
      .def_readonly("final_position_rel", &RunMetrics::final_position_rel)
      .def_readonly("vibration", &RunMetrics::vibration)
      .def_readonly("vibration_index", &RunMetrics::vibration_index)
      .def_readonly("max_thrust", &RunMetrics::max_thrust);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("trajectory", &RunResult::trajectory)
      .def_readonly("metrics", &RunResult::metrics);
  m.def("run_scenario", &run_scenario, py::arg("config"),
        py::call_guard<py::gil_scoped_release>(),
        "Simulate the scenario and compute its metrics.");

  m.def("trajectory_csv", &trajectory_csv, py::arg("trajectory"));
  m.def("parse_trajectory_csv", &parse_trajectory_csv, py::arg("text"),
        py::arg("origin") = "csv");

  py::class_<AuditReport>(m, "AuditReport")
      .def_readonly("max_constraint_drift", &AuditReport::max_constraint_drift)
      .def_readonly("energy_drift_rel", &AuditReport::energy_drift_rel)
      .def_readonly("max_el_residual", &AuditReport::max_el_residual)
      .def_readonly("bound_violations", &AuditReport::bound_violations);
  m.def("run_audit", &run_audit, py::arg("params"), py::arg("trajectory"),
        py::arg("k_x") = std::nullopt,
        "Constraint, energy, equation-residual and tracking-bound audit.");
}
