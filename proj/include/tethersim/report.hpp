#pragma once

#include <string>

#include "tethersim/scenario.hpp"
#include "tethersim/verify.hpp"

// Trajectory and metrics serialization. The CSV layout is fixed:
//
//   t, q1x..qNz, w1x..wNz, R11..R33 (row-major), Om1..Om3,
//   f, M1..M3, ux, uy, uz, T, eq_x..eq_z, ew_x..ew_z, eR_x..eR_z,
//   eW_x..eW_z, ex_x..ex_z, phase
//
// One row per stored sample, doubles at 17 significant digits, quantities a
// run does not produce left as empty fields. parse(emit(traj)) reproduces
// every stored value bit-exactly.

namespace tethersim {

std::string trajectory_csv(const Trajectory& traj);
Trajectory parse_trajectory_csv(const std::string& text,
                                const std::string& origin);

void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

std::string csv_header(int links);

// Metrics (and the audit block when one ran) as a JSON document.
std::string metrics_json(const std::string& name, const RunMetrics& metrics,
                         const std::optional<AuditReport>& audit);

// Static plots. Error norms against time; chain shapes in the vertical plane
// sampled across the run (drawn with height upward).
std::string errors_svg(const Trajectory& traj);
std::string chain_svg(const SystemParams& params, const Trajectory& traj);

void write_text(const std::string& path, const std::string& text);

}  // namespace tethersim
