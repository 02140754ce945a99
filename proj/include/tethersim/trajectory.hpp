#pragma once

#include <optional>
#include <vector>

#include "tethersim/model.hpp"

namespace tethersim {

// Controller-reported diagnostics attached to each sample. Fields are only
// present when the active controller defines them.
struct ControlLog {
  std::optional<Vec3> e_q;      // link direction error
  std::optional<Vec3> e_omega;  // link rate error
  std::optional<Vec3> e_R;      // attitude error
  std::optional<Vec3> e_Omega;  // body rate error
  std::optional<Vec3> e_x;      // quad position error
  int phase = 0;                // 0 unforced, 1 tracking, 2 stabilizing
};

struct TrajectorySample {
  double t = 0.0;
  std::vector<Vec3> q;
  std::vector<Vec3> omega;
  Mat3 R = Mat3::Identity();
  Vec3 Omega = Vec3::Zero();
  double f = 0.0;
  Vec3 moment = Vec3::Zero();
  Vec3 u = Vec3::Zero();          // inertial thrust actually applied
  std::optional<double> tension;  // single-link semantics only
  ControlLog log;
};

// Uniformly sampled run history. dt is the spacing between stored samples
// (integration step times any storage decimation).
struct Trajectory {
  int n = 0;
  double dt = 0.0;
  std::vector<TrajectorySample> samples;

  void validate() const;  // uniform, strictly increasing t; consistent sizes
};

}  // namespace tethersim
