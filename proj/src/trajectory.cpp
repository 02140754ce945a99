#include "tethersim/trajectory.hpp"

#include <cmath>

#include "tethersim/errors.hpp"

namespace tethersim {

void Trajectory::validate() const {
  if (samples.empty()) throw ConfigError("trajectory: no samples");
  if (!(dt > 0.0)) throw ConfigError("trajectory: dt must be positive");
  for (size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (static_cast<int>(s.q.size()) != n || static_cast<int>(s.omega.size()) != n) {
      throw ConfigError("trajectory: sample " + std::to_string(k) +
                        " has wrong link count");
    }
    if (k > 0) {
      const double gap = s.t - samples[k - 1].t;
      if (!(gap > 0.0) || std::abs(gap - dt) > 1e-9 * std::max(1.0, s.t)) {
        throw ConfigError("trajectory: non-uniform sampling at row " +
                          std::to_string(k));
      }
    }
  }
}

}  // namespace tethersim
