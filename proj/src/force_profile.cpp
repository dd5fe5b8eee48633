#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qukf/error.hpp"
#include "qukf/simulation.hpp"

namespace qukf {

double smoothstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

void ForceProfile::validate() const {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    const std::string name = "profile.segments[" + std::to_string(i) + "]";
    if (!(s.start >= 0.0)) problems.push_back(name + ".start must be >= 0");
    if (!(s.end > s.start)) problems.push_back(name + ".end must be > start");
    if (!(s.ramp >= 0.0)) problems.push_back(name + ".ramp must be >= 0");
    if (2.0 * s.ramp > s.end - s.start) {
      problems.push_back(name + ".ramp must fit twice inside [start, end]");
    }
    if (!s.force.allFinite() || !s.torque.allFinite()) {
      problems.push_back(name + " force / torque must be finite");
    }
    if (i > 0 && s.start < segments[i - 1].end) {
      problems.push_back(name + " overlaps the previous segment (segments must be sorted)");
    }
  }
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw Error(ErrorCode::kValidationError, msg);
  }
}

ForceProfile ForceProfile::defaults() {
  ForceProfile p;
  p.segments = {
      {5.0, 15.0, Vec3(2.0, 0.0, 0.0), Vec3::Zero(), 1.0},
      {20.0, 30.0, Vec3(0.0, 2.0, 0.0), Vec3::Zero(), 1.0},
      {35.0, 45.0, Vec3(0.0, 0.0, 2.0), Vec3::Zero(), 1.0},
      {50.0, 58.0, Vec3::Zero(), Vec3(0.0, 0.0, 0.5), 1.0},
  };
  return p;
}

Wrench force_profile_eval(const ForceProfile& profile, double t) {
  for (const auto& s : profile.segments) {
    if (t < s.start || t > s.end) continue;
    double level = 1.0;
    if (s.ramp > 0.0) {
      level = std::min(smoothstep((t - s.start) / s.ramp), smoothstep((s.end - t) / s.ramp));
    }
    return {level * s.force, level * s.torque};
  }
  return {};
}

}  // namespace qukf
