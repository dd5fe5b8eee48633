#include "qukf/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "qukf/error.hpp"

namespace qukf {

namespace {

struct ChannelSpec {
  const char* name;
  const char* unit;
};

constexpr ChannelSpec kChannels[] = {
    {"x", "m"},       {"y", "m"},          {"z", "m"},          {"vx", "m/s"},
    {"vy", "m/s"},    {"vz", "m/s"},       {"p", "rad/s"},      {"q", "rad/s"},
    {"r", "rad/s"},   {"attitude", "rad"}, {"Fx", "N"},         {"Fy", "N"},
    {"Fz", "N"},      {"Mx", "N m"},       {"My", "N m"},       {"Mz", "N m"},
};
constexpr std::size_t kChannelCount = std::size(kChannels);

}  // namespace

const std::vector<std::string>& metric_channels() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& c : kChannels) n.emplace_back(c.name);
    return n;
  }();
  return names;
}

const ChannelMetrics& MetricsReport::channel(const std::string& name) const {
  for (const auto& c : channels) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown metric channel '" + name + "'");
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) return 0.0;
  double sum = 0.0;
  for (double e : errors) sum += e * e;
  return std::sqrt(sum / static_cast<double>(errors.size()));
}

double improvement_percent(double baseline, double candidate) {
  return (baseline - candidate) / baseline * 100.0;
}

std::optional<double> convergence_time(std::span<const double> times,
                                       std::span<const double> errors, double band) {
  if (times.empty() || times.size() != errors.size()) {
    throw Error(ErrorCode::kInvalidArgument, "convergence_time needs matching, non-empty series");
  }
  double peak = 0.0;
  for (double e : errors) peak = std::max(peak, std::abs(e));
  const double limit = band * peak;
  // Walk back from the end to the last sample outside the band.
  std::size_t i = errors.size();
  while (i > 0 && std::abs(errors[i - 1]) <= limit) --i;
  if (i == errors.size()) return std::nullopt;
  return times[i] - times.front();
}

double channel_error(const TelemetryRecord& rec, const EstimateRecord& est, std::size_t channel) {
  const auto& s = est.state;
  switch (channel) {
    case 0: case 1: case 2:
      return rec.truth.r[static_cast<Eigen::Index>(channel)] - s.r[static_cast<Eigen::Index>(channel)];
    case 3: case 4: case 5:
      return rec.truth.v[static_cast<Eigen::Index>(channel - 3)] -
             s.v[static_cast<Eigen::Index>(channel - 3)];
    case 6: case 7: case 8:
      return rec.truth.omega[static_cast<Eigen::Index>(channel - 6)] -
             s.omega[static_cast<Eigen::Index>(channel - 6)];
    case 9:
      return quat_diff(rec.truth.q, s.q).angle();
    case 10: case 11: case 12:
      return rec.truth_wrench.force[static_cast<Eigen::Index>(channel - 10)] -
             est.wrench.force[static_cast<Eigen::Index>(channel - 10)];
    case 13: case 14: case 15:
      return rec.truth_wrench.torque[static_cast<Eigen::Index>(channel - 13)] -
             est.wrench.torque[static_cast<Eigen::Index>(channel - 13)];
    default:
      throw Error(ErrorCode::kInvalidArgument, "channel index out of range");
  }
}

MetricsReport compute_metrics(const std::vector<TelemetryRecord>& records, double window) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no telemetry to evaluate");
  MetricsReport report;
  report.window = window;
  const double t_start = records.front().t + window;

  std::vector<double> times;
  for (const auto& rec : records) {
    if (rec.t >= t_start - 1e-12) times.push_back(rec.t);
  }
  if (times.empty()) throw Error(ErrorCode::kInvalidArgument, "metric window excludes every record");

  auto series = [&](auto member, std::size_t ch) -> std::optional<std::vector<double>> {
    std::vector<double> e;
    e.reserve(times.size());
    for (const auto& rec : records) {
      if (rec.t < t_start - 1e-12) continue;
      const auto& est = rec.*member;
      if (!est) return std::nullopt;
      e.push_back(channel_error(rec, *est, ch));
    }
    return e;
  };

  for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
    ChannelMetrics m;
    m.name = kChannels[ch].name;
    m.unit = kChannels[ch].unit;
    if (auto e = series(&TelemetryRecord::qukf, ch)) {
      m.rmse_qukf = rmse(*e);
      m.tc_qukf = convergence_time(times, *e);
    }
    if (auto e = series(&TelemetryRecord::ekf, ch)) {
      m.rmse_ekf = rmse(*e);
      m.tc_ekf = convergence_time(times, *e);
    }
    if (m.rmse_qukf && m.rmse_ekf && *m.rmse_ekf > 0.0) {
      m.improvement = improvement_percent(*m.rmse_ekf, *m.rmse_qukf);
    }
    report.channels.push_back(std::move(m));
  }
  return report;
}

}  // namespace qukf
