#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qukf/simulation.hpp"

namespace qukf {

struct ChannelMetrics {
  std::string name;
  std::string unit;
  std::optional<double> rmse_qukf;
  std::optional<double> rmse_ekf;
  std::optional<double> tc_qukf;  // s, nullopt if the error never settles
  std::optional<double> tc_ekf;
  /// (EKF - QUKF) / EKF * 100, when both estimators ran.
  std::optional<double> improvement;
};

struct MetricsReport {
  double window = 1.0;  // s excluded at the start
  std::vector<ChannelMetrics> channels;
  std::optional<double> qukf_update_ms;
  std::optional<double> ekf_update_ms;

  const ChannelMetrics& channel(const std::string& name) const;
};

/// Channel names in report order: x y z vx vy vz p q r attitude Fx Fy Fz Mx My Mz.
const std::vector<std::string>& metric_channels();

double rmse(std::span<const double> errors);

/// Percent improvement of `candidate` over `baseline`.
double improvement_percent(double baseline, double candidate);

/// First time after `times.front()` from which |error| stays within
/// band * max|error| until the end of the series. Returns the elapsed time
/// since the start of the series, or nullopt if the last sample is outside.
std::optional<double> convergence_time(std::span<const double> times,
                                       std::span<const double> errors, double band = 0.05);

/// Per-channel error of one estimate against the truth of a record.
double channel_error(const TelemetryRecord& rec, const EstimateRecord& est, std::size_t channel);

MetricsReport compute_metrics(const std::vector<TelemetryRecord>& records, double window = 1.0);

}  // namespace qukf
