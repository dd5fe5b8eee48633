#pragma once

#include <vector>

#include "qukf/dynamics.hpp"
#include "qukf/filters.hpp"

namespace qukf {

struct LatencyStats {
  int iterations = 0;
  double mean_ms = 0.0;
  double p99_ms = 0.0;
};

struct ScalingPoint {
  int dimension = 0;  // tangent dimension N
  double mean_ms = 0.0;
};

struct ScalingFit {
  double c0 = 0.0;  // ms
  double c3 = 0.0;  // ms / N^3
  double r2 = 0.0;
};

/// Times `iterations` QUKF steps on a hovering plant with the default noise levels.
LatencyStats bench_qukf_step(const SystemParams& params, double dt, const FilterConfig& config,
                             int iterations, unsigned seed = 7);

/// Mean step time for each padding (tangent dimension 19 + padding).
std::vector<ScalingPoint> bench_padding_sweep(const SystemParams& params, double dt,
                                              const std::vector<int>& paddings, int iterations,
                                              unsigned seed = 7);

/// Least-squares fit of t = c0 + c3 N^3 with its coefficient of determination.
ScalingFit fit_cubic(const std::vector<ScalingPoint>& points);

}  // namespace qukf
