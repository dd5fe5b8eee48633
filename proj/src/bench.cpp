#include "qukf/bench.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <chrono>
#include <cmath>

#include "qukf/error.hpp"
#include "qukf/simulation.hpp"

namespace qukf {

namespace {

std::vector<double> time_steps(const SystemParams& params, double dt, const FilterConfig& config,
                               int iterations, unsigned seed) {
  QukfFilter filter(params, dt, config);
  NoiseSource noise(seed);
  BodyState truth;
  truth.r = Vec3(0.0, 0.0, 1.0);
  const ControlInput hover{params.mass * params.gravity, Vec3::Zero()};
  filter.initialize(inject_noise(truth, config.noise.measurement, noise));

  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const Measurement y = inject_noise(truth, config.noise.measurement, noise);
    const auto t0 = std::chrono::steady_clock::now();
    filter.step(hover, y);
    ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return ms;
}

}  // namespace

LatencyStats bench_qukf_step(const SystemParams& params, double dt, const FilterConfig& config,
                             int iterations, unsigned seed) {
  if (iterations < 1) throw Error(ErrorCode::kInvalidArgument, "iterations must be >= 1");
  std::vector<double> ms = time_steps(params, dt, config, iterations, seed);
  LatencyStats s;
  s.iterations = iterations;
  double sum = 0.0;
  for (double v : ms) sum += v;
  s.mean_ms = sum / static_cast<double>(ms.size());
  const auto idx = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(ms.size()))) - 1;
  std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(idx), ms.end());
  s.p99_ms = ms[idx];
  return s;
}

std::vector<ScalingPoint> bench_padding_sweep(const SystemParams& params, double dt,
                                              const std::vector<int>& paddings, int iterations,
                                              unsigned seed) {
  std::vector<ScalingPoint> out;
  for (int pad : paddings) {
    const FilterConfig config = FilterConfig::defaults(pad);
    const LatencyStats s = bench_qukf_step(params, dt, config, iterations, seed);
    out.push_back({config.tangent_dim(), s.mean_ms});
  }
  return out;
}

ScalingFit fit_cubic(const std::vector<ScalingPoint>& points) {
  if (points.size() < 3) throw Error(ErrorCode::kInvalidArgument, "need at least 3 points");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = points[static_cast<std::size_t>(i)].dimension;
    a(i, 0) = 1.0;
    a(i, 1) = d * d * d;
    b[i] = points[static_cast<std::size_t>(i)].mean_ms;
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  const double mean = b.mean();
  const double ss_res = (a * c - b).squaredNorm();
  const double ss_tot = (b.array() - mean).matrix().squaredNorm();
  return {c[0], c[1], ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0};
}

}  // namespace qukf
