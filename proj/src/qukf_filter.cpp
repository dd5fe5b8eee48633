#include <cmath>
#include <string>
#include <vector>

#include "qukf/error.hpp"
#include "qukf/filters.hpp"

namespace qukf {

FilterConfig FilterConfig::defaults(int padding) {
  FilterConfig c;
  c.padding = padding;
  const int n = kTangentDim + padding;
  VectorXd q(n);
  VectorXd p0(n);
  q.setZero();
  p0.setZero();
  q.segment<3>(tangent::kRot).setConstant(1e-4);
  q.segment<3>(tangent::kPos).setConstant(1e-4);
  q.segment<3>(tangent::kVel).setConstant(1e-1);
  q.segment<3>(tangent::kOmega).setConstant(1e-3);
  q.segment<6>(tangent::kUpsilon).setConstant(1e-2);
  p0.segment<3>(tangent::kRot).setConstant(1e-4);
  p0.segment<3>(tangent::kPos).setConstant(1e-2);
  p0.segment<3>(tangent::kVel).setConstant(1e-2);
  p0.segment<3>(tangent::kOmega).setConstant(1e-2);
  p0.segment<6>(tangent::kUpsilon).setConstant(1.0);
  if (padding > 0) {
    q.segment(tangent::kPad, padding).setConstant(1e-4);
    p0.segment(tangent::kPad, padding).setConstant(1.0);
  }
  c.noise.process = q.asDiagonal();
  Vec9 r;
  r << 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-3, 1e-3, 1e-3;
  c.noise.measurement = r.asDiagonal();
  c.initial_cov = p0.asDiagonal();
  return c;
}

void FilterConfig::validate() const {
  std::vector<std::string> problems;
  const int n = tangent_dim();
  if (padding < 0) problems.emplace_back("filter.padding must be >= 0");
  if (noise.process.rows() != n || noise.process.cols() != n) {
    problems.emplace_back("filter.process_noise has wrong dimension");
  } else if (noise.process.diagonal().minCoeff() < 0.0) {
    problems.emplace_back("filter.process_noise entries must be >= 0");
  }
  if (initial_cov.rows() != n || initial_cov.cols() != n) {
    problems.emplace_back("filter.initial_covariance has wrong dimension");
  } else if (initial_cov.diagonal().minCoeff() < 0.0) {
    problems.emplace_back("filter.initial_covariance entries must be >= 0");
  }
  if (noise.measurement.diagonal().minCoeff() < 0.0) {
    problems.emplace_back("filter.measurement_noise entries must be >= 0");
  }
  const int dim = n;
  const double derived = phi * phi * (dim + sigma) - dim;
  if (!(dim + derived > 0.0)) problems.emplace_back("filter scaling gives n + eta <= 0");
  if (eta && std::abs(*eta - derived) > 1e-12 * std::max(1.0, std::abs(derived))) {
    problems.emplace_back("filter.eta = " + std::to_string(*eta) +
                          " disagrees with phi^2 (n + sigma) - n = " + std::to_string(derived));
  }
  if (!problems.empty()) {
    std::string msg;
    for (const auto& s : problems) msg += (msg.empty() ? "" : "; ") + s;
    throw Error(ErrorCode::kValidationError, msg);
  }
}

QukfFilter::QukfFilter(const SystemParams& params, double dt, FilterConfig config)
    : config_(std::move(config)), model_(params, dt, config_.placement, config_.wrench_model) {
  config_.validate();
  weights_ = ut_weights(config_.tangent_dim(), config_.phi, config_.gamma, config_.sigma);
  x_.pad = VectorXd::Zero(config_.padding);
  p_ = config_.initial_cov;
}

void QukfFilter::initialize(const Measurement& y0) {
  AugmentedState x;
  x.q = y0.q;
  x.r = y0.r;
  x.omega = y0.omega;
  x.pad = VectorXd::Zero(config_.padding);
  initialize(x, config_.initial_cov);
}

void QukfFilter::initialize(const AugmentedState& x0, const MatrixXd& p0) {
  if (x0.tangent_dim() != config_.tangent_dim() || p0.rows() != config_.tangent_dim()) {
    throw Error(ErrorCode::kInvalidArgument, "initial state does not match filter dimension");
  }
  x_ = x0;
  p_ = sanitize_covariance(p0, x_.dummy_index());
}

StepDiagnostics QukfFilter::step(const ControlInput& u, const Measurement& y) {
  const AttitudeAlgebra algebra = config_.algebra;
  const Prediction prior = predict(x_, p_, u, config_.noise, model_, weights_, algebra);
  const OutputPrediction output = observe(prior, config_.noise, algebra);
  UpdateResult post = update(prior.mean, prior.cov, output, y, algebra);
  x_ = std::move(post.state);
  p_ = std::move(post.cov);
  return {post.innovation, post.nis};
}

}  // namespace qukf
