#include "qukf/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qukf/error.hpp"

namespace qukf {

MatrixXd expm(const MatrixXd& a) { return a.exp(); }

namespace {

MatrixXd factor_active(const MatrixXd& p, double tol) {
  Eigen::LLT<MatrixXd> llt(p);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  // Pivoted LDL^T keeps each row's relative accuracy, unlike an eigenvector
  // basis whose error is eps * |P| in every entry.
  // info() flags a zero pivot with a nonzero column below it; that residue is
  // rounding noise here, so only the pivots themselves are checked.
  const Eigen::LDLT<MatrixXd> ldlt(symmetrized(p));
  const VectorXd d = ldlt.vectorD();
  if (!d.allFinite()) {
    throw Error(ErrorCode::kFactorizationFailure, "LDL^T factorization failed");
  }
  const double scale = std::max(1.0, p.diagonal().cwiseAbs().maxCoeff());
  if (d.minCoeff() < -tol * scale) {
    throw Error(ErrorCode::kFactorizationFailure, "covariance is not positive semidefinite");
  }
  MatrixXd l = ldlt.matrixL();
  l = l * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return ldlt.transpositionsP().transpose() * l;
}

}  // namespace

MatrixXd psd_sqrt(const MatrixXd& p, double tol) {
  if (!p.allFinite()) {
    throw Error(ErrorCode::kFactorizationFailure, "covariance has non-finite entries");
  }
  // Rows that are exactly zero (the dummy state, unexcited blocks) are left
  // out of the factorization so they stay exactly zero in the factor.
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (!p.row(i).isZero(0.0)) active.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(active.size());
  if (n == p.rows()) return factor_active(p, tol);
  MatrixXd out = MatrixXd::Zero(p.rows(), p.cols());
  if (n == 0) return out;
  MatrixXd sub(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sub(i, j) = p(active[i], active[j]);
  const MatrixXd s = factor_active(sub, tol);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(active[i], active[j]) = s(i, j);
  return out;
}

MatrixXd symmetrized(const MatrixXd& p) { return 0.5 * (p + p.transpose()); }

MatrixXd clamp_psd(const MatrixXd& p) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p);
  if (eig.eigenvalues().minCoeff() >= 0.0) return p;
  // Subtract only the negative part so the rest of P is not re-rounded.
  const MatrixXd& v = eig.eigenvectors();
  const VectorXd neg = eig.eigenvalues().cwiseMin(0.0);
  return symmetrized(p - v * neg.asDiagonal() * v.transpose());
}

double symmetric_condition(const MatrixXd& p) {
  const VectorXd lambda = Eigen::SelfAdjointEigenSolver<MatrixXd>(p, Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .cwiseAbs();
  const double lo = lambda.minCoeff();
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return lambda.maxCoeff() / lo;
}

}  // namespace qukf
