#pragma once

#include <Eigen/Core>

namespace qukf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Matrix exponential by scaling and squaring with a Pade approximant.
MatrixXd expm(const MatrixXd& a);

/// Returns S with S S^T = P. Rows of P that are exactly zero are skipped and
/// stay zero in S. On the rest, tries a Cholesky factor first; when that fails
/// (P singular) uses a pivoted LDL^T with negative pivots clamped to zero.
/// Throws Error(kFactorizationFailure) when P is not finite or has a pivot
/// below -tol * max(1, max |P_ii|).
MatrixXd psd_sqrt(const MatrixXd& p, double tol = 1e-9);

/// (P + P^T) / 2
MatrixXd symmetrized(const MatrixXd& p);

/// Projects a symmetric matrix onto the PSD cone by removing its negative
/// eigen-components. Returns the input unchanged if it is already PSD.
MatrixXd clamp_psd(const MatrixXd& p);

/// 2-norm condition number of a symmetric matrix (inf if singular).
double symmetric_condition(const MatrixXd& p);

}  // namespace qukf
