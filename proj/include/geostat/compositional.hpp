#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <string>

#include "geostat/errors.hpp"

namespace geostat {

// Replace zero (or negative-rounding) proportions by eps and renormalize to
// sum one. Required before clr, which needs strictly positive parts.
inline Eigen::VectorXd zero_replace(const Eigen::VectorXd& y, double eps = 1e-6) {
  Eigen::VectorXd out = y.cwiseMax(eps);
  return out / out.sum();
}

// Centered log-ratio: u_i = log(y_i / geometric_mean(y)). Components sum to
// zero exactly (up to round-off).
inline Eigen::VectorXd clr(const Eigen::VectorXd& y, Eigen::Index site = -1) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!(y(i) > 0.0))
      throw domain_error("clr: nonpositive proportion at component " + std::to_string(i) +
                         (site >= 0 ? " of site " + std::to_string(site) : ""));
  const Eigen::VectorXd logs = y.array().log();
  return logs.array() - logs.mean();
}

// Inverse clr (softmax); shift-invariant and overflow-guarded.
inline Eigen::VectorXd clr_inverse(const Eigen::VectorXd& u) {
  const Eigen::VectorXd e = (u.array() - u.maxCoeff()).exp();
  return e / e.sum();
}

inline Eigen::MatrixXd clr_rows(const Eigen::MatrixXd& Y) {
  Eigen::MatrixXd U(Y.rows(), Y.cols());
  for (Eigen::Index s = 0; s < Y.rows(); ++s) U.row(s) = clr(Y.row(s).transpose(), s).transpose();
  return U;
}

inline Eigen::MatrixXd clr_inverse_rows(const Eigen::MatrixXd& U) {
  Eigen::MatrixXd Y(U.rows(), U.cols());
  for (Eigen::Index s = 0; s < U.rows(); ++s)
    Y.row(s) = clr_inverse(U.row(s).transpose()).transpose();
  return Y;
}

struct CompositionRegression {
  Eigen::MatrixXd coefficients;       // p x k, rows re-centered to sum zero
  Eigen::MatrixXd fitted_clr;         // sites x k, rows sum to zero
  Eigen::MatrixXd fitted_proportions; // sites x k, rows sum to one
  Eigen::VectorXd residual_variance;  // per component
};

// Per-component OLS on clr-transformed compositions. The sum-zero constraint
// makes per-component coefficients identifiable only up to a shift, so the
// coefficient rows are re-centered before back-transforming.
inline CompositionRegression fit_composition_regression(const Eigen::MatrixXd& U,
                                                        const Eigen::MatrixXd& B) {
  if (U.rows() != B.rows())
    throw domain_error("fit_composition_regression: row count mismatch");
  const Eigen::Index p = B.cols();
  const Eigen::Index k = U.cols();
  const Eigen::Index S = U.rows();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  qr.setThreshold(1e-10);
  if (qr.rank() < p)
    throw estimation_error("fit_composition_regression: covariate matrix is rank deficient");

  CompositionRegression out;
  out.coefficients.resize(p, k);
  for (Eigen::Index c = 0; c < k; ++c) out.coefficients.col(c) = qr.solve(U.col(c));
  // re-center so fitted rows sum to zero
  out.coefficients.colwise() -= out.coefficients.rowwise().mean();

  out.fitted_clr = B * out.coefficients;
  out.fitted_proportions = clr_inverse_rows(out.fitted_clr);
  const Eigen::MatrixXd resid = U - out.fitted_clr;
  out.residual_variance.resize(k);
  const Eigen::Index dof = std::max<Eigen::Index>(S - p, 1);
  for (Eigen::Index c = 0; c < k; ++c)
    out.residual_variance(c) = resid.col(c).squaredNorm() / static_cast<double>(dof);
  return out;
}

// Two latent fields sharing the spatial structure Q with cross-field
// correlation rho: the covariance is [[1,rho],[rho,1]] (x) Q^{-1}, so the
// precision is the inverse correlation block Kronecker Q.
inline Eigen::SparseMatrix<double> coupled_precision(const Eigen::SparseMatrix<double>& Q,
                                                     double rho) {
  if (!(std::abs(rho) < 1.0)) throw domain_error("coupled_precision: |rho| must be < 1");
  const Eigen::Index n = Q.rows();
  const double a = 1.0 / (1.0 - rho * rho);
  const double b = -rho / (1.0 - rho * rho);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(4 * Q.nonZeros()));
  for (Eigen::Index c = 0; c < Q.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(Q, c); it; ++it) {
      trip.emplace_back(it.row(), it.col(), a * it.value());
      trip.emplace_back(n + it.row(), n + it.col(), a * it.value());
      if (b != 0.0) {
        trip.emplace_back(it.row(), n + it.col(), b * it.value());
        trip.emplace_back(n + it.row(), it.col(), b * it.value());
      }
    }
  }
  Eigen::SparseMatrix<double> out(2 * n, 2 * n);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace geostat
