#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "geostat/errors.hpp"
#include "geostat/rng.hpp"

namespace geostat {

// Linear-Gaussian state-space dynamics:
//   X_t = D X_{t-1} + nu_t,   Y_t = C X_t + eps_t
struct DynamicsModel {
  Eigen::MatrixXd D;          // n x n state transition
  Eigen::MatrixXd Sigma_nu;   // n x n PSD driving noise
  Eigen::MatrixXd C_obs;      // m x n observation matrix
  Eigen::MatrixXd Sigma_eps;  // m x m PD observation noise
  Eigen::VectorXd x0_mean;
  Eigen::MatrixXd x0_cov;

  void validate() const {
    const Eigen::Index n = D.rows();
    const Eigen::Index m = C_obs.rows();
    if (D.cols() != n || Sigma_nu.rows() != n || Sigma_nu.cols() != n ||
        C_obs.cols() != n || Sigma_eps.rows() != m || Sigma_eps.cols() != m ||
        x0_mean.size() != n || x0_cov.rows() != n || x0_cov.cols() != n)
      throw domain_error("DynamicsModel: inconsistent dimensions");
  }

  Eigen::Index n_states() const { return D.rows(); }
  Eigen::Index n_outputs() const { return C_obs.rows(); }

  // stability is reported, not enforced
  double spectral_radius() const {
    return D.eigenvalues().cwiseAbs().maxCoeff();
  }
};

namespace detail {

// symmetric PSD square root; rejects matrices with genuinely negative spectrum
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  const double tol = 1e-10 * std::max(std::abs(es.eigenvalues().maxCoeff()), 1e-300);
  if (es.eigenvalues().minCoeff() < -tol)
    throw domain_error(std::string(what) + ": covariance is not positive semi-definite");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace detail

// Iterates the state recursion with seeded Gaussian draws. Row t of the
// returned matrices holds X_t / Y_t, with X_0 drawn from the initial law.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> simulate_dynamics(const DynamicsModel& model,
                                                                     int T, std::uint64_t seed) {
  model.validate();
  if (T < 1) throw domain_error("simulate_dynamics: T must be >= 1");
  const Eigen::Index n = model.n_states();
  const Eigen::Index m = model.n_outputs();

  const Eigen::MatrixXd L0 = detail::psd_sqrt(model.x0_cov, "simulate_dynamics(x0_cov)");
  const Eigen::MatrixXd Lnu = detail::psd_sqrt(model.Sigma_nu, "simulate_dynamics(Sigma_nu)");
  const Eigen::MatrixXd Leps = detail::psd_sqrt(model.Sigma_eps, "simulate_dynamics(Sigma_eps)");

  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](Eigen::Index k) {
    Eigen::VectorXd z(k);
    for (Eigen::Index i = 0; i < k; ++i) z(i) = gauss(rng);
    return z;
  };

  Eigen::MatrixXd X(T, n), Y(T, m);
  Eigen::VectorXd x = model.x0_mean + L0 * draw(n);
  for (int t = 0; t < T; ++t) {
    if (t > 0) x = model.D * x + Lnu * draw(n);
    X.row(t) = x.transpose();
    Y.row(t) = (model.C_obs * x + Leps * draw(m)).transpose();
  }
  return {X, Y};
}

struct KalmanResult {
  Eigen::MatrixXd filtered_mean;              // T x n
  std::vector<Eigen::MatrixXd> filtered_cov;  // per t
  Eigen::MatrixXd predicted_mean;             // one-step-ahead prior per t
  std::vector<Eigen::MatrixXd> predicted_cov;
  double loglik = 0.0;
};

// Standard predict/update recursion; covariances are symmetrized each step.
inline KalmanResult kalman_filter(const DynamicsModel& model, const Eigen::MatrixXd& Ys) {
  model.validate();
  if (Ys.cols() != model.n_outputs())
    throw domain_error("kalman_filter: observation column count mismatch");
  const int T = static_cast<int>(Ys.rows());
  const Eigen::Index n = model.n_states();

  KalmanResult res;
  res.filtered_mean.resize(T, n);
  res.predicted_mean.resize(T, n);
  res.filtered_cov.resize(static_cast<std::size_t>(T));
  res.predicted_cov.resize(static_cast<std::size_t>(T));

  Eigen::VectorXd m = model.x0_mean;
  Eigen::MatrixXd P = model.x0_cov;
  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      m = model.D * m;
      P = model.D * P * model.D.transpose() + model.Sigma_nu;
      P = 0.5 * (P + P.transpose().eval());
    }
    res.predicted_mean.row(t) = m.transpose();
    res.predicted_cov[static_cast<std::size_t>(t)] = P;

    const Eigen::VectorXd innov = Ys.row(t).transpose() - model.C_obs * m;
    Eigen::MatrixXd S = model.C_obs * P * model.C_obs.transpose() + model.Sigma_eps;
    S = 0.5 * (S + S.transpose().eval());
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
      throw numerical_error("kalman_filter: innovation covariance is not positive definite");

    const Eigen::MatrixXd K = llt.solve(model.C_obs * P).transpose();  // P C' S^{-1}
    m += K * innov;
    P = P - K * model.C_obs * P;
    P = 0.5 * (P + P.transpose().eval());

    double logdet = 0.0;
    for (Eigen::Index i = 0; i < S.rows(); ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
    res.loglik += -0.5 * (logdet + innov.dot(llt.solve(innov)) +
                          S.rows() * std::log(2.0 * M_PI));

    res.filtered_mean.row(t) = m.transpose();
    res.filtered_cov[static_cast<std::size_t>(t)] = P;
  }
  return res;
}

}  // namespace geostat
