#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "geostat/covmodel.hpp"
#include "geostat/errors.hpp"
#include "geostat/rng.hpp"

namespace geostat {

// Latent Gaussian field X = B_x beta + eta at the prediction sites, with
// eta zero-mean and covariance from `cov`. p = 0 covariate columns means a
// known zero mean (simple kriging).
struct GaussianFieldModel {
  LocationSet locs_x;
  Eigen::MatrixXd B_x;  // n_x x p
  CovarianceModel cov;

  GaussianFieldModel(LocationSet locs, Eigen::MatrixXd B, CovarianceModel c)
      : locs_x(std::move(locs)), B_x(std::move(B)), cov(c) {
    if (B_x.rows() != locs_x.size())
      throw domain_error("GaussianFieldModel: B_x rows must match prediction sites");
    cov.validate();
  }

  Eigen::Index n_sites() const { return locs_x.size(); }
  Eigen::Index n_covariates() const { return B_x.cols(); }
};

// Y = A X + eps. When `selection` is set, observation i is latent site
// selection[i] (the 0/1 matrix A in row form); otherwise observed sites are
// taken as their own locations.
struct ObservationSet {
  LocationSet locs_y;
  Eigen::VectorXd Y;
  Eigen::MatrixXd B_y;  // n_y x p
  std::optional<std::vector<Eigen::Index>> selection;
  double sigma_eps2 = 0.0;

  ObservationSet(LocationSet locs, Eigen::VectorXd y, Eigen::MatrixXd B, double s2)
      : locs_y(std::move(locs)), Y(std::move(y)), B_y(std::move(B)), sigma_eps2(s2) {
    check();
  }

  // Observations at a subset of the model's prediction sites.
  static ObservationSet select(const GaussianFieldModel& fm,
                               const std::vector<Eigen::Index>& idx, Eigen::VectorXd y,
                               double s2) {
    Eigen::MatrixXd c(static_cast<Eigen::Index>(idx.size()), fm.locs_x.dim());
    Eigen::MatrixXd B(static_cast<Eigen::Index>(idx.size()), fm.B_x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= fm.n_sites())
        throw domain_error("ObservationSet::select: site index out of range");
      c.row(static_cast<Eigen::Index>(i)) = fm.locs_x.coords.row(idx[i]);
      B.row(static_cast<Eigen::Index>(i)) = fm.B_x.row(idx[i]);
    }
    ObservationSet obs(LocationSet(c), std::move(y), std::move(B), s2);
    obs.selection = idx;
    return obs;
  }

  Eigen::Index n_obs() const { return Y.size(); }

private:
  void check() const {
    if (Y.size() != locs_y.size())
      throw domain_error("ObservationSet: Y length must match observed sites");
    if (B_y.rows() != locs_y.size())
      throw domain_error("ObservationSet: B_y rows must match observed sites");
    if (!(sigma_eps2 >= 0.0))
      throw domain_error("ObservationSet: sigma_eps2 must be non-negative");
  }
};

struct JointGaussian {
  Eigen::VectorXd mean;  // [X; Y]
  Eigen::MatrixXd cov;
  Eigen::Index n_x = 0;
};

namespace detail {

// Cross-covariance between prediction sites and observed sites. With a
// selection map this is a column pick of the full matrix (so the nugget is
// shared at the selected site); otherwise only the covariance function acts.
inline Eigen::MatrixXd cross_cov(const GaussianFieldModel& fm, const ObservationSet& obs,
                                 const Eigen::MatrixXd& Sigma_xx) {
  if (obs.selection) {
    Eigen::MatrixXd S(fm.n_sites(), obs.n_obs());
    for (Eigen::Index j = 0; j < obs.n_obs(); ++j)
      S.col(j) = Sigma_xx.col((*obs.selection)[static_cast<std::size_t>(j)]);
    return S;
  }
  Eigen::MatrixXd S(fm.n_sites(), obs.n_obs());
  for (Eigen::Index i = 0; i < fm.n_sites(); ++i)
    for (Eigen::Index j = 0; j < obs.n_obs(); ++j)
      S(i, j) = covariance(fm.cov,
                           (fm.locs_x.coords.row(i) - obs.locs_y.coords.row(j)).norm());
  return S;
}

inline Eigen::MatrixXd obs_cov(const GaussianFieldModel& fm, const ObservationSet& obs,
                               const Eigen::MatrixXd& Sigma_xx) {
  Eigen::MatrixXd S;
  if (obs.selection) {
    const auto& sel = *obs.selection;
    S.resize(obs.n_obs(), obs.n_obs());
    for (Eigen::Index i = 0; i < obs.n_obs(); ++i)
      for (Eigen::Index j = 0; j < obs.n_obs(); ++j)
        S(i, j) = Sigma_xx(sel[static_cast<std::size_t>(i)], sel[static_cast<std::size_t>(j)]);
  } else {
    S = build_cov_matrix(fm.cov, obs.locs_y);
  }
  S.diagonal().array() += obs.sigma_eps2;
  return S;
}

}  // namespace detail

// Joint distribution of Z = [X; Y] for a given regression coefficient.
inline JointGaussian joint_model(const GaussianFieldModel& fm, const ObservationSet& obs,
                                 const Eigen::VectorXd& beta) {
  if (beta.size() != fm.n_covariates())
    throw domain_error("joint_model: beta length must equal covariate count");
  const Eigen::Index nx = fm.n_sites();
  const Eigen::Index ny = obs.n_obs();

  const Eigen::MatrixXd Sigma_xx = build_cov_matrix(fm.cov, fm.locs_x);
  const Eigen::MatrixXd Sigma_xy = detail::cross_cov(fm, obs, Sigma_xx);
  const Eigen::MatrixXd Sigma_yy = detail::obs_cov(fm, obs, Sigma_xx);

  JointGaussian jg;
  jg.n_x = nx;
  jg.mean = Eigen::VectorXd::Zero(nx + ny);
  if (fm.n_covariates() > 0) {
    jg.mean.head(nx) = fm.B_x * beta;
    jg.mean.tail(ny) = obs.B_y * beta;
  }
  jg.cov.resize(nx + ny, nx + ny);
  jg.cov.topLeftCorner(nx, nx) = Sigma_xx;
  jg.cov.topRightCorner(nx, ny) = Sigma_xy;
  jg.cov.bottomLeftCorner(ny, nx) = Sigma_xy.transpose();
  jg.cov.bottomRightCorner(ny, ny) = Sigma_yy;
  return jg;
}

// Draws one realization of the latent field. Deterministic per seed.
inline Eigen::VectorXd simulate(const GaussianFieldModel& fm, const Eigen::VectorXd& beta,
                                std::uint64_t seed) {
  if (beta.size() != fm.n_covariates())
    throw domain_error("simulate: beta length must equal covariate count");
  const Eigen::MatrixXd Sigma = build_cov_matrix(fm.cov, fm.locs_x);
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success)
    throw numerical_error("simulate: covariance factorization failed; raise the nugget");

  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(fm.n_sites());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = gauss(rng);

  Eigen::VectorXd x = llt.matrixL() * z;
  if (fm.n_covariates() > 0) x += fm.B_x * beta;
  return x;
}

struct KrigingResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::VectorXd beta_hat;  // empty for simple kriging
  Eigen::MatrixXd beta_cov;
};

// Universal kriging (p > 0) or simple kriging (p = 0). All solves go through
// the Cholesky factor of Sigma_yy.
inline KrigingResult krige(const GaussianFieldModel& fm, const ObservationSet& obs) {
  if (obs.B_y.cols() != fm.B_x.cols())
    throw domain_error("krige: covariate column mismatch between B_x and B_y");
  const Eigen::Index nx = fm.n_sites();
  const Eigen::Index p = fm.n_covariates();

  const Eigen::MatrixXd Sigma_xx = build_cov_matrix(fm.cov, fm.locs_x);
  const Eigen::MatrixXd Sigma_xy = detail::cross_cov(fm, obs, Sigma_xx);
  const Eigen::MatrixXd Sigma_yy = detail::obs_cov(fm, obs, Sigma_xx);

  Eigen::LLT<Eigen::MatrixXd> llt(Sigma_yy);
  if (llt.info() != Eigen::Success)
    throw numerical_error("krige: Sigma_yy is not positive definite");

  KrigingResult out;
  // C = Sigma_yy^{-1} Sigma_yx, reused for mean and variance.
  const Eigen::MatrixXd C = llt.solve(Sigma_xy.transpose());

  if (p == 0) {
    out.mean = Sigma_xy * llt.solve(obs.Y);
    out.variance = Sigma_xx.diagonal() - (Sigma_xy.transpose().cwiseProduct(C))
                                             .colwise()
                                             .sum()
                                             .transpose();
  } else {
    const Eigen::MatrixXd W = llt.solve(obs.B_y);        // Sigma_yy^{-1} B_y
    const Eigen::MatrixXd M = obs.B_y.transpose() * W;   // B' Sigma^{-1} B
    Eigen::LDLT<Eigen::MatrixXd> mldlt(M);
    if (mldlt.info() != Eigen::Success || mldlt.vectorD().minCoeff() <= 0.0) {
      // locate offending columns for the error message
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(obs.B_y);
      qr.setThreshold(1e-10);
      std::string cols;
      for (Eigen::Index k = qr.rank(); k < p; ++k)
        cols += (cols.empty() ? "" : ",") + std::to_string(qr.colsPermutation().indices()(k));
      throw estimation_error("krige: B'Sigma^{-1}B rank deficient (columns " + cols + ")");
    }
    out.beta_hat = mldlt.solve(obs.B_y.transpose() * llt.solve(obs.Y));
    out.beta_cov = mldlt.solve(Eigen::MatrixXd::Identity(p, p));
    out.mean = fm.B_x * out.beta_hat + Sigma_xy * llt.solve(obs.Y - obs.B_y * out.beta_hat);
    // U row i = b_x,i' - Sigma_xy,i Sigma_yy^{-1} B_y
    const Eigen::MatrixXd U = fm.B_x - Sigma_xy * W;
    Eigen::VectorXd quad(nx);
    const Eigen::MatrixXd UV = U * out.beta_cov;
    for (Eigen::Index i = 0; i < nx; ++i) quad(i) = UV.row(i).dot(U.row(i));
    out.variance = Sigma_xx.diagonal() -
                   (Sigma_xy.transpose().cwiseProduct(C)).colwise().sum().transpose() + quad;
  }

  for (Eigen::Index i = 0; i < nx; ++i) {
    if (out.variance(i) < -1e-10)
      throw numerical_error("krige: negative prediction variance beyond round-off");
    if (out.variance(i) < 0.0) out.variance(i) = 0.0;
  }
  return out;
}

}  // namespace geostat
