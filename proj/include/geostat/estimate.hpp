#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geostat/covmodel.hpp"
#include "geostat/errors.hpp"
#include "geostat/field.hpp"
#include "geostat/optim.hpp"
#include "geostat/rng.hpp"

namespace geostat {

struct EmpiricalVariogram {
  Eigen::VectorXd bin_edges;    // length n_bins + 1, increasing
  Eigen::VectorXd bin_centers;  // length n_bins
  Eigen::VectorXd gamma_hat;    // per-bin mean of squared half-differences
  Eigen::VectorXi pair_count;

  bool occupied(Eigen::Index k) const { return pair_count(k) > 0; }
};

namespace detail {

inline Eigen::VectorXd ols_residuals(const ObservationSet& obs) {
  if (obs.B_y.cols() == 0) return obs.Y;
  Eigen::VectorXd beta = (obs.B_y.transpose() * obs.B_y)
                             .ldlt()
                             .solve(obs.B_y.transpose() * obs.Y);
  return obs.Y - obs.B_y * beta;
}

}  // namespace detail

// Binned semi-variogram estimate from OLS residuals. A pair whose distance
// lies exactly on an edge goes to the lower bin, i.e. bin k covers
// (edge_k, edge_{k+1}].
inline EmpiricalVariogram empirical_variogram(const ObservationSet& obs,
                                              const Eigen::VectorXd& bin_edges) {
  if (obs.n_obs() < 2) throw domain_error("empirical_variogram: need at least 2 observations");
  const Eigen::Index nb = bin_edges.size() - 1;
  if (nb < 1) throw domain_error("empirical_variogram: need at least one bin");
  for (Eigen::Index k = 0; k < nb; ++k)
    if (!(bin_edges(k) < bin_edges(k + 1)))
      throw domain_error("empirical_variogram: bin edges must be increasing");

  const Eigen::VectorXd w = detail::ols_residuals(obs);

  EmpiricalVariogram ev;
  ev.bin_edges = bin_edges;
  ev.bin_centers = 0.5 * (bin_edges.head(nb) + bin_edges.tail(nb));
  ev.gamma_hat = Eigen::VectorXd::Zero(nb);
  ev.pair_count = Eigen::VectorXi::Zero(nb);

  Eigen::Index used = 0;
  for (Eigen::Index i = 0; i < obs.n_obs(); ++i) {
    for (Eigen::Index j = i + 1; j < obs.n_obs(); ++j) {
      const double h = obs.locs_y.distance(i, j);
      if (h <= bin_edges(0) || h > bin_edges(nb)) continue;
      Eigen::Index k = 0;
      while (h > bin_edges(k + 1)) ++k;
      const double d = w(i) - w(j);
      ev.gamma_hat(k) += 0.5 * d * d;
      ev.pair_count(k) += 1;
      ++used;
    }
  }
  if (used == 0)
    throw estimation_error("empirical_variogram: no pairs within the binned lag range");
  for (Eigen::Index k = 0; k < nb; ++k)
    if (ev.pair_count(k) > 0) ev.gamma_hat(k) /= ev.pair_count(k);
  return ev;
}

// Default binning: equal-width bins from 0 to max_lag (or to half the
// maximum pairwise distance when max_lag <= 0).
inline EmpiricalVariogram empirical_variogram(const ObservationSet& obs, int n_bins = 15,
                                              double max_lag = 0.0) {
  if (n_bins < 1) throw domain_error("empirical_variogram: n_bins must be >= 1");
  if (max_lag <= 0.0) {
    double dmax = 0.0;
    for (Eigen::Index i = 0; i < obs.n_obs(); ++i)
      for (Eigen::Index j = i + 1; j < obs.n_obs(); ++j)
        dmax = std::max(dmax, obs.locs_y.distance(i, j));
    max_lag = 0.5 * dmax;
    if (max_lag <= 0.0) throw domain_error("empirical_variogram: all locations coincide");
  }
  Eigen::VectorXd edges = Eigen::VectorXd::LinSpaced(n_bins + 1, 0.0, max_lag);
  return empirical_variogram(obs, edges);
}

struct VariogramFitOptions {
  std::optional<double> fix_sigma2;
  std::optional<double> fix_rho;
  double nu = 0.5;          // Matern smoothness (fixed unless free_nu)
  bool free_nu = false;
  bool fit_nugget = false;  // when set, the nugget is a free parameter
  std::optional<double> fix_nugget;
  bool weighted = false;    // pair-count weighted least squares
  int n_starts = 5;
  std::uint64_t seed = 0;
  int max_restarts = 3;
};

namespace detail {

// Model semi-variogram including the nugget jump at h > 0.
inline double model_gamma(const CovarianceModel& m, double h) {
  return (h > 0.0 ? m.nugget : 0.0) + m.sigma2 - covariance(m, h);
}

}  // namespace detail

// Least-squares fit of a parametric semi-variogram to binned estimates.
// Optimization runs over log-parameters with multi-start Nelder-Mead.
inline CovarianceModel fit_variogram_ls(const EmpiricalVariogram& ev, CovFamily family,
                                        const VariogramFitOptions& opt = {}) {
  std::vector<Eigen::Index> occ;
  for (Eigen::Index k = 0; k < ev.gamma_hat.size(); ++k)
    if (ev.occupied(k)) occ.push_back(k);

  const bool fit_s2 = !opt.fix_sigma2.has_value();
  const bool fit_rho = !opt.fix_rho.has_value();
  const bool fit_nu = family == CovFamily::Matern && opt.free_nu;
  const bool fit_ng = opt.fit_nugget && !opt.fix_nugget.has_value();
  const int n_free = fit_s2 + fit_rho + fit_nu + fit_ng;
  if (static_cast<int>(occ.size()) < n_free + 1)
    throw estimation_error("fit_variogram_ls: not enough occupied bins for the free parameters");

  auto unpack = [&](const Eigen::VectorXd& x) {
    CovarianceModel m;
    m.family = family;
    int i = 0;
    m.sigma2 = fit_s2 ? std::max(std::exp(x(i++)), 1e-12) : *opt.fix_sigma2;
    m.rho = fit_rho ? std::max(std::exp(x(i++)), 1e-12) : *opt.fix_rho;
    m.nu = fit_nu ? std::max(std::exp(x(i++)), 1e-6) : opt.nu;
    m.nugget = fit_ng ? std::max(std::exp(x(i++)), 0.0)
                      : (opt.fix_nugget ? *opt.fix_nugget : 0.0);
    return m;
  };

  auto objective = [&](const Eigen::VectorXd& x) {
    const CovarianceModel m = unpack(x);
    double ss = 0.0;
    for (Eigen::Index k : occ) {
      const double d = detail::model_gamma(m, ev.bin_centers(k)) - ev.gamma_hat(k);
      ss += (opt.weighted ? ev.pair_count(k) : 1.0) * d * d;
    }
    return std::isfinite(ss) ? ss : std::numeric_limits<double>::max();
  };

  // data-driven initial guesses
  const double g_max = std::max(ev.gamma_hat.maxCoeff(), 1e-10);
  const double h_mid = ev.bin_centers(occ[occ.size() / 2]);

  auto rng = make_rng(opt.seed, 17);
  std::normal_distribution<double> jitter(0.0, 0.7);

  SimplexResult best;
  best.value = std::numeric_limits<double>::max();
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    for (int s = 0; s < opt.n_starts; ++s) {
      Eigen::VectorXd x0(n_free);
      int i = 0;
      if (fit_s2) x0(i++) = std::log(g_max) + (s ? jitter(rng) : 0.0);
      if (fit_rho) x0(i++) = std::log(h_mid) + (s ? jitter(rng) : 0.0);
      if (fit_nu) x0(i++) = std::log(opt.nu) + (s ? jitter(rng) : 0.0);
      if (fit_ng) x0(i++) = std::log(0.1 * g_max) + (s ? jitter(rng) : 0.0);
      SimplexOptions so;
      so.tol = 1e-12 * std::max(g_max * g_max, 1e-12);
      SimplexResult r = nelder_mead(objective, x0, so);
      if (r.value < best.value) best = r;
    }
    if (best.converged || best.value < std::numeric_limits<double>::max()) break;
  }
  if (best.value == std::numeric_limits<double>::max())
    throw estimation_error("fit_variogram_ls: no start converged to a finite objective");
  return unpack(best.x);
}

// GLS regression coefficients and their covariance for a known Sigma_yy.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> gls_beta(const Eigen::MatrixXd& Sigma_yy,
                                                            const Eigen::MatrixXd& B,
                                                            const Eigen::VectorXd& Y) {
  if (B.rows() != Sigma_yy.rows() || Y.size() != B.rows())
    throw domain_error("gls_beta: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma_yy);
  if (llt.info() != Eigen::Success)
    throw numerical_error("gls_beta: Sigma_yy is not positive definite");
  const Eigen::MatrixXd W = llt.solve(B);
  const Eigen::MatrixXd M = B.transpose() * W;
  Eigen::LDLT<Eigen::MatrixXd> mldlt(M);
  if (mldlt.info() != Eigen::Success || mldlt.vectorD().minCoeff() <= 0.0)
    throw estimation_error("gls_beta: B'Sigma^{-1}B is rank deficient");
  Eigen::VectorXd beta = mldlt.solve(B.transpose() * llt.solve(Y));
  Eigen::MatrixXd cov = mldlt.solve(Eigen::MatrixXd::Identity(B.cols(), B.cols()));
  return {beta, cov};
}

struct LikelihoodEvaluation {
  CovarianceModel model;
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd beta_hat;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Profile log-likelihood (beta eliminated). Non-PD Sigma(theta) yields a
// -inf sentinel rather than an exception so optimizers can step past it.
inline LikelihoodEvaluation profile_loglik(const CovarianceModel& model,
                                           const ObservationSet& obs) {
  LikelihoodEvaluation ev;
  ev.model = model;
  Eigen::MatrixXd Sigma = build_cov_matrix(model, obs.locs_y);
  Sigma.diagonal().array() += obs.sigma_eps2;
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success) return ev;

  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

  const Eigen::Index p = obs.B_y.cols();
  if (p == 0) {
    ev.value = -0.5 * logdet - 0.5 * obs.Y.dot(llt.solve(obs.Y));
    return ev;
  }
  const Eigen::MatrixXd W = llt.solve(obs.B_y);
  const Eigen::MatrixXd M = obs.B_y.transpose() * W;
  Eigen::LDLT<Eigen::MatrixXd> mldlt(M);
  if (mldlt.info() != Eigen::Success || mldlt.vectorD().minCoeff() <= 0.0) return ev;
  const Eigen::VectorXd SinvY = llt.solve(obs.Y);
  ev.beta_hat = mldlt.solve(obs.B_y.transpose() * SinvY);
  const double quad = obs.Y.dot(SinvY) - ev.beta_hat.dot(obs.B_y.transpose() * SinvY);
  ev.value = -0.5 * logdet - 0.5 * quad;
  return ev;
}

// REML objective: profile value minus 1/2 log|B'Sigma^{-1}B|.
inline LikelihoodEvaluation reml_loglik(const CovarianceModel& model,
                                        const ObservationSet& obs) {
  const Eigen::Index p = obs.B_y.cols();
  if (p < 1) throw domain_error("reml_loglik: requires at least one covariate");
  if (obs.n_obs() <= p)
    throw estimation_error("reml_loglik: no error contrasts remain (p >= n)");
  LikelihoodEvaluation ev = profile_loglik(model, obs);
  if (ev.value == kNegInf) return ev;

  Eigen::MatrixXd Sigma = build_cov_matrix(model, obs.locs_y);
  Sigma.diagonal().array() += obs.sigma_eps2;
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  const Eigen::MatrixXd M = obs.B_y.transpose() * llt.solve(obs.B_y);
  Eigen::LLT<Eigen::MatrixXd> mllt(M);
  if (mllt.info() != Eigen::Success) {
    ev.value = kNegInf;
    return ev;
  }
  ev.value -= mllt.matrixLLT().diagonal().array().log().sum();
  return ev;
}

enum class FitCriterion { ML, REML };

struct FitOptions {
  std::optional<double> fix_sigma2;
  std::optional<double> fix_rho;
  double nu = 0.5;
  bool free_nu = false;
  bool fit_nugget = false;
  std::optional<double> fix_nugget;
  // optional explicit initial values (defaults are data-driven)
  std::optional<double> init_sigma2, init_rho, init_nugget;
  int n_starts = 5;
  std::uint64_t seed = 0;
};

struct FitResult {
  CovarianceModel model;
  Eigen::VectorXd beta_hat;
  double value = kNegInf;
};

// Maximum-likelihood / REML covariance-parameter fit by multi-start simplex
// search over log-parameters.
inline FitResult fit(const ObservationSet& obs, CovFamily family, FitCriterion criterion,
                     const FitOptions& opt = {}) {
  const bool fit_s2 = !opt.fix_sigma2.has_value();
  const bool fit_rho = !opt.fix_rho.has_value();
  const bool fit_nu = family == CovFamily::Matern && opt.free_nu;
  const bool fit_ng = opt.fit_nugget && !opt.fix_nugget.has_value();
  const int n_free = fit_s2 + fit_rho + fit_nu + fit_ng;
  if (n_free == 0) throw domain_error("fit: no free parameters");

  auto unpack = [&](const Eigen::VectorXd& x) {
    CovarianceModel m;
    m.family = family;
    int i = 0;
    m.sigma2 = fit_s2 ? std::exp(x(i++)) : *opt.fix_sigma2;
    m.rho = fit_rho ? std::exp(x(i++)) : *opt.fix_rho;
    m.nu = fit_nu ? std::exp(x(i++)) : opt.nu;
    m.nugget = fit_ng ? std::exp(x(i++)) : (opt.fix_nugget ? *opt.fix_nugget : 0.0);
    return m;
  };

  auto objective = [&](const Eigen::VectorXd& x) {
    CovarianceModel m = unpack(x);
    const LikelihoodEvaluation ev =
        criterion == FitCriterion::ML ? profile_loglik(m, obs) : reml_loglik(m, obs);
    return ev.value == kNegInf ? std::numeric_limits<double>::max() : -ev.value;
  };

  // data-driven starting point
  const double var_y = (obs.Y.array() - obs.Y.mean()).square().sum() /
                       std::max<Eigen::Index>(obs.n_obs() - 1, 1);
  double dmax = 0.0;
  for (Eigen::Index i = 0; i < obs.n_obs(); ++i)
    for (Eigen::Index j = i + 1; j < obs.n_obs(); ++j)
      dmax = std::max(dmax, obs.locs_y.distance(i, j));

  const double s2_0 = opt.init_sigma2.value_or(std::max(var_y, 1e-10));
  const double rho_0 = opt.init_rho.value_or(std::max(0.25 * dmax, 1e-6));
  const double ng_0 = opt.init_nugget.value_or(0.1 * s2_0);

  auto rng = make_rng(opt.seed, 23);
  std::normal_distribution<double> jitter(0.0, 0.7);

  SimplexResult best;
  best.value = std::numeric_limits<double>::max();
  std::string trace;
  for (int s = 0; s < opt.n_starts; ++s) {
    Eigen::VectorXd x0(n_free);
    int i = 0;
    if (fit_s2) x0(i++) = std::log(s2_0) + (s ? jitter(rng) : 0.0);
    if (fit_rho) x0(i++) = std::log(rho_0) + (s ? jitter(rng) : 0.0);
    if (fit_nu) x0(i++) = std::log(opt.nu) + (s ? jitter(rng) : 0.0);
    if (fit_ng) x0(i++) = std::log(std::max(ng_0, 1e-10)) + (s ? jitter(rng) : 0.0);
    SimplexResult r = nelder_mead(objective, x0, {.max_iter = 4000, .tol = 1e-9});
    trace += "start" + std::to_string(s) + "=" + std::to_string(-r.value) + " ";
    if (r.value < best.value) best = r;
  }
  if (best.value == std::numeric_limits<double>::max())
    throw estimation_error("fit: all starts diverged; trace: " + trace);

  FitResult out;
  out.model = unpack(best.x);
  out.value = -best.value;
  if (obs.B_y.cols() > 0) {
    Eigen::MatrixXd Sigma = build_cov_matrix(out.model, obs.locs_y);
    Sigma.diagonal().array() += obs.sigma_eps2;
    out.beta_hat = gls_beta(Sigma, obs.B_y, obs.Y).first;
  }
  return out;
}

// Akaike / Schwartz information criteria.
inline std::pair<double, double> aic_bic(double loglik, int n_params, int n_obs) {
  if (n_obs < 1) throw domain_error("aic_bic: n_obs must be >= 1");
  const double aic = -2.0 * loglik + 2.0 * n_params;
  const double bic = -2.0 * loglik + std::log(static_cast<double>(n_obs)) * n_params;
  return {aic, bic};
}

struct PosteriorGridResult {
  Eigen::VectorXd weights;   // one per grid point, sums to 1
  Eigen::VectorXd mean;      // posterior-mixture mean at prediction sites
  Eigen::VectorXd variance;  // includes the between-theta spread of means
};

// Deterministic grid integration over covariance parameters: weights
// proportional to exp(loglik + logprior), moments by the law of total
// variance over the conditional kriging moments.
inline PosteriorGridResult posterior_grid(
    const GaussianFieldModel& fm, const ObservationSet& obs,
    const std::vector<CovarianceModel>& theta_grid,
    const std::function<double(const CovarianceModel&)>& log_prior) {
  if (theta_grid.empty()) throw domain_error("posterior_grid: empty parameter grid");
  const Eigen::Index K = static_cast<Eigen::Index>(theta_grid.size());

  Eigen::VectorXd logw(K);
  std::vector<KrigingResult> kr(theta_grid.size());
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& m = theta_grid[static_cast<std::size_t>(k)];
    const LikelihoodEvaluation ev = profile_loglik(m, obs);
    if (ev.value == kNegInf) {
      logw(k) = kNegInf;
      continue;
    }
    logw(k) = ev.value + log_prior(m);
    GaussianFieldModel fmk = fm;
    fmk.cov = m;
    kr[static_cast<std::size_t>(k)] = krige(fmk, obs);
  }

  const double mx = logw.maxCoeff();
  if (mx == kNegInf)
    throw estimation_error("posterior_grid: all grid weights underflow; rescale the grid");
  PosteriorGridResult out;
  out.weights = (logw.array() - mx).exp();
  out.weights.array() /= out.weights.sum();

  const Eigen::Index nx = fm.n_sites();
  out.mean = Eigen::VectorXd::Zero(nx);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(nx);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double wk = out.weights(k);
    if (wk == 0.0) continue;
    const auto& r = kr[static_cast<std::size_t>(k)];
    out.mean += wk * r.mean;
    second += wk * (r.variance + r.mean.cwiseProduct(r.mean));
  }
  out.variance = (second - out.mean.cwiseProduct(out.mean)).cwiseMax(0.0);
  return out;
}

}  // namespace geostat
