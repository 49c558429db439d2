#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "geostat/errors.hpp"

namespace geostat {

enum class CovFamily { Matern, Exponential, Gaussian, Spherical };

// Stationary isotropic covariance model r(h). The nugget is extra variance
// added on matrix diagonals only; r(0) itself equals sigma2.
struct CovarianceModel {
  CovFamily family = CovFamily::Exponential;
  double sigma2 = 1.0;  // field variance (sill)
  double rho = 1.0;     // range parameter
  double nu = 0.5;      // Matern smoothness, ignored by other families
  double nugget = 0.0;

  void validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw domain_error("CovarianceModel: sigma2 must be positive and finite");
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw domain_error("CovarianceModel: rho must be positive and finite");
    if (!(nugget >= 0.0) || !std::isfinite(nugget))
      throw domain_error("CovarianceModel: nugget must be non-negative and finite");
    if (family == CovFamily::Matern && (!(nu > 0.0) || !std::isfinite(nu)))
      throw domain_error("CovarianceModel: Matern requires nu > 0");
  }
};

inline const char* family_name(CovFamily f) {
  switch (f) {
    case CovFamily::Matern: return "matern";
    case CovFamily::Exponential: return "exponential";
    case CovFamily::Gaussian: return "gaussian";
    case CovFamily::Spherical: return "spherical";
  }
  return "?";
}

inline CovFamily family_from_name(const std::string& s) {
  if (s == "matern") return CovFamily::Matern;
  if (s == "exponential") return CovFamily::Exponential;
  if (s == "gaussian") return CovFamily::Gaussian;
  if (s == "spherical") return CovFamily::Spherical;
  throw domain_error("unknown covariance family: " + s);
}

// r(h) for the model's family. Matern handles the h -> 0 removable
// singularity analytically.
inline double covariance(const CovarianceModel& m, double h) {
  m.validate();
  if (!(h >= 0.0) || !std::isfinite(h))
    throw domain_error("covariance: lag h must be non-negative and finite");
  const double x = h / m.rho;
  switch (m.family) {
    case CovFamily::Exponential:
      return m.sigma2 * std::exp(-x);
    case CovFamily::Gaussian:
      return m.sigma2 * std::exp(-x * x);
    case CovFamily::Spherical:
      return x < 1.0 ? m.sigma2 * (1.0 - 1.5 * x + 0.5 * x * x * x) : 0.0;
    case CovFamily::Matern: {
      if (x < 1e-12) return m.sigma2;
      const double scale =
          std::pow(x, m.nu) * std::cyl_bessel_k(m.nu, x) /
          (std::tgamma(m.nu) * std::pow(2.0, m.nu - 1.0));
      return m.sigma2 * scale;
    }
  }
  throw domain_error("covariance: unknown family");
}

// gamma(h) = r(0) - r(h)
inline double semivariogram(const CovarianceModel& m, double h) {
  return m.sigma2 - covariance(m, h);
}

enum class TaperKind { Spherical, Wendland1, Wendland2 };

// Compactly supported taper T_theta(h): T(0) = 1 and T(h) = 0 for h >= theta.
struct TaperSpec {
  TaperKind kind = TaperKind::Spherical;
  double theta = 1.0;

  void validate() const {
    if (!(theta > 0.0) || !std::isfinite(theta))
      throw domain_error("TaperSpec: theta must be positive and finite");
  }
};

inline TaperKind taper_from_name(const std::string& s) {
  if (s == "spherical") return TaperKind::Spherical;
  if (s == "wendland1") return TaperKind::Wendland1;
  if (s == "wendland2") return TaperKind::Wendland2;
  throw domain_error("unknown taper kind: " + s);
}

inline double taper(const TaperSpec& t, double h) {
  t.validate();
  if (!(h >= 0.0) || !std::isfinite(h))
    throw domain_error("taper: lag h must be non-negative and finite");
  const double x = h / t.theta;
  if (x >= 1.0) return 0.0;
  const double u = 1.0 - x;
  switch (t.kind) {
    case TaperKind::Spherical:
      return u * u * (1.0 + 0.5 * x);
    case TaperKind::Wendland1:
      return u * u * u * u * (1.0 + 4.0 * x);
    case TaperKind::Wendland2:
      return u * u * u * u * u * u * (1.0 + 6.0 * x + 35.0 * x * x / 3.0);
  }
  throw domain_error("taper: unknown kind");
}

// Point locations in R^1 or R^2, stored as an n x d matrix.
struct LocationSet {
  Eigen::MatrixXd coords;

  LocationSet() = default;
  explicit LocationSet(Eigen::MatrixXd c) : coords(std::move(c)) {
    if (coords.cols() < 1 || coords.cols() > 2)
      throw domain_error("LocationSet: dimension must be 1 or 2");
    if (!coords.allFinite())
      throw domain_error("LocationSet: coordinates must be finite");
  }

  static LocationSet from_1d(const Eigen::VectorXd& x) {
    Eigen::MatrixXd c(x.size(), 1);
    c.col(0) = x;
    return LocationSet(c);
  }

  Eigen::Index size() const { return coords.rows(); }
  int dim() const { return static_cast<int>(coords.cols()); }

  double distance(Eigen::Index i, Eigen::Index j) const {
    return (coords.row(i) - coords.row(j)).norm();
  }
};

// Pairwise distance matrix between two location sets.
inline Eigen::MatrixXd distance_matrix(const LocationSet& a, const LocationSet& b) {
  if (a.dim() != b.dim())
    throw domain_error("distance_matrix: dimension mismatch");
  Eigen::MatrixXd D(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j)
      D(i, j) = (a.coords.row(i) - b.coords.row(j)).norm();
  return D;
}

// Dense covariance matrix; taper factor multiplies every entry, nugget is
// added on the diagonal only.
inline Eigen::MatrixXd build_cov_matrix(const CovarianceModel& m, const LocationSet& locs,
                                        const std::optional<TaperSpec>& tap = std::nullopt) {
  if (locs.size() == 0) throw domain_error("build_cov_matrix: empty location set");
  const Eigen::Index n = locs.size();
  Eigen::MatrixXd S(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    S(i, i) = m.sigma2 + m.nugget;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double h = locs.distance(i, j);
      double v = covariance(m, h);
      if (tap) v *= taper(*tap, h);
      S(i, j) = v;
      S(j, i) = v;
    }
  }
  return S;
}

// Sparse tapered covariance: entries with h >= theta are not stored.
inline Eigen::SparseMatrix<double> build_tapered_cov_matrix(const CovarianceModel& m,
                                                            const LocationSet& locs,
                                                            const TaperSpec& tap) {
  if (locs.size() == 0) throw domain_error("build_tapered_cov_matrix: empty location set");
  tap.validate();
  const Eigen::Index n = locs.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(4 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    trip.emplace_back(i, i, m.sigma2 + m.nugget);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double h = locs.distance(i, j);
      if (h >= tap.theta) continue;
      const double v = covariance(m, h) * taper(tap, h);
      trip.emplace_back(i, j, v);
      trip.emplace_back(j, i, v);
    }
  }
  Eigen::SparseMatrix<double> S(n, n);
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

struct PdCheck {
  bool is_pd = false;
  // Lower-triangular Cholesky factor, present when the strict factorization
  // succeeded.
  std::optional<Eigen::MatrixXd> factor;
};

// Symmetric PD test via factorization pivots. Round-off slack: smallest
// pivot may be as low as -1e-10 * trace(M)/n.
inline PdCheck check_positive_definite(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols())
    throw domain_error("check_positive_definite: matrix must be square");
  const double scale = M.cwiseAbs().maxCoeff();
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1.0))
    throw domain_error("check_positive_definite: matrix is not symmetric");

  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() == Eigen::Success)
    return {true, Eigen::MatrixXd(llt.matrixL())};

  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  const double tol = -1e-10 * M.trace() / static_cast<double>(M.rows());
  if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > tol)
    return {true, std::nullopt};
  return {false, std::nullopt};
}

}  // namespace geostat
