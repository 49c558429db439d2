#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "geostat/covmodel.hpp"
#include "geostat/errors.hpp"

namespace geostat {

// X ~ Psi w with w ~ N(0, Sigma_w); observations Y = Psi_y w + eps.
struct LowRankModel {
  Eigen::MatrixXd Psi;      // n_x x r, prediction-site rows
  Eigen::MatrixXd Psi_y;    // n_y x r
  Eigen::MatrixXd Sigma_w;  // r x r, symmetric PSD
  double sigma_eps2 = 0.0;

  LowRankModel() = default;
  LowRankModel(Eigen::MatrixXd psi, Eigen::MatrixXd psi_y, Eigen::MatrixXd sw, double s2)
      : Psi(std::move(psi)), Psi_y(std::move(psi_y)), Sigma_w(std::move(sw)), sigma_eps2(s2) {
    const Eigen::Index r = Sigma_w.rows();
    if (Sigma_w.cols() != r || Psi.cols() != r || Psi_y.cols() != r)
      throw domain_error("LowRankModel: basis/coefficient dimension mismatch");
    Sigma_w = 0.5 * (Sigma_w + Sigma_w.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma_w);
    const double tol = 1e-10 * std::max(Sigma_w.trace() / r, 1e-300);
    if (es.eigenvalues().minCoeff() < -tol)
      throw domain_error("LowRankModel: Sigma_w is not positive semi-definite");
    if (es.eigenvalues().minCoeff() < 0.0)
      Sigma_w = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                es.eigenvectors().transpose();
  }

  Eigen::Index rank() const { return Sigma_w.rows(); }
};

// Bisquare columns for multiresolution center grids. Radius at level l is
// 1.5 times the shortest center spacing of that level.
inline Eigen::MatrixXd bisquare_basis(const LocationSet& sites,
                                      const std::vector<LocationSet>& resolutions) {
  Eigen::Index r = 0;
  std::vector<double> radius(resolutions.size());
  for (std::size_t l = 0; l < resolutions.size(); ++l) {
    const auto& centers = resolutions[l];
    if (centers.size() < 2)
      throw domain_error("bisquare_basis: a resolution needs >= 2 centers to define spacing");
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < centers.size(); ++i)
      for (Eigen::Index j = i + 1; j < centers.size(); ++j)
        dmin = std::min(dmin, centers.distance(i, j));
    if (!(dmin > 0.0)) throw domain_error("bisquare_basis: duplicate centers in a resolution");
    radius[l] = 1.5 * dmin;
    r += centers.size();
  }

  Eigen::MatrixXd Psi = Eigen::MatrixXd::Zero(sites.size(), r);
  Eigen::Index col = 0;
  for (std::size_t l = 0; l < resolutions.size(); ++l) {
    const auto& centers = resolutions[l];
    for (Eigen::Index c = 0; c < centers.size(); ++c, ++col) {
      for (Eigen::Index i = 0; i < sites.size(); ++i) {
        const double h = (sites.coords.row(i) - centers.coords.row(c)).norm();
        if (h <= radius[l]) {
          const double t = 1.0 - (h / radius[l]) * (h / radius[l]);
          Psi(i, col) = t * t;
        }
      }
    }
  }
  return Psi;
}

// Fixed-rank-kriging coefficient covariance from a binned empirical
// covariance: Sigma_w = R^{-1} Q' (S - Sigma_eps) Q R^{-T}, then projected
// onto the PSD cone by eigenvalue clipping.
inline Eigen::MatrixXd frk_estimate_sigma_w(const Eigen::MatrixXd& Sigma_yy_hat,
                                            const Eigen::MatrixXd& Psi_binned,
                                            const Eigen::VectorXd& sigma_eps_diag) {
  const Eigen::Index n = Psi_binned.rows();
  const Eigen::Index r = Psi_binned.cols();
  if (Sigma_yy_hat.rows() != n || Sigma_yy_hat.cols() != n || sigma_eps_diag.size() != n)
    throw domain_error("frk_estimate_sigma_w: dimension mismatch");

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Psi_binned);
  const Eigen::MatrixXd Qthin =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const double rmax = R.diagonal().cwiseAbs().maxCoeff();
  if (R.diagonal().cwiseAbs().minCoeff() < 1e-12 * rmax)
    throw estimation_error("frk_estimate_sigma_w: basis matrix is rank deficient");

  Eigen::MatrixXd centered = Sigma_yy_hat;
  centered.diagonal() -= sigma_eps_diag;
  const Eigen::MatrixXd mid = Qthin.transpose() * centered * Qthin;
  const Eigen::MatrixXd raw =
      R.triangularView<Eigen::Upper>().solve(
          R.triangularView<Eigen::Upper>().solve(mid.transpose()).transpose());

  Eigen::MatrixXd sym = 0.5 * (raw + raw.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
         es.eigenvectors().transpose();
}

struct LowRankPrediction {
  Eigen::VectorXd mean;
  bool pseudo_inverse_path = false;  // Sigma_w was singular
};

// Kriging mean through the matrix inversion lemma: only r x r systems are
// factorized, never an n x n inverse.
inline LowRankPrediction lowrank_krige(const LowRankModel& model, const Eigen::VectorXd& Y) {
  if (Y.size() != model.Psi_y.rows())
    throw domain_error("lowrank_krige: Y length must match observed basis rows");
  if (!(model.sigma_eps2 > 0.0))
    throw domain_error("lowrank_krige: sigma_eps2 must be positive");
  const double s2 = model.sigma_eps2;

  LowRankPrediction out;
  Eigen::LDLT<Eigen::MatrixXd> wldlt(model.Sigma_w);
  const double dmax = wldlt.vectorD().cwiseAbs().maxCoeff();
  if (wldlt.info() == Eigen::Success &&
      wldlt.vectorD().minCoeff() > 1e-12 * std::max(dmax, 1e-300)) {
    // alpha = (Psi_y Sw Psi_y' + s2 I)^{-1} Y via the r x r system
    const Eigen::MatrixXd M =
        model.Psi_y.transpose() * model.Psi_y / s2 +
        wldlt.solve(Eigen::MatrixXd::Identity(model.rank(), model.rank()));
    const Eigen::VectorXd t = model.Psi_y.transpose() * Y / s2;
    const Eigen::VectorXd alpha = (Y - model.Psi_y * M.llt().solve(t)) / s2;
    out.mean = model.Psi * (model.Sigma_w * (model.Psi_y.transpose() * alpha));
    return out;
  }

  // Singular Sigma_w: factor Sw = V D V' and fold D^{1/2} into the basis,
  // which avoids Sw^{-1} entirely.
  out.pseudo_inverse_path = true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.Sigma_w);
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d(i) > 1e-14 * std::max(d.maxCoeff(), 1e-300)) keep.push_back(i);
  if (keep.empty()) {
    out.mean = Eigen::VectorXd::Zero(model.Psi.rows());
    return out;
  }
  Eigen::MatrixXd Phi_y(model.Psi_y.rows(), static_cast<Eigen::Index>(keep.size()));
  Eigen::MatrixXd Phi_x(model.Psi.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const double sq = std::sqrt(d(keep[k]));
    Phi_y.col(static_cast<Eigen::Index>(k)) = model.Psi_y * es.eigenvectors().col(keep[k]) * sq;
    Phi_x.col(static_cast<Eigen::Index>(k)) = model.Psi * es.eigenvectors().col(keep[k]) * sq;
  }
  const Eigen::Index q = Phi_y.cols();
  const Eigen::MatrixXd M =
      Phi_y.transpose() * Phi_y + s2 * Eigen::MatrixXd::Identity(q, q);
  const Eigen::VectorXd t = Phi_y.transpose() * Y;
  const Eigen::VectorXd alpha = (Y - Phi_y * M.llt().solve(t)) / s2;
  out.mean = Phi_x * (Phi_y.transpose() * alpha);
  return out;
}

struct KnotSet {
  LocationSet knots;
  Eigen::MatrixXd Sigma_star;  // r x r parent covariance among knots
};

inline KnotSet make_knot_set(const CovarianceModel& parent, const LocationSet& knots) {
  KnotSet ks;
  ks.knots = knots;
  const Eigen::Index r = knots.size();
  ks.Sigma_star.resize(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j)
      ks.Sigma_star(i, j) = covariance(parent, knots.distance(i, j));
  return ks;
}

// Regular knot grid over the bounding box of a location set.
inline LocationSet make_knot_grid(const LocationSet& locs, int nx, int ny = 1) {
  if (nx < 2 || (locs.dim() == 2 && ny < 2))
    throw domain_error("make_knot_grid: need at least 2 knots per axis");
  const Eigen::VectorXd lo = locs.coords.colwise().minCoeff();
  const Eigen::VectorXd hi = locs.coords.colwise().maxCoeff();
  if (locs.dim() == 1) {
    Eigen::MatrixXd c(nx, 1);
    c.col(0) = Eigen::VectorXd::LinSpaced(nx, lo(0), hi(0));
    return LocationSet(c);
  }
  Eigen::MatrixXd c(static_cast<Eigen::Index>(nx) * ny, 2);
  Eigen::Index k = 0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j, ++k) {
      c(k, 0) = lo(0) + (hi(0) - lo(0)) * i / (nx - 1);
      c(k, 1) = lo(1) + (hi(1) - lo(1)) * j / (ny - 1);
    }
  return LocationSet(c);
}

// Predictive process: condition the parent process on its knot values. The
// induced covariance is Sigma_u' Sigma*^{-1} Sigma_u.
inline LowRankModel predictive_process(const CovarianceModel& parent, const KnotSet& knots,
                                       const LocationSet& sites) {
  Eigen::LLT<Eigen::MatrixXd> llt(knots.Sigma_star);
  if (llt.info() != Eigen::Success)
    throw domain_error("predictive_process: Sigma* is singular (duplicate knots?)");
  const Eigen::Index n = sites.size();
  const Eigen::Index r = knots.knots.size();
  Eigen::MatrixXd C(n, r);  // C(i,j) = cov(site_i, knot_j)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < r; ++j)
      C(i, j) = covariance(parent, (sites.coords.row(i) - knots.knots.coords.row(j)).norm());
  const Eigen::MatrixXd Psi = llt.solve(C.transpose()).transpose();
  return LowRankModel(Psi, Psi, knots.Sigma_star, 0.0);
}

enum class KernelFamily { Gaussian, Matern };

// Regular grid of kernel centers with a common cell measure.
struct KernelGrid {
  LocationSet centers;
  double cell_dx = 1.0;
  double cell_dy = 1.0;  // ignored in 1-D

  double cell_measure(int dim) const { return dim == 1 ? cell_dx : cell_dx * cell_dy; }
};

struct ConvolutionKernel {
  KernelFamily family = KernelFamily::Gaussian;
  double scale = 1.0;
  double amplitude = 1.0;
  double nu_k = 1.0;  // Matern kernel smoothness
  KernelGrid grid;

  void validate() const {
    if (!(scale > 0.0)) throw domain_error("ConvolutionKernel: scale must be positive");
    if (family == KernelFamily::Matern && !(nu_k > 0.0))
      throw domain_error("ConvolutionKernel: Matern kernel needs nu_k > 0 (singular otherwise)");
  }

  int dim() const { return grid.centers.dim(); }

  // implied field smoothness for a Matern kernel: nu_c = 2 nu_k + d/2
  double implied_smoothness() const { return 2.0 * nu_k + 0.5 * dim(); }

  double operator()(double h) const {
    if (family == KernelFamily::Gaussian)
      return amplitude * std::exp(-h * h / (2.0 * scale * scale));
    const double x = h / scale;
    if (x < 1e-12) return amplitude;
    return amplitude * std::pow(x, nu_k) * std::cyl_bessel_k(nu_k, x) /
           (std::tgamma(nu_k) * std::pow(2.0, nu_k - 1.0));
  }

  // radius beyond which the kernel is negligible at double precision
  double support_radius() const {
    return family == KernelFamily::Gaussian ? 8.5 * scale : 25.0 * scale;
  }
};

// Low-rank model from the discretized process convolution: Psi entries are
// cell-averaged kernel values, w_i independent with variance |I_i|.
inline LowRankModel convolution_basis(const ConvolutionKernel& kernel, const LocationSet& sites) {
  kernel.validate();
  if (sites.dim() != kernel.dim())
    throw domain_error("convolution_basis: site/kernel dimension mismatch");
  const auto& centers = kernel.grid.centers;
  const Eigen::VectorXd lo_c = centers.coords.colwise().minCoeff();
  const Eigen::VectorXd hi_c = centers.coords.colwise().maxCoeff();
  const Eigen::VectorXd lo_s = sites.coords.colwise().minCoeff();
  const Eigen::VectorXd hi_s = sites.coords.colwise().maxCoeff();
  for (int d = 0; d < sites.dim(); ++d) {
    if (lo_c(d) > lo_s(d) - 3.0 * kernel.scale || hi_c(d) < hi_s(d) + 3.0 * kernel.scale)
      throw domain_error(
          "convolution_basis: kernel grid must cover the sites with margin >= 3 * scale");
  }

  const int dim = kernel.dim();
  const int nsub = 4;  // midpoint subcells per axis
  const double dx = kernel.grid.cell_dx;
  const double dy = kernel.grid.cell_dy;
  const Eigen::Index n = sites.size();
  const Eigen::Index r = centers.size();

  Eigen::MatrixXd Psi(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      double acc = 0.0;
      if (dim == 1) {
        for (int a = 0; a < nsub; ++a) {
          const double sx = centers.coords(j, 0) + dx * ((a + 0.5) / nsub - 0.5);
          acc += kernel(std::abs(sx - sites.coords(i, 0)));
        }
        acc /= nsub;
      } else {
        for (int a = 0; a < nsub; ++a) {
          for (int b = 0; b < nsub; ++b) {
            const double sx = centers.coords(j, 0) + dx * ((a + 0.5) / nsub - 0.5);
            const double sy = centers.coords(j, 1) + dy * ((b + 0.5) / nsub - 0.5);
            acc += kernel(std::hypot(sx - sites.coords(i, 0), sy - sites.coords(i, 1)));
          }
        }
        acc /= nsub * nsub;
      }
      Psi(i, j) = acc;
    }
  }
  const double measure = kernel.grid.cell_measure(dim);
  Eigen::MatrixXd Sw = measure * Eigen::MatrixXd::Identity(r, r);
  return LowRankModel(Psi, Psi, Sw, 0.0);
}

namespace detail {

// Midpoint-sampled circular self-convolution via the DFT, 1-D.
inline std::vector<double> self_conv_1d(const ConvolutionKernel& k, double L, double delta) {
  const Eigen::Index m = 2 * static_cast<Eigen::Index>(std::llround(L / delta));
  const Eigen::Index n = 2 * m;  // zero padding against wraparound
  std::vector<double> in(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double pos = -L + static_cast<double>(i) * delta;
    in[static_cast<std::size_t>(i)] = k(std::abs(pos));
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, in);
  for (auto& c : spec) c *= c;
  std::vector<double> out;
  fft.inv(out, spec);
  for (auto& v : out) v *= delta;
  return out;  // index j corresponds to lag position -2L + j*delta
}

// 2-D version on an n x n grid; returns the slice along the first axis at
// zero offset in the second axis.
inline std::vector<double> self_conv_2d(const ConvolutionKernel& k, double L, double delta) {
  const Eigen::Index m = 2 * static_cast<Eigen::Index>(std::llround(L / delta));
  const Eigen::Index n = 2 * m;
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double px = -L + static_cast<double>(i) * delta;
      const double py = -L + static_cast<double>(j) * delta;
      A(i, j) = k(std::hypot(px, py));
    }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> row(static_cast<std::size_t>(n)),
      spec(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = A(i, j);
    fft.fwd(spec, row);
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = spec[static_cast<std::size_t>(j)];
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = A(i, j);
    fft.fwd(spec, row);
    for (Eigen::Index i = 0; i < n; ++i) A(i, j) = spec[static_cast<std::size_t>(i)];
  }
  A = A.cwiseProduct(A);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = A(i, j);
    fft.inv(spec, row);
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = spec[static_cast<std::size_t>(j)];
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = A(i, j);
    fft.inv(spec, row);
    for (Eigen::Index i = 0; i < n; ++i) A(i, j) = spec[static_cast<std::size_t>(i)];
  }
  // lag (h, 0): second-axis index for offset zero is 2L/delta
  const Eigen::Index j0 = 2 * static_cast<Eigen::Index>(std::llround(L / delta));
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = A(i, j0).real() * delta * delta;
  return out;  // index i corresponds to lag (-2L + i*delta, 0)
}

}  // namespace detail

// r(h) = (k * k)(h) on a uniform lag grid, evaluated through the Fourier
// identity F(r) = F(k)^2. Sampling is refined until doubling the resolution
// moves no value by more than 1e-6 relative.
inline Eigen::VectorXd kernel_self_convolution(const ConvolutionKernel& kernel,
                                               const Eigen::VectorXd& lag_grid) {
  kernel.validate();
  if (lag_grid.size() < 1) throw domain_error("kernel_self_convolution: empty lag grid");
  double spacing = lag_grid.size() > 1 ? lag_grid(1) - lag_grid(0) : kernel.scale;
  for (Eigen::Index i = 1; i + 1 < lag_grid.size(); ++i)
    if (std::abs((lag_grid(i + 1) - lag_grid(i)) - spacing) > 1e-9 * std::max(spacing, 1.0))
      throw domain_error("kernel_self_convolution: lag grid must be uniform");
  const double max_lag = lag_grid.cwiseAbs().maxCoeff();

  const int dim = kernel.dim();
  const double support = kernel.support_radius();
  // grid half-width; sampling must land exactly on the lag points
  double delta = kernel.scale / 4.0;
  if (spacing > 0.0) {
    int halvings = 0;
    double d = spacing;
    while (d > kernel.scale / 4.0 && halvings < 30) { d *= 0.5; ++halvings; }
    delta = d;
  }
  const Eigen::Index max_samples = dim == 1 ? (1 << 22) : 3000;

  auto eval = [&](double dlt) {
    const double L = std::ceil((max_lag + support) / dlt) * dlt;
    if (2.0 * static_cast<double>(std::llround(L / dlt)) * 2.0 > static_cast<double>(max_samples))
      throw domain_error("kernel_self_convolution: lag grid too large for the kernel scale");
    const std::vector<double> conv =
        dim == 1 ? detail::self_conv_1d(kernel, L, dlt) : detail::self_conv_2d(kernel, L, dlt);
    Eigen::VectorXd r(lag_grid.size());
    for (Eigen::Index i = 0; i < lag_grid.size(); ++i) {
      const double pos = std::abs(lag_grid(i));
      const double fid = (pos + 2.0 * L) / dlt;
      const Eigen::Index id = static_cast<Eigen::Index>(std::llround(fid));
      if (std::abs(fid - static_cast<double>(id)) > 1e-6)
        throw domain_error("kernel_self_convolution: lag grid not commensurate with sampling");
      r(i) = conv[static_cast<std::size_t>(id % static_cast<Eigen::Index>(conv.size()))];
    }
    return r;
  };

  Eigen::VectorXd prev = eval(delta);
  for (int iter = 0; iter < 12; ++iter) {
    delta *= 0.5;
    if (2.0 * (max_lag + support) / delta > static_cast<double>(max_samples)) break;
    Eigen::VectorXd cur = eval(delta);
    const double ref = cur.cwiseAbs().maxCoeff();
    if ((cur - prev).cwiseAbs().maxCoeff() < 1e-6 * std::max(ref, 1e-300)) return cur;
    prev = cur;
  }
  return prev;
}

// Binned empirical covariance over replicated observations: per-pair sample
// covariances averaged within distance bins; the diagonal forms its own bin.
inline Eigen::MatrixXd empirical_cov_binned(const Eigen::MatrixXd& replicates,
                                            const LocationSet& locs,
                                            const Eigen::VectorXd& bin_edges) {
  const Eigen::Index T = replicates.rows();
  const Eigen::Index n = replicates.cols();
  if (T < 2) throw domain_error("empirical_cov_binned: need at least 2 replicates");
  if (n != locs.size()) throw domain_error("empirical_cov_binned: column/location mismatch");

  const Eigen::RowVectorXd mean = replicates.colwise().mean();
  const Eigen::MatrixXd centered = replicates.rowwise() - mean;
  const Eigen::MatrixXd S = centered.transpose() * centered / static_cast<double>(T - 1);

  const Eigen::Index nb = bin_edges.size() - 1;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(nb + 1);  // slot nb is the diagonal
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(nb + 1);
  Eigen::MatrixXi bin = Eigen::MatrixXi::Constant(n, n, -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    bin(i, i) = static_cast<int>(nb);
    sum(nb) += S(i, i);
    cnt(nb) += 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double h = locs.distance(i, j);
      if (h <= bin_edges(0) || h > bin_edges(nb)) continue;
      Eigen::Index k = 0;
      while (h > bin_edges(k + 1)) ++k;
      bin(i, j) = bin(j, i) = static_cast<int>(k);
      sum(k) += S(i, j);
      cnt(k) += 1.0;
    }
  }
  Eigen::MatrixXd out = S;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (bin(i, j) >= 0) out(i, j) = sum(bin(i, j)) / cnt(bin(i, j));
  return out;
}

}  // namespace geostat
