#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "geostat/errors.hpp"
#include "geostat/rng.hpp"

namespace geostat {

// Regular grid; `pad` extra boundary cells are added on every side during
// assembly and stripped from returned fields.
struct GridSpec {
  int n_rows = 3;
  int n_cols = 3;
  double h = 1.0;
  int pad = 0;

  void validate() const {
    if (n_rows < 3 || n_cols < 3) throw domain_error("GridSpec: need at least a 3x3 grid");
    if (!(h > 0.0)) throw domain_error("GridSpec: spacing h must be positive");
    if (pad < 0) throw domain_error("GridSpec: pad must be non-negative");
  }

  int total_rows() const { return n_rows + 2 * pad; }
  int total_cols() const { return n_cols + 2 * pad; }
  Eigen::Index n_total() const { return static_cast<Eigen::Index>(total_rows()) * total_cols(); }
  Eigen::Index n_interior() const { return static_cast<Eigen::Index>(n_rows) * n_cols; }

  // row-major node index on the padded grid
  Eigen::Index node(int r, int c) const {
    return static_cast<Eigen::Index>(r) * total_cols() + c;
  }
  // padded-grid index of interior node (r, c), 0-based within the interior
  Eigen::Index interior_node(int r, int c) const { return node(r + pad, c + pad); }

  std::vector<Eigen::Index> interior_indices() const {
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(n_interior()));
    for (int r = 0; r < n_rows; ++r)
      for (int c = 0; c < n_cols; ++c) idx.push_back(interior_node(r, c));
    return idx;
  }
};

struct SpdeParams {
  int alpha = 2;
  double kappa = 1.0;
  double tau = 1.0;

  void validate() const {
    if (alpha < 1) throw domain_error("SpdeParams: alpha must be a positive integer");
    if (!(kappa > 0.0)) throw domain_error("SpdeParams: kappa must be positive");
    if (!(tau > 0.0)) throw domain_error("SpdeParams: tau must be positive");
  }

  // Matern smoothness implied on R^2
  double smoothness() const { return alpha - 1.0; }
};

inline int default_pad(double kappa, double h) {
  return static_cast<int>(std::ceil(2.0 / (kappa * h)));
}

// Diagonal mass lump C~ (entries h^2) and the dimensionless 5-point
// stiffness G (interior pattern: center 4, cross neighbours -1), truncated
// at the padded boundary.
inline std::pair<Eigen::VectorXd, Eigen::SparseMatrix<double>> assemble_mass_stiffness(
    const GridSpec& grid) {
  grid.validate();
  const int R = grid.total_rows();
  const int C = grid.total_cols();
  const Eigen::Index N = grid.n_total();

  Eigen::VectorXd c_diag = Eigen::VectorXd::Constant(N, grid.h * grid.h);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 * N));
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      const Eigen::Index i = grid.node(r, c);
      trip.emplace_back(i, i, 4.0);
      if (r > 0) trip.emplace_back(i, grid.node(r - 1, c), -1.0);
      if (r < R - 1) trip.emplace_back(i, grid.node(r + 1, c), -1.0);
      if (c > 0) trip.emplace_back(i, grid.node(r, c - 1), -1.0);
      if (c < C - 1) trip.emplace_back(i, grid.node(r, c + 1), -1.0);
    }
  }
  Eigen::SparseMatrix<double> G(N, N);
  G.setFromTriplets(trip.begin(), trip.end());
  return {c_diag, G};
}

using SparseCholesky = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>;

// Sparse SPDE precision with its cached factorization. Immutable once built.
struct SparsePrecision {
  GridSpec grid;
  Eigen::SparseMatrix<double> Q;  // padded-grid node ordering, row-major grid layout
  std::shared_ptr<const SparseCholesky> factor;

  Eigen::Index size() const { return Q.rows(); }
};

// Assemble Q_alpha on the padded grid. K = kappa^2 C~ + G; the recursion is
// run at unit tau and the 1/tau^2 scaling is applied exactly once at the end.
inline SparsePrecision precision(const SpdeParams& params, const GridSpec& grid) {
  params.validate();
  auto [c_diag, G] = assemble_mass_stiffness(grid);
  const Eigen::Index N = grid.n_total();

  Eigen::SparseMatrix<double> K = G;
  for (Eigen::Index i = 0; i < N; ++i)
    K.coeffRef(i, i) += params.kappa * params.kappa * c_diag(i);

  const Eigen::VectorXd c_inv = c_diag.cwiseInverse();
  Eigen::SparseMatrix<double> Q;
  if (params.alpha == 1) {
    Q = K;
  } else {
    // Q_2 = K C^{-1} K; Q_a = K C^{-1} Q_{a-2} C^{-1} K (unit tau throughout)
    Eigen::SparseMatrix<double> KCinv = K * c_inv.asDiagonal();
    int a;
    if (params.alpha % 2 == 0) {
      Q = KCinv * K;
      a = 2;
    } else {
      Q = K;
      a = 1;
    }
    for (a += 2; a <= params.alpha; a += 2) Q = KCinv * (Q * c_inv.asDiagonal()) * K;
  }
  Q = Q / (params.tau * params.tau);
  Q.makeCompressed();

  auto solver = std::make_shared<SparseCholesky>();
  solver->compute(Q);
  if (solver->info() != Eigen::Success)
    throw numerical_error("precision: sparse factorization failed");
  return SparsePrecision{grid, std::move(Q), std::move(solver)};
}

// One draw from N(0, Q^{-1}) over all padded-grid nodes; solves triangular
// systems on the cached factor, never forming an inverse.
inline Eigen::VectorXd sample_full(const SparsePrecision& sp, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(sp.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = gauss(rng);
  // Q = P' L L' P  =>  x = P' L^{-T} z has covariance Q^{-1}
  Eigen::VectorXd y = sp.factor->matrixU().solve(z);
  return sp.factor->permutationPinv() * y;
}

// Interior-node draw (pad stripped).
inline Eigen::VectorXd sample(const SparsePrecision& sp, std::uint64_t seed) {
  const Eigen::VectorXd full = sample_full(sp, seed);
  const auto idx = sp.grid.interior_indices();
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = full(idx[i]);
  return out;
}

// diag(Q^{-1}) at the given padded-grid nodes via one column solve per node.
inline Eigen::VectorXd marginal_variances(const SparsePrecision& sp,
                                          const std::vector<Eigen::Index>& nodes) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(nodes.size()));
  Eigen::VectorXd e = Eigen::VectorXd::Zero(sp.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    e(nodes[k]) = 1.0;
    out(static_cast<Eigen::Index>(k)) = sp.factor->solve(e)(nodes[k]);
    e(nodes[k]) = 0.0;
  }
  return out;
}

struct GmrfConditional {
  Eigen::VectorXd mean;      // interior nodes, row-major
  Eigen::VectorXd variance;  // empty unless requested
};

// Conditional field given observations at interior grid nodes. For
// sigma_eps2 > 0 the noise is absorbed into the posterior precision
// Q + A'A / sigma_eps2; for exact observations the unobserved block is
// conditioned directly (X_u | X_o with precision Q_uu).
//
// Marginal variances cost one sparse solve per interior node.
inline GmrfConditional gmrf_conditional(const SparsePrecision& sp,
                                        const std::vector<Eigen::Index>& obs_nodes,
                                        const Eigen::VectorXd& y, double sigma_eps2,
                                        bool want_variances = true) {
  if (static_cast<Eigen::Index>(obs_nodes.size()) != y.size())
    throw domain_error("gmrf_conditional: node/value count mismatch");
  const auto interior = sp.grid.interior_indices();
  const Eigen::Index n_int = static_cast<Eigen::Index>(interior.size());

  GmrfConditional out;
  if (obs_nodes.empty()) {
    out.mean = Eigen::VectorXd::Zero(n_int);
    if (want_variances) out.variance = marginal_variances(sp, interior);
    return out;
  }

  // map interior-node numbering to padded-grid numbering
  std::vector<Eigen::Index> obs_full(obs_nodes.size());
  for (std::size_t k = 0; k < obs_nodes.size(); ++k) {
    if (obs_nodes[k] < 0 || obs_nodes[k] >= n_int)
      throw domain_error("gmrf_conditional: observation node out of range");
    obs_full[k] = interior[static_cast<std::size_t>(obs_nodes[k])];
  }

  if (sigma_eps2 > 0.0) {
    Eigen::SparseMatrix<double> Qp = sp.Q;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(sp.size());
    for (std::size_t k = 0; k < obs_full.size(); ++k) {
      Qp.coeffRef(obs_full[k], obs_full[k]) += 1.0 / sigma_eps2;
      b(obs_full[k]) += y(static_cast<Eigen::Index>(k)) / sigma_eps2;
    }
    SparseCholesky solver(Qp);
    if (solver.info() != Eigen::Success)
      throw numerical_error("gmrf_conditional: posterior factorization failed");
    const Eigen::VectorXd mean_full = solver.solve(b);
    out.mean.resize(n_int);
    for (Eigen::Index i = 0; i < n_int; ++i)
      out.mean(i) = mean_full(interior[static_cast<std::size_t>(i)]);
    if (want_variances) {
      out.variance.resize(n_int);
      Eigen::VectorXd e = Eigen::VectorXd::Zero(sp.size());
      for (Eigen::Index i = 0; i < n_int; ++i) {
        const Eigen::Index node = interior[static_cast<std::size_t>(i)];
        e(node) = 1.0;
        out.variance(i) = solver.solve(e)(node);
        e(node) = 0.0;
      }
    }
    return out;
  }

  // exact observations: X_u | X_o ~ N(-Q_uu^{-1} Q_uo x_o, Q_uu^{-1})
  std::vector<Eigen::Index> where(static_cast<std::size_t>(sp.size()), -1);
  for (std::size_t k = 0; k < obs_full.size(); ++k) {
    if (where[static_cast<std::size_t>(obs_full[k])] != -1)
      throw domain_error("gmrf_conditional: duplicate exact observations at one node");
    where[static_cast<std::size_t>(obs_full[k])] = static_cast<Eigen::Index>(k);
  }
  std::vector<Eigen::Index> unobserved;
  unobserved.reserve(static_cast<std::size_t>(sp.size()));
  std::vector<Eigen::Index> upos(static_cast<std::size_t>(sp.size()), -1);
  for (Eigen::Index i = 0; i < sp.size(); ++i)
    if (where[static_cast<std::size_t>(i)] == -1) {
      upos[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(unobserved.size());
      unobserved.push_back(i);
    }
  const Eigen::Index nu = static_cast<Eigen::Index>(unobserved.size());

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu);
  for (Eigen::Index col = 0; col < sp.Q.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(sp.Q, col); it; ++it) {
      const Eigen::Index i = it.row(), j = it.col();
      const Eigen::Index ui = upos[static_cast<std::size_t>(i)];
      if (ui < 0) continue;
      const Eigen::Index uj = upos[static_cast<std::size_t>(j)];
      if (uj >= 0)
        trip.emplace_back(ui, uj, it.value());
      else
        rhs(ui) -= it.value() * y(where[static_cast<std::size_t>(j)]);
    }
  }
  Eigen::SparseMatrix<double> Quu(nu, nu);
  Quu.setFromTriplets(trip.begin(), trip.end());
  SparseCholesky solver(Quu);
  if (solver.info() != Eigen::Success)
    throw numerical_error("gmrf_conditional: Q_uu factorization failed");
  const Eigen::VectorXd mu_u = solver.solve(rhs);

  out.mean.resize(n_int);
  if (want_variances) out.variance = Eigen::VectorXd::Zero(n_int);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(nu);
  for (Eigen::Index i = 0; i < n_int; ++i) {
    const Eigen::Index node = interior[static_cast<std::size_t>(i)];
    const Eigen::Index k = where[static_cast<std::size_t>(node)];
    if (k >= 0) {
      out.mean(i) = y(k);
    } else {
      const Eigen::Index ui = upos[static_cast<std::size_t>(node)];
      out.mean(i) = mu_u(ui);
      if (want_variances) {
        e(ui) = 1.0;
        out.variance(i) = solver.solve(e)(ui);
        e(ui) = 0.0;
      }
    }
  }
  return out;
}

// tau such that the mean interior marginal variance equals target_sigma2.
// Variance scales as tau^2, so one unit-tau reference solve suffices.
inline double calibrate_tau(double target_sigma2, int alpha, double kappa,
                            const GridSpec& grid) {
  if (!(target_sigma2 > 0.0)) throw domain_error("calibrate_tau: target variance must be > 0");
  SpdeParams params{alpha, kappa, 1.0};
  const SparsePrecision sp = precision(params, grid);
  const Eigen::VectorXd v = marginal_variances(sp, grid.interior_indices());
  const double v1 = v.mean();
  // Q scales as 1/tau^2, so the variance scales as tau^2 * v1
  return std::sqrt(target_sigma2 / v1);
}

}  // namespace geostat
