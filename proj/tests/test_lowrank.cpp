#include <catch2/catch_amalgamated.hpp>

#include "geostat/lowrank.hpp"
#include "geostat/rng.hpp"

using namespace geostat;

namespace {

LocationSet grid_1d(int n, double lo, double hi) {
  return LocationSet::from_1d(Eigen::VectorXd::LinSpaced(n, lo, hi));
}

}  // namespace

TEST_CASE("bisquare basis hand values") {
  LocationSet centers = grid_1d(3, 0.0, 2.0);  // spacing 1 -> radius 1.5
  Eigen::VectorXd s(3);
  s << 0.0, 0.75, 1.5;  // at a center, at r/2 from it, at r from it
  const Eigen::MatrixXd Psi = bisquare_basis(LocationSet::from_1d(s), {centers});
  CHECK(Psi(0, 0) == 1.0);
  CHECK(Psi(1, 0) == Catch::Approx(0.5625).margin(1e-14));  // (1 - 0.25)^2
  CHECK(Psi(2, 0) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("FRK coefficient covariance round trip") {
  auto rng = make_rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 40, r = 5;
  Eigen::MatrixXd Psi(n, r);
  for (Eigen::Index i = 0; i < Psi.size(); ++i) Psi(i) = gauss(rng);
  Eigen::MatrixXd A(r, r);
  for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = gauss(rng);
  const Eigen::MatrixXd Sw = A * A.transpose();
  const Eigen::VectorXd eps = Eigen::VectorXd::Constant(n, 0.3);

  const Eigen::MatrixXd S = Psi * Sw * Psi.transpose() + Eigen::MatrixXd(eps.asDiagonal());
  const Eigen::MatrixXd est = frk_estimate_sigma_w(S, Psi, eps);
  CHECK((est - Sw).cwiseAbs().maxCoeff() < 1e-8 * Sw.cwiseAbs().maxCoeff());

  SECTION("pure-noise input yields the zero matrix") {
    const Eigen::MatrixXd z =
        frk_estimate_sigma_w(Eigen::MatrixXd(eps.asDiagonal()), Psi, eps);
    CHECK(z.cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("indefinite raw estimate is clipped to the PSD cone") {
    Eigen::MatrixXd S2 = S - 5.0 * Sw.cwiseAbs().maxCoeff() *
                                  Psi.col(0) * Psi.col(0).transpose() /
                                  Psi.col(0).squaredNorm();
    S2 = 0.5 * (S2 + S2.transpose().eval());
    const Eigen::MatrixXd est2 = frk_estimate_sigma_w(S2, Psi, eps);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(est2);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }

  SECTION("rank-deficient basis is rejected") {
    Eigen::MatrixXd bad = Psi;
    bad.col(1) = bad.col(0);
    CHECK_THROWS_AS(frk_estimate_sigma_w(S, bad, eps), estimation_error);
  }
}

TEST_CASE("low-rank kriging matches the dense formula") {
  auto rng = make_rng(6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 200, r = 10;
  Eigen::MatrixXd Psi(n, r);
  for (Eigen::Index i = 0; i < Psi.size(); ++i) Psi(i) = gauss(rng);
  Eigen::MatrixXd A(r, r);
  for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = gauss(rng);
  const Eigen::MatrixXd Sw = A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(r, r);
  Eigen::VectorXd Y(n);
  for (Eigen::Index i = 0; i < n; ++i) Y(i) = gauss(rng);

  LowRankModel model(Psi, Psi, Sw, 0.5);
  const LowRankPrediction pred = lowrank_krige(model, Y);
  CHECK_FALSE(pred.pseudo_inverse_path);

  const Eigen::MatrixXd Syy =
      Psi * Sw * Psi.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd dense = Psi * Sw * Psi.transpose() * Syy.inverse() * Y;
  CHECK((pred.mean - dense).cwiseAbs().maxCoeff() < 1e-8 * dense.cwiseAbs().maxCoeff());

  SECTION("zero data predicts zero") {
    CHECK(lowrank_krige(model, Eigen::VectorXd::Zero(n)).mean.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("zero coefficient covariance predicts zero") {
    LowRankModel flat(Psi, Psi, Eigen::MatrixXd::Zero(r, r), 0.5);
    const LowRankPrediction p = lowrank_krige(flat, Y);
    CHECK(p.pseudo_inverse_path);
    CHECK(p.mean.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("singular coefficient covariance still matches the dense formula") {
    Eigen::MatrixXd Sing = Sw;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sing);
    Eigen::VectorXd d = es.eigenvalues();
    d(0) = 0.0;  // exactly singular
    Sing = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
    LowRankModel m2(Psi, Psi, Sing, 0.5);
    const LowRankPrediction p = lowrank_krige(m2, Y);
    const Eigen::MatrixXd S2 =
        Psi * m2.Sigma_w * Psi.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd dense2 = Psi * m2.Sigma_w * Psi.transpose() * S2.inverse() * Y;
    CHECK((p.mean - dense2).cwiseAbs().maxCoeff() < 1e-8 * dense2.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("predictive process variance behavior") {
  CovarianceModel parent{CovFamily::Exponential, 1.4, 2.0};
  LocationSet knots = grid_1d(6, 0.0, 10.0);
  const KnotSet ks = make_knot_set(parent, knots);

  Eigen::VectorXd s(4);
  s << 0.0, 2.0, 3.1, 7.7;  // first two coincide with knots
  LocationSet sites = LocationSet::from_1d(s);
  const LowRankModel pp = predictive_process(parent, ks, sites);

  const Eigen::MatrixXd implied = pp.Psi * pp.Sigma_w * pp.Psi.transpose();
  CHECK(implied(0, 0) == Catch::Approx(parent.sigma2).margin(1e-8));
  CHECK(implied(1, 1) == Catch::Approx(parent.sigma2).margin(1e-8));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(implied(i, i) <= parent.sigma2 + 1e-10);

  SECTION("sites beyond a spherical parent's range have zero variance") {
    CovarianceModel sph{CovFamily::Spherical, 1.0, 1.0};
    const KnotSet ks2 = make_knot_set(sph, grid_1d(4, 0.0, 3.0));
    Eigen::VectorXd far(1);
    far << 50.0;
    const LowRankModel pp2 = predictive_process(sph, ks2, LocationSet::from_1d(far));
    const Eigen::MatrixXd v = pp2.Psi * pp2.Sigma_w * pp2.Psi.transpose();
    CHECK(v(0, 0) == 0.0);
  }

  SECTION("duplicate knots are rejected") {
    Eigen::VectorXd kx(3);
    kx << 0.0, 0.0, 1.0;
    const KnotSet bad = make_knot_set(parent, LocationSet::from_1d(kx));
    CHECK_THROWS_AS(predictive_process(parent, bad, sites), domain_error);
  }
}

TEST_CASE("predictive-process variance dominance on random instances") {
  for (int rep = 0; rep < 20; ++rep) {
    auto rng = make_rng(100 + rep);
    std::uniform_real_distribution<double> unif(0.0, 10.0);
    Eigen::MatrixXd kc(8, 1), sc(15, 1);
    for (Eigen::Index i = 0; i < kc.size(); ++i) kc(i) = unif(rng);
    for (Eigen::Index i = 0; i < sc.size(); ++i) sc(i) = unif(rng);
    CovarianceModel parent{CovFamily::Matern, 1.0 + 0.1 * rep, 1.5, 1.0};
    const KnotSet ks = make_knot_set(parent, LocationSet(kc));
    const LowRankModel pp = predictive_process(parent, ks, LocationSet(sc));
    const Eigen::MatrixXd implied = pp.Psi * pp.Sigma_w * pp.Psi.transpose();
    CHECK(implied.diagonal().maxCoeff() <= parent.sigma2 + 1e-10);
  }
}

TEST_CASE("convolution basis cell averages") {
  ConvolutionKernel k;
  k.family = KernelFamily::Gaussian;
  k.scale = 0.5;
  k.amplitude = 1.0;
  k.grid.centers = grid_1d(41, -10.0, 10.0);
  k.grid.cell_dx = 0.5;

  SECTION("site/kernel dimension and coverage guards") {
    Eigen::MatrixXd two(1, 2);
    two << 0.0, 0.0;
    CHECK_THROWS_AS(convolution_basis(k, LocationSet(two)), domain_error);
    Eigen::VectorXd outside(1);
    outside << 9.9;  // needs 3 * scale margin
    CHECK_THROWS_AS(convolution_basis(k, LocationSet::from_1d(outside)), domain_error);
  }

  SECTION("coefficient variances equal the cell measure") {
    Eigen::VectorXd s(2);
    s << 0.0, 1.0;
    const LowRankModel m = convolution_basis(k, LocationSet::from_1d(s));
    CHECK((m.Sigma_w - 0.5 * Eigen::MatrixXd::Identity(41, 41)).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("implied covariance of a Gaussian kernel is Gaussian with scale sqrt(2)") {
    // r(h) = amplitude^2 * scale * sqrt(pi) * exp(-h^2 / (4 scale^2))
    ConvolutionKernel fine = k;
    fine.grid.centers = grid_1d(321, -10.0, 10.0);
    fine.grid.cell_dx = 0.0625;
    Eigen::VectorXd s(2);
    s << 0.0, 0.8;
    const LowRankModel m = convolution_basis(fine, LocationSet::from_1d(s));
    const Eigen::MatrixXd implied = m.Psi * m.Sigma_w * m.Psi.transpose();
    const double r0 = k.scale * std::sqrt(M_PI);
    const double rh = r0 * std::exp(-0.8 * 0.8 / (4.0 * k.scale * k.scale));
    CHECK(implied(0, 0) == Catch::Approx(r0).epsilon(0.01));
    CHECK(implied(0, 1) == Catch::Approx(rh).epsilon(0.01));

    // refinement convergence: halving the cell size shrinks the change
    ConvolutionKernel coarse = k;
    coarse.grid.centers = grid_1d(81, -10.0, 10.0);
    coarse.grid.cell_dx = 0.25;
    ConvolutionKernel mid = k;
    mid.grid.centers = grid_1d(161, -10.0, 10.0);
    mid.grid.cell_dx = 0.125;
    auto implied01 = [&](const ConvolutionKernel& kk) {
      const LowRankModel mm = convolution_basis(kk, LocationSet::from_1d(s));
      return (mm.Psi * mm.Sigma_w * mm.Psi.transpose())(0, 1);
    };
    const double c0 = implied01(coarse), c1 = implied01(mid), c2 = implied(0, 1);
    CHECK(std::abs(c2 - c1) < std::abs(c1 - c0) + 1e-14);
  }
}

TEST_CASE("kernel self-convolution via the Fourier identity") {
  ConvolutionKernel k;
  k.family = KernelFamily::Gaussian;
  k.scale = 0.5;
  k.grid.centers = grid_1d(5, -1.0, 1.0);
  k.grid.cell_dx = 0.5;

  const Eigen::VectorXd lags = Eigen::VectorXd::LinSpaced(17, 0.0, 2.0);
  const Eigen::VectorXd r = kernel_self_convolution(k, lags);

  SECTION("matches the closed-form Gaussian self-convolution") {
    for (Eigen::Index i = 0; i < lags.size(); ++i) {
      const double expect = k.scale * std::sqrt(M_PI) *
                            std::exp(-lags(i) * lags(i) / (4.0 * k.scale * k.scale));
      CHECK(r(i) == Catch::Approx(expect).epsilon(1e-5));
    }
  }

  SECTION("r(0) equals the integral of the squared kernel") {
    // int exp(-x^2/scale^2) dx = scale * sqrt(pi)
    CHECK(r(0) == Catch::Approx(k.scale * std::sqrt(M_PI)).epsilon(1e-5));
  }

  SECTION("even symmetry") {
    Eigen::VectorXd pm(2);
    pm << -1.0, 1.0;
    // negative lags are looked up by absolute value; spot-check consistency
    Eigen::VectorXd sym = kernel_self_convolution(k, Eigen::VectorXd::LinSpaced(9, -2.0, 2.0));
    for (Eigen::Index i = 0; i < 4; ++i)
      CHECK(sym(i) == Catch::Approx(sym(8 - i)).margin(1e-12));
  }

  SECTION("non-uniform lag grids are rejected") {
    Eigen::VectorXd bad(3);
    bad << 0.0, 0.5, 1.7;
    CHECK_THROWS_AS(kernel_self_convolution(k, bad), domain_error);
  }

  SECTION("2-D kernel") {
    ConvolutionKernel k2 = k;
    Eigen::MatrixXd c(4, 2);
    c << 0, 0, 1, 0, 0, 1, 1, 1;
    k2.grid.centers = LocationSet(c);
    const Eigen::VectorXd lags2 = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
    const Eigen::VectorXd r2 = kernel_self_convolution(k2, lags2);
    // 2-D Gaussian: (k*k)(h) = pi scale^2 exp(-h^2/(4 scale^2))
    for (Eigen::Index i = 0; i < lags2.size(); ++i) {
      const double expect = M_PI * k.scale * k.scale *
                            std::exp(-lags2(i) * lags2(i) / (4.0 * k.scale * k.scale));
      CHECK(r2(i) == Catch::Approx(expect).epsilon(1e-4));
    }
  }
}

TEST_CASE("binned empirical covariance") {
  SECTION("constant replicates give the zero matrix") {
    Eigen::MatrixXd reps = Eigen::MatrixXd::Constant(5, 3, 2.0);
    Eigen::VectorXd edges(2);
    edges << 0.0, 10.0;
    const Eigen::MatrixXd S = empirical_cov_binned(reps, grid_1d(3, 0.0, 2.0), edges);
    CHECK(S.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("iid replicates give a near-identity diagonal bin") {
    auto rng = make_rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd reps(10000, 4);
    for (Eigen::Index i = 0; i < reps.size(); ++i) reps(i) = gauss(rng);
    Eigen::VectorXd edges(2);
    edges << 0.0, 10.0;
    const Eigen::MatrixXd S = empirical_cov_binned(reps, grid_1d(4, 0.0, 3.0), edges);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(std::abs(S(i, i) - 1.0) < 0.05);
  }

  SECTION("pairs sharing a bin share the averaged value") {
    Eigen::MatrixXd reps(3, 3);
    reps << 1, 2, 0, 2, 1, 1, 0, 3, 2;
    Eigen::VectorXd x(3);
    x << 0.0, 1.0, 2.1;
    Eigen::VectorXd edges(2);
    edges << 0.5, 1.5;  // pairs (0,1) and (1,2) in one bin; (0,2) unbinned
    const Eigen::MatrixXd S = empirical_cov_binned(reps, LocationSet::from_1d(x), edges);
    CHECK(S(0, 1) == S(1, 2));
    CHECK(S(0, 1) == S(1, 0));
    CHECK(S(0, 0) == S(1, 1));  // diagonal bin averages all variances
  }

  SECTION("fewer than two replicates is an error") {
    Eigen::VectorXd edges(2);
    edges << 0.0, 10.0;
    CHECK_THROWS_AS(
        empirical_cov_binned(Eigen::MatrixXd::Zero(1, 3), grid_1d(3, 0.0, 2.0), edges),
        domain_error);
  }
}
