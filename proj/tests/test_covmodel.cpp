#include <catch2/catch_amalgamated.hpp>

#include "geostat/covmodel.hpp"
#include "geostat/rng.hpp"

using namespace geostat;

TEST_CASE("covariance at zero lag equals the sill") {
  CovarianceModel m{CovFamily::Exponential, 1.0, 1.0};
  CHECK(covariance(m, 0.0) == 1.0);
  m.family = CovFamily::Matern;
  m.nu = 1.7;
  CHECK(covariance(m, 0.0) == 1.0);
}

TEST_CASE("spherical covariance vanishes beyond the range") {
  CovarianceModel m{CovFamily::Spherical, 1.0, 2.0};
  CHECK(covariance(m, 3.0) == 0.0);
  CHECK(covariance(m, 2.0) == 0.0);
}

TEST_CASE("Matern nu=1/2 coincides with the exponential family") {
  CovarianceModel mat{CovFamily::Matern, 1.3, 0.8, 0.5};
  CovarianceModel expo{CovFamily::Exponential, 1.3, 0.8};
  for (int i = 0; i <= 200; ++i) {
    const double h = 10.0 * mat.rho * i / 200.0;
    CHECK(std::abs(covariance(mat, h) - covariance(expo, h)) <= 1e-10);
  }
}

TEST_CASE("semivariogram hand values and identity") {
  CovarianceModel sph{CovFamily::Spherical, 1.0, 1.0};
  // 1.5*0.5 - 0.5*0.125 = 0.6875
  CHECK(semivariogram(sph, 0.5) == Catch::Approx(0.6875).margin(1e-14));
  CHECK(semivariogram(sph, 0.0) == 0.0);

  CovarianceModel expo{CovFamily::Exponential, 1.0, 1.0};
  CHECK(std::abs(semivariogram(expo, 20.0) - 1.0) < 1e-8);

  // gamma(h) + r(h) = r(0) for every family
  for (CovFamily f : {CovFamily::Matern, CovFamily::Exponential, CovFamily::Gaussian,
                      CovFamily::Spherical}) {
    CovarianceModel m{f, 2.0, 1.5, 1.2};
    for (double h : {0.0, 0.3, 1.0, 2.7})
      CHECK(semivariogram(m, h) + covariance(m, h) == Catch::Approx(m.sigma2).margin(1e-12));
  }
}

TEST_CASE("covariance is monotone nonincreasing in the lag") {
  for (CovFamily f : {CovFamily::Matern, CovFamily::Exponential, CovFamily::Gaussian,
                      CovFamily::Spherical}) {
    CovarianceModel m{f, 1.0, 1.0, 1.5};
    double prev = covariance(m, 0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double cur = covariance(m, 5.0 * i / 1000.0);
      CHECK(cur <= prev + 1e-14);
      prev = cur;
    }
  }
}

TEST_CASE("taper hand values and compact support") {
  for (TaperKind k : {TaperKind::Spherical, TaperKind::Wendland1, TaperKind::Wendland2})
    CHECK(taper({k, 2.0}, 0.0) == 1.0);
  // (1-0.5)^2 * (1+0.25) = 0.3125
  CHECK(taper({TaperKind::Spherical, 1.0}, 0.5) == Catch::Approx(0.3125).margin(1e-14));
  CHECK(taper({TaperKind::Wendland1, 1.0}, 1.0) == 0.0);
  CHECK(taper({TaperKind::Wendland2, 1.0}, 1.5) == 0.0);
}

TEST_CASE("parameter validation rejects bad models") {
  CovarianceModel m{CovFamily::Exponential, -1.0, 1.0};
  CHECK_THROWS_AS(covariance(m, 1.0), domain_error);
  m.sigma2 = 1.0;
  m.rho = 0.0;
  CHECK_THROWS_AS(covariance(m, 1.0), domain_error);
  m.rho = 1.0;
  CHECK_THROWS_AS(covariance(m, -0.5), domain_error);
  CovarianceModel mt{CovFamily::Matern, 1.0, 1.0, 0.0};
  CHECK_THROWS_AS(covariance(mt, 1.0), domain_error);
  CHECK_THROWS_AS(taper({TaperKind::Spherical, 0.0}, 1.0), domain_error);
}

TEST_CASE("covariance matrix diagonal carries sill plus nugget") {
  CovarianceModel m{CovFamily::Exponential, 2.0, 1.0};
  m.nugget = 0.5;
  Eigen::VectorXd x(1);
  x << 0.0;
  const Eigen::MatrixXd S = build_cov_matrix(m, LocationSet::from_1d(x));
  REQUIRE(S.rows() == 1);
  CHECK(S(0, 0) == Catch::Approx(2.5).margin(1e-14));
}

TEST_CASE("collinear unit-spaced points give exponential off-diagonals") {
  CovarianceModel m{CovFamily::Exponential, 1.0, 1.0};
  Eigen::VectorXd x(3);
  x << 0.0, 1.0, 2.0;
  const Eigen::MatrixXd S = build_cov_matrix(m, LocationSet::from_1d(x));
  CHECK(S(0, 1) == Catch::Approx(std::exp(-1.0)).margin(1e-14));
  CHECK(S(0, 2) == Catch::Approx(std::exp(-2.0)).margin(1e-14));
  CHECK((S - S.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(check_positive_definite(S).is_pd);
}

TEST_CASE("taper at exactly theta zeroes the off-diagonal") {
  CovarianceModel m{CovFamily::Exponential, 1.0, 1.0};
  Eigen::VectorXd x(2);
  x << 0.0, 2.0;
  const TaperSpec t{TaperKind::Wendland1, 2.0};
  const Eigen::MatrixXd S = build_cov_matrix(m, LocationSet::from_1d(x), t);
  CHECK(S(0, 1) == 0.0);
}

TEST_CASE("tapered sparse matrix stores exactly the close pairs") {
  auto rng = make_rng(42);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  Eigen::MatrixXd c(120, 2);
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = unif(rng);
  LocationSet locs(c);

  CovarianceModel m{CovFamily::Matern, 1.0, 1.0, 1.0};
  const TaperSpec t{TaperKind::Wendland1, 1.5};
  const Eigen::SparseMatrix<double> S = build_tapered_cov_matrix(m, locs, t);

  Eigen::Index close_pairs = 0;
  for (Eigen::Index i = 0; i < locs.size(); ++i)
    for (Eigen::Index j = i + 1; j < locs.size(); ++j)
      if (locs.distance(i, j) < t.theta) ++close_pairs;
  CHECK(S.nonZeros() == locs.size() + 2 * close_pairs);

  const Eigen::MatrixXd dense = build_cov_matrix(m, locs, t);
  CHECK((Eigen::MatrixXd(S) - dense).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("positive definiteness check") {
  CHECK(check_positive_definite(Eigen::MatrixXd::Identity(3, 3)).is_pd);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  CHECK_FALSE(check_positive_definite(bad).is_pd);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.1, 1.0;
  CHECK_THROWS_AS(check_positive_definite(asym), domain_error);
}

TEST_CASE("quadratic forms of nugget models are strictly positive") {
  auto rng = make_rng(7);
  std::uniform_real_distribution<double> unif(0.0, 5.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd c(30, 2);
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = unif(rng);
  CovarianceModel m{CovFamily::Gaussian, 1.0, 1.0};
  m.nugget = 0.1;
  const Eigen::MatrixXd S = build_cov_matrix(m, LocationSet(c));
  CHECK(check_positive_definite(S).is_pd);
  for (int k = 0; k < 10000; ++k) {
    Eigen::VectorXd a(S.rows());
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = gauss(rng);
    CHECK(a.dot(S * a) > 0.0);
  }
}
