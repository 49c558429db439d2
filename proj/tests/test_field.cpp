#include <catch2/catch_amalgamated.hpp>

#include "geostat/field.hpp"
#include "geostat/rng.hpp"

using namespace geostat;

namespace {

LocationSet random_sites(Eigen::Index n, std::uint64_t seed, double span = 10.0) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, span);
  Eigen::MatrixXd c(n, 2);
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = unif(rng);
  return LocationSet(c);
}

}  // namespace

TEST_CASE("joint model blocks") {
  CovarianceModel m{CovFamily::Exponential, 1.0, 2.0};
  Eigen::VectorXd x(2);
  x << 0.0, 1.0;
  GaussianFieldModel fm(LocationSet::from_1d(x), Eigen::MatrixXd(2, 0), m);

  SECTION("noise-free identity observation reproduces the field covariance") {
    ObservationSet obs = ObservationSet::select(fm, {0, 1}, Eigen::VectorXd::Zero(2), 0.0);
    const JointGaussian jg = joint_model(fm, obs, Eigen::VectorXd(0));
    const Eigen::MatrixXd Sxx = build_cov_matrix(m, fm.locs_x);
    CHECK((jg.cov.bottomRightCorner(2, 2) - Sxx).cwiseAbs().maxCoeff() == 0.0);
    CHECK(jg.mean.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("single selected site picks the covariance column") {
    ObservationSet obs = ObservationSet::select(fm, {1}, Eigen::VectorXd::Zero(1), 0.3);
    const JointGaussian jg = joint_model(fm, obs, Eigen::VectorXd(0));
    const Eigen::MatrixXd Sxx = build_cov_matrix(m, fm.locs_x);
    CHECK((jg.cov.topRightCorner(2, 1) - Sxx.col(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(jg.cov(2, 2) == Catch::Approx(Sxx(1, 1) + 0.3).margin(1e-14));
  }
}

TEST_CASE("simulation determinism and degenerate variance") {
  LocationSet sites = random_sites(12, 3);
  Eigen::MatrixXd B = Eigen::MatrixXd::Ones(12, 1);
  Eigen::VectorXd beta(1);
  beta << 4.2;

  CovarianceModel m{CovFamily::Exponential, 1.0, 1.0};
  GaussianFieldModel fm(sites, B, m);
  const Eigen::VectorXd a = simulate(fm, beta, 99);
  const Eigen::VectorXd b = simulate(fm, beta, 99);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - simulate(fm, beta, 100)).cwiseAbs().maxCoeff() > 0.0);

  CovarianceModel tiny = m;
  tiny.sigma2 = 1e-16;
  GaussianFieldModel fm2(sites, B, tiny);
  CHECK((simulate(fm2, beta, 1).array() - 4.2).abs().maxCoeff() < 1e-6);
}

TEST_CASE("simulated sample covariance approaches the model covariance") {
  Eigen::VectorXd x(5);
  x << 0.0, 0.7, 1.5, 2.2, 4.0;
  LocationSet sites = LocationSet::from_1d(x);
  CovarianceModel m{CovFamily::Exponential, 1.0, 1.5};
  GaussianFieldModel fm(sites, Eigen::MatrixXd(5, 0), m);
  const Eigen::MatrixXd Sigma = build_cov_matrix(m, sites);

  const int R = 10000;
  Eigen::MatrixXd draws(R, 5);
  for (int r = 0; r < R; ++r) draws.row(r) = simulate(fm, Eigen::VectorXd(0), 1000 + r);
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  const Eigen::MatrixXd S = centered.transpose() * centered / (R - 1);
  CHECK(((S - Sigma).cwiseAbs().array() / Sigma.diagonal().maxCoeff()).maxCoeff() < 0.05);
}

TEST_CASE("exact interpolation at observed sites") {
  LocationSet sites = random_sites(15, 5);
  CovarianceModel m{CovFamily::Exponential, 1.0, 2.0};
  GaussianFieldModel fm(sites, Eigen::MatrixXd(15, 0), m);
  Eigen::VectorXd y(15);
  auto rng = make_rng(8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < 15; ++i) y(i) = gauss(rng);
  std::vector<Eigen::Index> all(15);
  for (int i = 0; i < 15; ++i) all[static_cast<std::size_t>(i)] = i;
  ObservationSet obs = ObservationSet::select(fm, all, y, 0.0);
  const KrigingResult kr = krige(fm, obs);
  CHECK((kr.mean - y).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(kr.variance.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("observations beyond the spherical range are uninformative") {
  CovarianceModel m{CovFamily::Spherical, 2.0, 1.0};
  Eigen::VectorXd px(2);
  px << 0.0, 0.5;
  GaussianFieldModel fm(LocationSet::from_1d(px), Eigen::MatrixXd(2, 0), m);
  Eigen::VectorXd ox(3), y(3);
  ox << 5.0, 6.0, 7.0;
  y << 1.0, -2.0, 0.5;
  ObservationSet obs(LocationSet::from_1d(ox), y, Eigen::MatrixXd(3, 0), 0.1);
  const KrigingResult kr = krige(fm, obs);
  CHECK(kr.mean.cwiseAbs().maxCoeff() < 1e-14);
  CHECK((kr.variance.array() - 2.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("universal kriging matches dense joint-Gaussian conditioning") {
  auto rng = make_rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);

  LocationSet px = random_sites(8, 21);
  LocationSet oy = random_sites(25, 22);
  Eigen::MatrixXd Bx(8, 2), By(25, 2);
  Bx.col(0).setOnes();
  Bx.col(1) = px.coords.col(0);
  By.col(0).setOnes();
  By.col(1) = oy.coords.col(0);

  CovarianceModel m{CovFamily::Matern, 1.5, 2.0, 1.0};
  GaussianFieldModel fm(px, Bx, m);
  Eigen::VectorXd y(25);
  for (Eigen::Index i = 0; i < 25; ++i) y(i) = gauss(rng) + 0.3 * oy.coords(i, 0);
  ObservationSet obs(oy, y, By, 0.2);

  const KrigingResult kr = krige(fm, obs);

  // oracle: condition the explicit joint Gaussian at beta = beta_hat, then
  // add the universal-kriging coefficient-uncertainty term computed from
  // explicit inverses
  const JointGaussian jg = joint_model(fm, obs, kr.beta_hat);
  const Eigen::MatrixXd Syy = jg.cov.bottomRightCorner(25, 25);
  const Eigen::MatrixXd Sxy = jg.cov.topRightCorner(8, 25);
  const Eigen::MatrixXd Syyinv = Syy.inverse();
  const Eigen::VectorXd mean_o =
      jg.mean.head(8) + Sxy * Syyinv * (y - jg.mean.tail(25));
  const Eigen::MatrixXd cond = jg.cov.topLeftCorner(8, 8) - Sxy * Syyinv * Sxy.transpose();
  const Eigen::MatrixXd Minv = (By.transpose() * Syyinv * By).inverse();
  const Eigen::MatrixXd U = Bx - Sxy * Syyinv * By;
  Eigen::VectorXd var_o(8);
  for (Eigen::Index i = 0; i < 8; ++i)
    var_o(i) = cond(i, i) + U.row(i) * Minv * U.row(i).transpose();

  CHECK((kr.mean - mean_o).cwiseAbs().maxCoeff() < 1e-8 * y.cwiseAbs().maxCoeff());
  CHECK((kr.variance - var_o).cwiseAbs().maxCoeff() < 1e-8 * var_o.maxCoeff());
}

TEST_CASE("kriging mean is linear in the data and variance ignores it") {
  LocationSet px = random_sites(6, 31);
  LocationSet oy = random_sites(10, 32);
  CovarianceModel m{CovFamily::Exponential, 1.0, 2.0};
  GaussianFieldModel fm(px, Eigen::MatrixXd(6, 0), m);

  auto rng = make_rng(33);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd y1(10), y2(10);
  for (Eigen::Index i = 0; i < 10; ++i) { y1(i) = gauss(rng); y2(i) = gauss(rng); }

  auto kr_of = [&](const Eigen::VectorXd& y) {
    ObservationSet obs(oy, y, Eigen::MatrixXd(10, 0), 0.1);
    return krige(fm, obs);
  };
  const KrigingResult a = kr_of(y1), b = kr_of(y2), s = kr_of(y1 + 2.0 * y2);
  CHECK((s.mean - (a.mean + 2.0 * b.mean)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.variance - b.variance).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((kr_of(Eigen::VectorXd::Zero(10)).mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("collinear covariates are rejected with the offending columns") {
  LocationSet px = random_sites(4, 41);
  LocationSet oy = random_sites(12, 42);
  Eigen::MatrixXd Bx(4, 2), By(12, 2);
  Bx.col(0).setOnes();
  Bx.col(1).setOnes();
  By.col(0).setOnes();
  By.col(1).setOnes();
  CovarianceModel m{CovFamily::Exponential, 1.0, 1.0};
  GaussianFieldModel fm(px, Bx, m);
  ObservationSet obs(oy, Eigen::VectorXd::Ones(12), By, 0.1);
  CHECK_THROWS_AS(krige(fm, obs), estimation_error);
}
