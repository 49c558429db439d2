#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <vector>

namespace geostat {

struct SimplexOptions {
  int max_iter = 4000;
  double tol = 1e-9;       // stop when objective spread over the simplex < tol
  double init_step = 0.5;  // initial simplex edge length per coordinate
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Nelder-Mead minimization. Unconstrained; callers optimize over
// log-transformed parameters to enforce positivity.
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, const SimplexOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> val(n + 1);
  for (int i = 0; i < n; ++i) pts[i + 1](i) += opt.init_step;
  for (int i = 0; i <= n; ++i) val[i] = f(pts[i]);

  auto order = [&] {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
    std::vector<Eigen::VectorXd> p2(n + 1);
    std::vector<double> v2(n + 1);
    for (int i = 0; i <= n; ++i) { p2[i] = pts[idx[i]]; v2[i] = val[idx[i]]; }
    pts.swap(p2);
    val.swap(v2);
  };

  SimplexResult res;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    order();
    if (val[n] - val[0] < opt.tol) { res.converged = true; break; }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[i];
    centroid /= n;

    const Eigen::VectorXd xr = centroid + (centroid - pts[n]);
    const double fr = f(xr);
    if (fr < val[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[n]);
      const double fe = f(xe);
      if (fe < fr) { pts[n] = xe; val[n] = fe; }
      else { pts[n] = xr; val[n] = fr; }
    } else if (fr < val[n - 1]) {
      pts[n] = xr;
      val[n] = fr;
    } else {
      const bool outside = fr < val[n];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                         : Eigen::VectorXd(centroid - 0.5 * (centroid - pts[n]));
      const double fc = f(xc);
      if (fc < (outside ? fr : val[n])) {
        pts[n] = xc;
        val[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          val[i] = f(pts[i]);
        }
      }
    }
  }
  order();
  res.x = pts[0];
  res.value = val[0];
  res.iterations = it;
  return res;
}

}  // namespace geostat
