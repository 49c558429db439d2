// Batch front end: each subcommand wires input tables and a key=value config
// into one pipeline run, prints a key=value summary on stdout and writes any
// rasters/tables under --out. Deterministic per (inputs, config, seed).
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "geostat/geostat.hpp"

namespace gs = geostat;
namespace fs = std::filesystem;

namespace {

constexpr int kDenseMaxDefault = 3000;

struct RunContext {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool force_dense = false;

  gs::Config cfg;

  void load(const std::set<std::string>& allowed) {
    if (!config_path.empty()) cfg = gs::load_config(config_path, allowed);
    fs::create_directories(out_dir);
  }

  std::string require(const std::string& key) const {
    auto it = cfg.find(key);
    if (it == cfg.end()) throw gs::parse_error("config: missing required key '" + key + "'");
    return it->second;
  }
  std::string get(const std::string& key, const std::string& dflt) const {
    auto it = cfg.find(key);
    return it == cfg.end() ? dflt : it->second;
  }
  double num(const std::string& key) const { return std::stod(require(key)); }
  double num(const std::string& key, double dflt) const {
    auto it = cfg.find(key);
    return it == cfg.end() ? dflt : std::stod(it->second);
  }
  int integer(const std::string& key, int dflt) const {
    auto it = cfg.find(key);
    return it == cfg.end() ? dflt : std::stoi(it->second);
  }
  std::string out_path(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
};

void emit(const std::string& key, const std::string& value) {
  std::cout << key << "=" << value << "\n";
}
void emit(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  emit(key, std::string(buf));
}
void emit(const std::string& key, Eigen::Index value) { emit(key, std::to_string(value)); }

class Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

gs::CovarianceModel model_from_config(const RunContext& ctx) {
  gs::CovarianceModel m;
  m.family = gs::family_from_name(ctx.get("family", "exponential"));
  m.sigma2 = ctx.num("sigma2", 1.0);
  m.rho = ctx.num("rho", 1.0);
  m.nu = ctx.num("nu", 0.5);
  m.nugget = ctx.num("nugget", 0.0);
  m.validate();
  return m;
}

gs::GridSpec grid_from_config(const RunContext& ctx) {
  gs::GridSpec g;
  g.n_rows = ctx.integer("grid_rows", 16);
  g.n_cols = ctx.integer("grid_cols", 16);
  g.h = ctx.num("cellsize", 1.0);
  g.validate();
  return g;
}

// prediction sites at the cell centers of a grid, row 0 northernmost so the
// vector layout matches the ascii-grid writer
gs::LocationSet grid_sites(const gs::GridSpec& g, double x0, double y0) {
  Eigen::MatrixXd c(g.n_interior(), 2);
  Eigen::Index k = 0;
  for (int r = 0; r < g.n_rows; ++r)
    for (int col = 0; col < g.n_cols; ++col, ++k) {
      c(k, 0) = x0 + (col + 0.5) * g.h;
      c(k, 1) = y0 + (g.n_rows - r - 0.5) * g.h;
    }
  return gs::LocationSet(c);
}

gs::ObservationSet observations_from_config(const RunContext& ctx) {
  const gs::PointTable table = gs::load_points(ctx.require("points"));
  const Eigen::Index col = table.value_column(ctx.get("value", "value"));
  return gs::ObservationSet(table.locations(), table.values.col(col),
                            Eigen::MatrixXd::Ones(table.size(), 1), ctx.num("sigma_eps2", 0.0));
}

void check_dense_guard(const RunContext& ctx, Eigen::Index n) {
  const int n_max = ctx.integer("n_dense_max", kDenseMaxDefault);
  if (n > n_max && !ctx.force_dense)
    throw gs::domain_error("dense path refused: " + std::to_string(n) + " observations exceed " +
                           "n_dense_max=" + std::to_string(n_max) +
                           " (pass --force-dense to override)");
}

void write_table(const std::string& path, const std::vector<std::string>& header,
                 const Eigen::MatrixXd& rows) {
  std::ofstream out(path);
  if (!out) throw gs::parse_error("cannot open output file: " + path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  char buf[64];
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.10g", rows(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(RunContext& ctx) {
  ctx.load({"family", "sigma2", "rho", "nu", "nugget", "grid_rows", "grid_cols", "cellsize",
            "x0", "y0", "mean"});
  Stopwatch watch;
  const gs::CovarianceModel m = model_from_config(ctx);
  const gs::GridSpec grid = grid_from_config(ctx);
  check_dense_guard(ctx, grid.n_interior());

  const gs::LocationSet sites = grid_sites(grid, ctx.num("x0", 0.0), ctx.num("y0", 0.0));
  const double mean = ctx.num("mean", 0.0);
  Eigen::MatrixXd B = Eigen::MatrixXd::Ones(sites.size(), 1);
  Eigen::VectorXd beta(1);
  beta << mean;
  gs::GaussianFieldModel fm(sites, B, m);
  const Eigen::VectorXd z = gs::simulate(fm, beta, ctx.seed);

  gs::write_ascii_grid(z, grid, ctx.out_path("field.asc"), ctx.num("x0", 0.0), ctx.num("y0", 0.0));
  Eigen::MatrixXd table(sites.size(), 3);
  table.leftCols(2) = sites.coords;
  table.col(2) = z;
  {
    std::ofstream out(ctx.out_path("points.csv"));
    out << "id,x,y,value\n";
    char buf[96];
    for (Eigen::Index i = 0; i < sites.size(); ++i) {
      std::snprintf(buf, sizeof buf, "p%lld,%.10g,%.10g,%.10g", static_cast<long long>(i),
                    table(i, 0), table(i, 1), table(i, 2));
      out << buf << "\n";
    }
  }
  emit("n", sites.size());
  emit("family", gs::family_name(m.family));
  emit("field_grid", ctx.out_path("field.asc"));
  emit("points", ctx.out_path("points.csv"));
  emit("wall_ms", watch.ms());
  return 0;
}

// ---------------------------------------------------------------- variogram

int cmd_variogram(RunContext& ctx) {
  ctx.load({"points", "value", "sigma_eps2", "n_bins", "max_lag", "family", "weighted",
            "fit_nugget"});
  Stopwatch watch;
  const gs::ObservationSet obs = observations_from_config(ctx);
  const gs::EmpiricalVariogram ev =
      gs::empirical_variogram(obs, ctx.integer("n_bins", 15), ctx.num("max_lag", 0.0));

  Eigen::MatrixXd rows(ev.bin_centers.size(), 3);
  rows.col(0) = ev.bin_centers;
  rows.col(1) = ev.gamma_hat;
  rows.col(2) = ev.pair_count.cast<double>();
  write_table(ctx.out_path("variogram.csv"), {"lag", "gamma", "pairs"}, rows);

  gs::VariogramFitOptions vo;
  vo.weighted = ctx.get("weighted", "1") != "0";
  vo.fit_nugget = ctx.get("fit_nugget", "0") != "0";
  const gs::CovarianceModel fit =
      gs::fit_variogram_ls(ev, gs::family_from_name(ctx.get("family", "exponential")), vo);
  emit("n", obs.n_obs());
  emit("sigma2", fit.sigma2);
  emit("rho", fit.rho);
  emit("nugget", fit.nugget);
  emit("table", ctx.out_path("variogram.csv"));
  emit("wall_ms", watch.ms());
  return 0;
}

// ---------------------------------------------------------------- fit

int cmd_fit(RunContext& ctx) {
  ctx.load({"points", "value", "sigma_eps2", "family", "criterion", "fit_nugget", "nu",
            "n_starts", "n_dense_max"});
  Stopwatch watch;
  const gs::ObservationSet obs = observations_from_config(ctx);
  check_dense_guard(ctx, obs.n_obs());

  const gs::FitCriterion crit =
      ctx.get("criterion", "ml") == "reml" ? gs::FitCriterion::REML : gs::FitCriterion::ML;
  gs::FitOptions opt;
  opt.fit_nugget = ctx.get("fit_nugget", "0") != "0";
  opt.nu = ctx.num("nu", 0.5);
  opt.n_starts = ctx.integer("n_starts", 5);
  opt.seed = ctx.seed;
  const gs::FitResult r =
      gs::fit(obs, gs::family_from_name(ctx.get("family", "exponential")), crit, opt);

  const int n_params = 2 + (opt.fit_nugget ? 1 : 0);
  const auto [aic, bic] = gs::aic_bic(r.value, n_params, static_cast<int>(obs.n_obs()));
  emit("n", obs.n_obs());
  emit("criterion", ctx.get("criterion", "ml"));
  emit("sigma2", r.model.sigma2);
  emit("rho", r.model.rho);
  emit("nugget", r.model.nugget);
  if (r.beta_hat.size() > 0) emit("beta0", r.beta_hat(0));
  emit("loglik", r.value);
  emit("aic", aic);
  emit("bic", bic);
  emit("wall_ms", watch.ms());
  return 0;
}

// ---------------------------------------------------------------- krige

int cmd_krige(RunContext& ctx, std::optional<gs::TaperSpec> taper = std::nullopt) {
  std::set<std::string> keys = {"points",    "value",    "sigma_eps2", "family", "sigma2",
                                "rho",       "nu",       "nugget",     "grid_rows",
                                "grid_cols", "cellsize", "x0",         "y0",
                                "n_dense_max"};
  if (taper) keys.insert({"taper", "theta"});
  ctx.load(keys);
  Stopwatch watch;
  const gs::CovarianceModel m = model_from_config(ctx);
  gs::ObservationSet obs = observations_from_config(ctx);
  check_dense_guard(ctx, obs.n_obs());

  const gs::GridSpec grid = grid_from_config(ctx);
  const double x0 = ctx.num("x0", 0.0), y0 = ctx.num("y0", 0.0);
  const gs::LocationSet sites = grid_sites(grid, x0, y0);

  if (taper) {
    taper->kind = gs::taper_from_name(ctx.get("taper", "wendland1"));
    taper->theta = ctx.num("theta", 1.0);
    taper->validate();
    // sparse observation covariance; mean and variances through the sparse
    // factor, cross-covariances tapered consistently
    Eigen::SparseMatrix<double> Syy = gs::build_tapered_cov_matrix(m, obs.locs_y, *taper);
    for (Eigen::Index i = 0; i < Syy.rows(); ++i) Syy.coeffRef(i, i) += obs.sigma_eps2;
    gs::SparseCholesky solver(Syy);
    if (solver.info() != Eigen::Success)
      throw gs::numerical_error("taper-krige: tapered covariance failed to factorize");

    const Eigen::Index nx = sites.size(), ny = obs.n_obs();
    Eigen::MatrixXd Sxy(nx, ny);
    for (Eigen::Index i = 0; i < nx; ++i)
      for (Eigen::Index j = 0; j < ny; ++j) {
        const double h = (sites.coords.row(i) - obs.locs_y.coords.row(j)).norm();
        Sxy(i, j) = h < taper->theta ? gs::covariance(m, h) * gs::taper(*taper, h) : 0.0;
      }
    const Eigen::VectorXd w = solver.solve(obs.Y);
    const Eigen::VectorXd mean = Sxy * w;
    const Eigen::MatrixXd C = solver.solve(Sxy.transpose());
    Eigen::VectorXd var(nx);
    for (Eigen::Index i = 0; i < nx; ++i)
      var(i) = std::max(m.sigma2 + m.nugget - Sxy.row(i).dot(C.col(i)), 0.0);

    gs::write_ascii_grid(mean, grid, ctx.out_path("mean.asc"), x0, y0);
    gs::write_ascii_grid(var, grid, ctx.out_path("variance.asc"), x0, y0);
    emit("taper", ctx.get("taper", "wendland1"));
    emit("theta", taper->theta);
    emit("nonzeros", static_cast<Eigen::Index>(Syy.nonZeros()));
  } else {
    gs::GaussianFieldModel fm(sites, Eigen::MatrixXd::Ones(sites.size(), 1), m);
    const gs::KrigingResult kr = gs::krige(fm, obs);
    gs::write_ascii_grid(kr.mean, grid, ctx.out_path("mean.asc"), x0, y0);
    gs::write_ascii_grid(kr.variance, grid, ctx.out_path("variance.asc"), x0, y0);
    emit("beta0", kr.beta_hat(0));
  }
  emit("n_obs", obs.n_obs());
  emit("n_pred", sites.size());
  emit("mean_grid", ctx.out_path("mean.asc"));
  emit("variance_grid", ctx.out_path("variance.asc"));
  emit("wall_ms", watch.ms());
  return 0;
}

// ---------------------------------------------------------------- lowrank

int cmd_lowrank(RunContext& ctx) {
  ctx.load({"points", "value", "sigma_eps2", "family", "sigma2", "rho", "nu", "nugget",
            "knots_x", "knots_y", "grid_rows", "grid_cols", "cellsize", "x0", "y0"});
  Stopwatch watch;
  const gs::CovarianceModel parent = model_from_config(ctx);
  const gs::ObservationSet obs = observations_from_config(ctx);
  if (!(obs.sigma_eps2 > 0.0))
    throw gs::domain_error("lowrank-krige: sigma_eps2 must be positive");

  const gs::GridSpec grid = grid_from_config(ctx);
  const double x0 = ctx.num("x0", 0.0), y0 = ctx.num("y0", 0.0);
  const gs::LocationSet sites = grid_sites(grid, x0, y0);

  const gs::LocationSet knot_grid = gs::make_knot_grid(
      obs.locs_y, ctx.integer("knots_x", 8), ctx.integer("knots_y", 8));
  const gs::KnotSet ks = gs::make_knot_set(parent, knot_grid);

  // basis at prediction sites and observed sites from one conditioning
  const gs::LowRankModel at_sites = gs::predictive_process(parent, ks, sites);
  const gs::LowRankModel at_obs = gs::predictive_process(parent, ks, obs.locs_y);
  gs::LowRankModel model(at_sites.Psi, at_obs.Psi, ks.Sigma_star, obs.sigma_eps2);
  const gs::LowRankPrediction pred = gs::lowrank_krige(model, obs.Y);

  gs::write_ascii_grid(pred.mean, grid, ctx.out_path("mean.asc"), x0, y0);
  emit("n_obs", obs.n_obs());
  emit("rank", model.rank());
  emit("pseudo_inverse", pred.pseudo_inverse_path ? "1" : "0");
  emit("mean_grid", ctx.out_path("mean.asc"));
  emit("wall_ms", watch.ms());
  return 0;
}

// ---------------------------------------------------------------- spde

int cmd_spde(RunContext& ctx) {
  ctx.load({"points", "value", "sigma_eps2", "alpha", "kappa", "tau", "target_sigma2",
            "grid_rows", "grid_cols", "cellsize", "pad", "x0", "y0"});
  Stopwatch watch;
  gs::GridSpec grid = grid_from_config(ctx);
  const double x0 = ctx.num("x0", 0.0), y0 = ctx.num("y0", 0.0);
  const int alpha = ctx.integer("alpha", 2);
  const double kappa = ctx.num("kappa", 1.0);
  grid.pad = ctx.integer("pad", gs::default_pad(kappa, grid.h));

  double tau = ctx.num("tau", 1.0);
  if (ctx.cfg.count("target_sigma2"))
    tau = gs::calibrate_tau(ctx.num("target_sigma2"), alpha, kappa, grid);
  const gs::SparsePrecision sp = gs::precision({alpha, kappa, tau}, grid);

  // observations snap to the nearest interior node
  const gs::PointTable table = gs::load_points(ctx.require("points"));
  const Eigen::Index vcol = table.value_column(ctx.get("value", "value"));
  std::vector<Eigen::Index> nodes;
  Eigen::VectorXd y(table.size());
  for (Eigen::Index i = 0; i < table.size(); ++i) {
    const int col = std::clamp(static_cast<int>(std::floor((table.xy(i, 0) - x0) / grid.h)), 0,
                               grid.n_cols - 1);
    const int row_s = std::clamp(static_cast<int>(std::floor((table.xy(i, 1) - y0) / grid.h)), 0,
                                 grid.n_rows - 1);
    const int row = grid.n_rows - 1 - row_s;  // vector layout is north-first
    nodes.push_back(static_cast<Eigen::Index>(row) * grid.n_cols + col);
    y(i) = table.values(i, vcol);
  }
  const gs::GmrfConditional gc =
      gs::gmrf_conditional(sp, nodes, y, ctx.num("sigma_eps2", 0.01));

  gs::write_ascii_grid(gc.mean, grid, ctx.out_path("mean.asc"), x0, y0);
  gs::write_ascii_grid(gc.variance, grid, ctx.out_path("variance.asc"), x0, y0);
  emit("n_obs", table.size());
  emit("alpha", static_cast<Eigen::Index>(alpha));
  emit("kappa", kappa);
  emit("tau", tau);
  emit("pad", static_cast<Eigen::Index>(grid.pad));
  emit("nonzeros", static_cast<Eigen::Index>(sp.Q.nonZeros()));
  emit("mean_grid", ctx.out_path("mean.asc"));
  emit("variance_grid", ctx.out_path("variance.asc"));
  emit("wall_ms", watch.ms());
  return 0;
}

// ---------------------------------------------------------------- clr

int cmd_clr(RunContext& ctx) {
  ctx.load({"points", "inverse", "eps"});
  Stopwatch watch;
  const gs::PointTable table = gs::load_points(ctx.require("points"));
  const bool inverse = ctx.get("inverse", "0") != "0";
  const double eps = ctx.num("eps", 1e-6);

  Eigen::MatrixXd out_vals(table.size(), table.values.cols());
  if (inverse) {
    out_vals = gs::clr_inverse_rows(table.values);
  } else {
    for (Eigen::Index i = 0; i < table.size(); ++i)
      out_vals.row(i) =
          gs::clr(gs::zero_replace(table.values.row(i).transpose(), eps), i).transpose();
  }

  std::ofstream out(ctx.out_path(inverse ? "proportions.csv" : "clr.csv"));
  out << "id,x,y";
  for (const auto& name : table.value_names) out << "," << name;
  out << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < table.size(); ++i) {
    out << table.ids[static_cast<std::size_t>(i)];
    std::snprintf(buf, sizeof buf, ",%.10g,%.10g", table.xy(i, 0), table.xy(i, 1));
    out << buf;
    for (Eigen::Index c = 0; c < out_vals.cols(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.10g", out_vals(i, c));
      out << buf;
    }
    out << "\n";
  }
  emit("n", table.size());
  emit("k", out_vals.cols());
  emit("table", ctx.out_path(inverse ? "proportions.csv" : "clr.csv"));
  emit("wall_ms", watch.ms());
  return 0;
}

// ---------------------------------------------------------------- comp-fit

int cmd_comp_fit(RunContext& ctx) {
  ctx.load({"points", "components", "covariates", "eps"});
  Stopwatch watch;
  const gs::PointTable table = gs::load_points(ctx.require("points"));
  const double eps = ctx.num("eps", 1e-6);

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') { out.push_back(cur); cur.clear(); }
      else cur += ch;
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  };
  const std::vector<std::string> comp_names = split(ctx.require("components"));
  const std::vector<std::string> cov_names = split(ctx.get("covariates", ""));
  if (comp_names.size() < 2)
    throw gs::domain_error("comp-fit: need at least two component columns");

  Eigen::MatrixXd Y(table.size(), static_cast<Eigen::Index>(comp_names.size()));
  for (std::size_t c = 0; c < comp_names.size(); ++c)
    Y.col(static_cast<Eigen::Index>(c)) = table.values.col(table.value_column(comp_names[c]));
  Eigen::MatrixXd B(table.size(), static_cast<Eigen::Index>(3 + cov_names.size()));
  B.col(0).setOnes();
  B.col(1) = table.xy.col(0);
  B.col(2) = table.xy.col(1);
  for (std::size_t c = 0; c < cov_names.size(); ++c)
    B.col(static_cast<Eigen::Index>(3 + c)) = table.values.col(table.value_column(cov_names[c]));

  Eigen::MatrixXd U(Y.rows(), Y.cols());
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    U.row(i) = gs::clr(gs::zero_replace(Y.row(i).transpose(), eps), i).transpose();
  const gs::CompositionRegression fit = gs::fit_composition_regression(U, B);

  std::ofstream out(ctx.out_path("fitted.csv"));
  out << "id,x,y";
  for (const auto& name : comp_names) out << "," << name;
  out << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < table.size(); ++i) {
    out << table.ids[static_cast<std::size_t>(i)];
    std::snprintf(buf, sizeof buf, ",%.10g,%.10g", table.xy(i, 0), table.xy(i, 1));
    out << buf;
    for (Eigen::Index c = 0; c < fit.fitted_proportions.cols(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.10g", fit.fitted_proportions(i, c));
      out << buf;
    }
    out << "\n";
  }
  emit("n", table.size());
  emit("k", Y.cols());
  emit("p", B.cols());
  for (std::size_t c = 0; c < comp_names.size(); ++c)
    emit("residual_variance_" + comp_names[c],
         fit.residual_variance(static_cast<Eigen::Index>(c)));
  emit("table", ctx.out_path("fitted.csv"));
  emit("wall_ms", watch.ms());
  return 0;
}

// ---------------------------------------------------------------- st-filter

int cmd_st_filter(RunContext& ctx) {
  ctx.load({"observations", "d", "q", "r", "x0_mean", "x0_var"});
  Stopwatch watch;

  // scalar state-space run: one observation per line in a plain text file
  std::ifstream in(ctx.require("observations"));
  if (!in) throw gs::parse_error("cannot open observations file");
  std::vector<double> ys;
  double v;
  while (in >> v) ys.push_back(v);
  if (ys.empty()) throw gs::parse_error("st-filter: no observations");

  gs::DynamicsModel m;
  m.D = Eigen::MatrixXd::Constant(1, 1, ctx.num("d", 0.9));
  m.Sigma_nu = Eigen::MatrixXd::Constant(1, 1, ctx.num("q", 1.0));
  m.C_obs = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.Sigma_eps = Eigen::MatrixXd::Constant(1, 1, ctx.num("r", 1.0));
  m.x0_mean = Eigen::VectorXd::Constant(1, ctx.num("x0_mean", 0.0));
  m.x0_cov = Eigen::MatrixXd::Constant(1, 1, ctx.num("x0_var", 1.0));

  Eigen::MatrixXd Ys(static_cast<Eigen::Index>(ys.size()), 1);
  for (std::size_t t = 0; t < ys.size(); ++t) Ys(static_cast<Eigen::Index>(t), 0) = ys[t];
  const gs::KalmanResult kr = gs::kalman_filter(m, Ys);

  Eigen::MatrixXd rows(Ys.rows(), 4);
  for (Eigen::Index t = 0; t < Ys.rows(); ++t) {
    rows(t, 0) = Ys(t, 0);
    rows(t, 1) = kr.filtered_mean(t, 0);
    rows(t, 2) = kr.filtered_cov[static_cast<std::size_t>(t)](0, 0);
    rows(t, 3) = kr.predicted_mean(t, 0);
  }
  write_table(ctx.out_path("filtered.csv"), {"y", "mean", "var", "predicted"}, rows);
  emit("T", Ys.rows());
  emit("loglik", kr.loglik);
  emit("spectral_radius", m.spectral_radius());
  emit("table", ctx.out_path("filtered.csv"));
  emit("wall_ms", watch.ms());
  return 0;
}

// ---------------------------------------------------------------- bench

int cmd_bench(RunContext& ctx) {
  ctx.load({"grid_rows", "grid_cols", "cellsize", "alpha", "kappa", "n_dense_max"});
  Stopwatch watch;
  gs::GridSpec grid = grid_from_config(ctx);
  const int alpha = ctx.integer("alpha", 2);
  const double kappa = ctx.num("kappa", 1.0);
  const Eigen::Index n = grid.n_interior();
  emit("n", n);

  const int n_max = ctx.integer("n_dense_max", kDenseMaxDefault);
  if (n > n_max && !ctx.force_dense) {
    emit("dense_path", "refused");
    emit("n_dense_max", static_cast<Eigen::Index>(n_max));
  } else {
    Stopwatch dense_watch;
    gs::CovarianceModel m{gs::CovFamily::Exponential, 1.0, 2.0};
    m.nugget = 0.05;
    gs::LocationSet sites = grid_sites(grid, 0.0, 0.0);
    Eigen::LLT<Eigen::MatrixXd> llt(gs::build_cov_matrix(m, sites));
    emit("dense_path", llt.info() == Eigen::Success ? "ok" : "failed");
    emit("dense_ms", dense_watch.ms());
  }

  Stopwatch sparse_watch;
  const gs::SparsePrecision sp = gs::precision({alpha, kappa, 1.0}, grid);
  const Eigen::VectorXd draw = gs::sample(sp, ctx.seed);
  std::vector<Eigen::Index> nodes;
  Eigen::VectorXd y(10);
  for (int k = 0; k < 10; ++k) {
    nodes.push_back(k * (n / 10));
    y(k) = draw(nodes.back());
  }
  const gs::GmrfConditional gc = gs::gmrf_conditional(sp, nodes, y, 0.01, false);
  emit("sparse_nonzeros", static_cast<Eigen::Index>(sp.Q.nonZeros()));
  emit("sparse_mean_abs", gc.mean.cwiseAbs().mean());
  emit("sparse_ms", sparse_watch.ms());
  emit("wall_ms", watch.ms());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geostatistical batch toolkit"};
  app.require_subcommand(1);

  RunContext ctx;
  app.add_option("--config", ctx.config_path, "key=value configuration file");
  app.add_option("--seed", ctx.seed, "master random seed");
  app.add_option("--out", ctx.out_dir, "output directory");
  app.add_flag("--force-dense", ctx.force_dense, "override the dense-path observation guard");

  int (*handler)(RunContext&) = nullptr;
  auto sub = [&](const std::string& name, const std::string& desc, int (*fn)(RunContext&)) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->fallthrough();  // route the global flags back to the parent parser
    s->callback([&handler, fn] { handler = fn; });
  };
  sub("simulate", "draw one field realization on a grid", cmd_simulate);
  sub("variogram", "binned empirical semi-variogram plus LS model fit", cmd_variogram);
  sub("fit", "ML/REML covariance parameter estimation", cmd_fit);
  sub("krige", "dense universal kriging onto a grid",
      [](RunContext& c) { return cmd_krige(c); });
  sub("taper-krige", "sparse tapered-covariance kriging onto a grid",
      [](RunContext& c) { return cmd_krige(c, gs::TaperSpec{}); });
  sub("lowrank-krige", "predictive-process low-rank kriging onto a grid", cmd_lowrank);
  sub("spde-krige", "sparse-precision conditional field on a grid", cmd_spde);
  sub("clr", "centered log-ratio transform of a composition table", cmd_clr);
  sub("comp-fit", "compositional regression with covariates", cmd_comp_fit);
  sub("st-filter", "scalar state-space Kalman filtering", cmd_st_filter);
  sub("bench", "dense-guard and sparse-path timing report", cmd_bench);

  CLI11_PARSE(app, argc, argv);
  try {
    return handler(ctx);
  } catch (const gs::parse_error& e) {
    std::cerr << "error(parse): " << e.what() << "\n";
  } catch (const gs::domain_error& e) {
    std::cerr << "error(domain): " << e.what() << "\n";
  } catch (const gs::estimation_error& e) {
    std::cerr << "error(estimation): " << e.what() << "\n";
  } catch (const gs::numerical_error& e) {
    std::cerr << "error(numerical): " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
