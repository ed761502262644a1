#include "fpdeconv/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "fpdeconv/curves.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/parallel.hpp"
#include "fpdeconv/spline_deconv.hpp"

namespace fpd {

SmoothedScan presmooth_scan(const DynamicScan& scan, const RunConfig& cfg) {
  const int p = static_cast<int>(scan.frames());
  int n_b = cfg.presmooth.n_b;
  if (n_b <= 0) n_b = std::max(5, (p + 2) / 3);
  BandwidthProfile profile =
      fit_time_bandwidth_profile(scan.grid, n_b, cfg.presmooth.min_obs);

  if (scan.lattice.ndim == 0) {
    profile.h_space_mm = 0.0;  // curve ensembles have no spatial axes
  } else {
    double spacing = scan.lattice.spacing_mm[0];
    for (int a = 1; a < scan.lattice.ndim; ++a)
      spacing = std::min(spacing, scan.lattice.spacing_mm[static_cast<std::size_t>(a)]);
    if (cfg.presmooth.h_space_cv) {
      std::vector<double> grid_mm;
      grid_mm.reserve(cfg.presmooth.h_space_grid_vox.size());
      for (const double v : cfg.presmooth.h_space_grid_vox)
        grid_mm.push_back(v * spacing);
      profile.h_space_mm = calibrate_hspace_cv(scan, grid_mm, cfg.presmooth.cv_voxels,
                                               cfg.presmooth.cv_seed);
    } else if (cfg.presmooth.h_space_mm >= 0.0) {
      profile.h_space_mm = cfg.presmooth.h_space_mm;
    } else {
      profile.h_space_mm = spacing;  // one voxel spacing
    }
  }

  profile.beta = cfg.presmooth.beta > 0.0
                     ? cfg.presmooth.beta
                     : calibrate_beta_cv(scan, profile, cfg.presmooth.beta_grid,
                                         cfg.presmooth.cv_voxels,
                                         cfg.presmooth.cv_seed);
  return smooth_scan(scan, profile, cfg.threads);
}

Eigen::MatrixXd basis_row_curves(const FpcaModel& model, const TimeGrid& grid,
                                 const DenseGrid& dense) {
  const int K = model.K();
  const std::size_t m = dense.m();
  Eigen::MatrixXd curves(K + 1, static_cast<Eigen::Index>(m));
  const std::vector<double> mu_rows =
      interpolate_to_rows(model.mu_frames, grid, dense);
  for (std::size_t q = 0; q < m; ++q)
    curves(0, static_cast<Eigen::Index>(q)) = mu_rows[q];
  for (int k = 0; k < K; ++k) {
    std::vector<double> left(m);
    for (std::size_t q = 0; q < m; ++q)
      left[q] = model.eigfuncs(k, static_cast<Eigen::Index>(q));
    const std::vector<double> rows = left_to_rows(left);
    for (std::size_t q = 0; q < m; ++q)
      curves(k + 1, static_cast<Eigen::Index>(q)) = rows[q];
  }
  return curves;
}

FitResult fit_from_smoothed(const DynamicScan& scan, const SmoothedScan& smoothed,
                            const InputFunction& input, const RunConfig& cfg,
                            const DenseGrid* dense_override,
                            const FpcaOptions* fpca_override) {
  const DenseGrid dense = dense_override ? *dense_override
                                         : cfg.make_dense_grid(scan.grid.tau());
  FpcaOptions fopt;
  if (fpca_override) {
    fopt = *fpca_override;
  } else {
    fopt.k_max = cfg.fpca.k_max;
    fopt.r2_threshold = cfg.fpca.r2_threshold;
    fopt.multiplicative = cfg.fpca.multiplicative;
    fopt.threads = cfg.threads;
  }

  FitResult out;
  out.profile = smoothed.profile;
  out.smoothed = smoothed;
  out.model = fit_fpca(scan, smoothed, dense, fopt);
  const ConvolutionOperator op = build_convolution_matrix(input, dense);
  out.basis = deconvolve_basis(op, basis_row_curves(out.model, scan.grid, dense));
  out.vt = compute_vt_map(out.model, out.basis);
  return out;
}

FitResult fit_pipeline(const DynamicScan& scan, const InputFunction& input,
                       const RunConfig& cfg) {
  const SmoothedScan smoothed = presmooth_scan(scan, cfg);
  return fit_from_smoothed(scan, smoothed, input, cfg);
}

Eigen::MatrixXd reconstruct_all_irfs(const FpcaModel& model,
                                     const DeconvolvedBasis& basis, int threads) {
  const std::size_t n = model.a0.size();
  const std::size_t m = basis.mu_d.size();
  Eigen::MatrixXd irfs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<double> scores(static_cast<std::size_t>(model.K()));
    for (int k = 0; k < model.K(); ++k)
      scores[static_cast<std::size_t>(k)] = model.scores(static_cast<Eigen::Index>(i), k);
    const std::vector<double> irf =
        reconstruct_irf(basis, model.a0[i], scores, model.L[i]);
    for (std::size_t q = 0; q < m; ++q)
      irfs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) = irf[q];
  });
  return irfs;
}

namespace {

SpectralGrid make_spectral_grid(const RunConfig& cfg, const TimeGrid& grid) {
  if (cfg.spectral.beta_min > 0.0 && cfg.spectral.beta_max > 0.0)
    return SpectralGrid::logspaced(cfg.spectral.beta_min, cfg.spectral.beta_max,
                                   cfg.spectral.grid_size);
  return SpectralGrid::defaults(grid, cfg.spectral.grid_size);
}

Eigen::MatrixXd spectral_irfs(const std::vector<SpectralFit>& fits,
                              const SpectralGrid& sgrid, const DenseGrid& dense,
                              int threads) {
  const std::size_t n = fits.size();
  const std::size_t m = dense.m();
  const std::vector<double> left = dense.left_points();
  const int G = static_cast<int>(sgrid.betas.size());
  Eigen::MatrixXd irfs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                               static_cast<Eigen::Index>(m));
  parallel_for(n, threads, [&](std::size_t i) {
    if (fits[i].alphas.size() == 0) return;
    for (int g = 0; g < G; ++g) {
      const double a = fits[i].alphas(g);
      if (a <= 0.0) continue;
      const double beta = sgrid.betas[static_cast<std::size_t>(g)];
      for (std::size_t q = 0; q < m; ++q)
        irfs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) +=
            a * std::exp(-beta * left[q]);
    }
  });
  return irfs;
}

}  // namespace

BaselineResult run_baseline(const std::string& method, const DynamicScan& scan,
                            const SmoothedScan* smoothed,
                            const InputFunction& input, const RunConfig& cfg,
                            bool with_irf,
                            const DenseGrid* dense_override) {
  const DenseGrid dense = dense_override ? *dense_override
                                         : cfg.make_dense_grid(scan.grid.tau());
  const ConvolutionOperator op = build_convolution_matrix(input, dense);
  BaselineResult out;

  if (method == "depict" || method == "pdepict") {
    const SpectralGrid sgrid = make_spectral_grid(cfg, scan.grid);
    Eigen::MatrixXd curves;
    if (method == "depict") {
      curves = decay_correct(scan.values, scan.grid, scan.decay_lambda);
    } else {
      if (!smoothed)
        throw ValidationError("run_baseline: pdepict needs a smoothed scan");
      curves = smoothed->c_hat;
    }
    const std::vector<SpectralFit> fits =
        spectral_analysis(curves, scan.mask, op, sgrid, scan.grid, cfg.threads,
                          cfg.spectral.vt_horizon == "infinity");
    out.vt.resize(fits.size());
    for (std::size_t i = 0; i < fits.size(); ++i) out.vt[i] = fits[i].vt;
    if (with_irf) out.irf = spectral_irfs(fits, sgrid, dense, cfg.threads);
    return out;
  }

  if (method == "cc") {
    if (!smoothed) throw ValidationError("run_baseline: cc needs a smoothed scan");
    CurveDeconvResult cc =
        curve_by_curve_deconvolve(*smoothed, scan.mask, op, cfg.threads);
    out.vt = std::move(cc.vt);
    if (with_irf) out.irf = std::move(cc.irf);
    return out;
  }

  if (method == "sp") {
    if (!smoothed) throw ValidationError("run_baseline: sp needs a smoothed scan");
    std::vector<double> grid_penalties;
    if (cfg.spline.penalty >= 0.0) grid_penalties = {cfg.spline.penalty};
    const SplineDeconvolver solver(op, cfg.spline.n_knots, grid_penalties);
    const Eigen::Index n = scan.n_voxels();
    const std::size_t m = dense.m();
    out.vt.assign(static_cast<std::size_t>(n), 0.0);
    if (with_irf)
      out.irf = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m));
    const int p = static_cast<int>(scan.frames());
    parallel_for(static_cast<std::size_t>(n), cfg.threads, [&](std::size_t i) {
      if (!scan.mask[i]) return;
      std::vector<double> curve(static_cast<std::size_t>(p));
      for (int j = 0; j < p; ++j)
        curve[static_cast<std::size_t>(j)] = smoothed->c_hat(static_cast<Eigen::Index>(i), j);
      const std::vector<double> rows = interpolate_to_rows(curve, scan.grid, dense);
      const SplineFit fit = solver.fit(rows);
      out.vt[i] = fit.vt;
      if (with_irf)
        for (std::size_t q = 0; q < m; ++q)
          out.irf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) = fit.irf[q];
    }, 64);
    return out;
  }

  throw ValidationError("run_baseline: unknown method '" + method + "'");
}

}  // namespace fpd
