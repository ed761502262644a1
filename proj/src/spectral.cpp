#include "fpdeconv/spectral.hpp"

#include <cmath>
#include <limits>

#include "fpdeconv/curves.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/nnls.hpp"
#include "fpdeconv/parallel.hpp"

namespace fpd {

void SpectralGrid::validate() const {
  if (betas.empty()) throw ValidationError("SpectralGrid: empty");
  for (std::size_t g = 0; g < betas.size(); ++g) {
    if (!(betas[g] > 0.0)) throw ValidationError("SpectralGrid: rates must be > 0");
    if (g > 0 && !(betas[g] > betas[g - 1]))
      throw ValidationError("SpectralGrid: rates not strictly increasing");
  }
}

SpectralGrid SpectralGrid::logspaced(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 1)
    throw ValidationError("SpectralGrid: bad log range");
  SpectralGrid g;
  g.betas.resize(static_cast<std::size_t>(count));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int k = 0; k < count; ++k)
    g.betas[static_cast<std::size_t>(k)] =
        std::exp(llo + (lhi - llo) * (count == 1 ? 0.0 : static_cast<double>(k) / (count - 1)));
  g.validate();
  return g;
}

SpectralGrid SpectralGrid::defaults(const TimeGrid& grid, int count) {
  double dt_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < grid.frames(); ++j)
    dt_min = std::min(dt_min, grid.frame_mid[j] - grid.frame_mid[j - 1]);
  if (!std::isfinite(dt_min)) dt_min = grid.frame_mid.front();
  return logspaced(0.1 / grid.tau(), 10.0 / dt_min, count);
}

Eigen::MatrixXd spectral_design(const ConvolutionOperator& op,
                                const SpectralGrid& spectral,
                                const TimeGrid& grid) {
  spectral.validate();
  const std::size_t m = op.grid.m();
  const int p = static_cast<int>(grid.frames());
  const int G = static_cast<int>(spectral.betas.size());
  const std::vector<double> left = op.grid.left_points();

  Eigen::MatrixXd design(p, G);
  // the convolved curve is anchored at (0, 0) before frame sampling
  std::vector<double> ts(m + 1), cs(m + 1);
  ts[0] = 0.0;
  for (std::size_t q = 0; q < m; ++q) ts[q + 1] = op.grid.s[q + 1];
  Eigen::VectorXd x(static_cast<Eigen::Index>(m));
  for (int g = 0; g < G; ++g) {
    const double beta = spectral.betas[static_cast<std::size_t>(g)];
    for (std::size_t q = 0; q < m; ++q)
      x(static_cast<Eigen::Index>(q)) = std::exp(-beta * left[q]);
    const Eigen::VectorXd conv = op.matrix * x;
    cs[0] = 0.0;
    for (std::size_t q = 0; q < m; ++q) cs[q + 1] = conv(static_cast<Eigen::Index>(q));
    const LinearInterpolant f(ts, cs);
    for (int j = 0; j < p; ++j)
      design(j, g) = f(grid.frame_mid[static_cast<std::size_t>(j)]);
  }
  return design;
}

std::vector<SpectralFit> spectral_analysis(const Eigen::MatrixXd& curves,
                                           const std::vector<std::uint8_t>& mask,
                                           const ConvolutionOperator& op,
                                           const SpectralGrid& spectral,
                                           const TimeGrid& grid,
                                           int threads, bool vt_to_infinity) {
  const Eigen::Index n = curves.rows();
  if (mask.size() != static_cast<std::size_t>(n))
    throw ValidationError("spectral_analysis: mask length mismatch");
  if (static_cast<std::size_t>(curves.cols()) != grid.frames())
    throw ValidationError("spectral_analysis: frame count mismatch");
  const Eigen::MatrixXd design = spectral_design(op, spectral, grid);
  const double tau = grid.tau();
  const int G = static_cast<int>(spectral.betas.size());

  std::vector<double> vt_factor(static_cast<std::size_t>(G));
  for (int g = 0; g < G; ++g) {
    const double beta = spectral.betas[static_cast<std::size_t>(g)];
    vt_factor[static_cast<std::size_t>(g)] =
        vt_to_infinity ? 1.0 / beta : -std::expm1(-beta * tau) / beta;
  }

  std::vector<SpectralFit> fits(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    if (!mask[i]) {
      fits[i].alphas = Eigen::VectorXd::Zero(G);
      return;
    }
    const Eigen::VectorXd target = curves.row(static_cast<Eigen::Index>(i)).transpose();
    const NnlsResult res = nnls(design, target);
    fits[i].alphas = res.x;
    double vt = 0.0;
    for (int g = 0; g < G; ++g) vt += res.x(g) * vt_factor[static_cast<std::size_t>(g)];
    fits[i].vt = vt;
  }, 64);
  return fits;
}

CurveDeconvResult curve_by_curve_deconvolve(const SmoothedScan& smoothed,
                                            const std::vector<std::uint8_t>& mask,
                                            const ConvolutionOperator& op,
                                            int threads) {
  const Eigen::Index n = smoothed.c_hat.rows();
  const int p = static_cast<int>(smoothed.c_hat.cols());
  const std::size_t m = op.grid.m();
  CurveDeconvResult out;
  out.irf = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m));
  out.vt.assign(static_cast<std::size_t>(n), 0.0);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    if (!mask[i]) return;
    std::vector<double> curve(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j)
      curve[static_cast<std::size_t>(j)] = smoothed.c_hat(static_cast<Eigen::Index>(i), j);
    const std::vector<double> rows = interpolate_to_rows(curve, smoothed.grid, op.grid);
    const std::vector<double> irf = deconvolve_curve(op, rows);
    for (std::size_t q = 0; q < m; ++q)
      out.irf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) = irf[q];
    out.vt[i] = integrate_curve(irf, op.grid);
  }, 64);
  return out;
}

}  // namespace fpd
