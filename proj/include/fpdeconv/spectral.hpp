#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "fpdeconv/deconv.hpp"
#include "fpdeconv/grids.hpp"
#include "fpdeconv/input_function.hpp"
#include "fpdeconv/presmooth.hpp"

namespace fpd {

/// Logarithmically spaced decay rates for spectral analysis.
struct SpectralGrid {
  std::vector<double> betas;  // 1/s, strictly increasing, > 0

  static SpectralGrid logspaced(double lo, double hi, int count);
  /// Default span [0.1/tau, 10 / min midpoint spacing], G = 100.
  static SpectralGrid defaults(const TimeGrid& grid, int count = 100);
  void validate() const;
};

struct SpectralFit {
  Eigen::VectorXd alphas;  // >= 0
  double vt = 0.0;         // sum_g alpha_g (1 - exp(-beta_g tau)) / beta_g
};

/// Design column g: (I (x) exp(-beta_g t))(t_j), built through the
/// convolution operator on the dense grid and sampled at the frame midpoints.
Eigen::MatrixXd spectral_design(const ConvolutionOperator& op,
                                const SpectralGrid& spectral,
                                const TimeGrid& grid);

/// Per-voxel NNLS spectral analysis of decay-corrected frame curves.
/// vt_to_infinity integrates the fitted spectrum to infinity (sum alpha/beta)
/// instead of truncating at tau.
std::vector<SpectralFit> spectral_analysis(const Eigen::MatrixXd& curves,
                                           const std::vector<std::uint8_t>& mask,
                                           const ConvolutionOperator& op,
                                           const SpectralGrid& spectral,
                                           const TimeGrid& grid,
                                           int threads = 0,
                                           bool vt_to_infinity = false);

struct CurveDeconvResult {
  Eigen::MatrixXd irf;     // n x m on the left grid
  std::vector<double> vt;  // n
};

/// Least-squares deconvolution of each voxel's smoothed curve independently.
CurveDeconvResult curve_by_curve_deconvolve(const SmoothedScan& smoothed,
                                            const std::vector<std::uint8_t>& mask,
                                            const ConvolutionOperator& op,
                                            int threads = 0);

}  // namespace fpd
