#pragma once

#include <string>

#include "fpdeconv/config.hpp"
#include "fpdeconv/deconv.hpp"
#include "fpdeconv/fpca.hpp"
#include "fpdeconv/presmooth.hpp"
#include "fpdeconv/spectral.hpp"

namespace fpd {

/// Everything the end-to-end fit produces: presmoothing profile, FPCA model,
/// deconvolved basis and the V_T map.
struct FitResult {
  BandwidthProfile profile;
  SmoothedScan smoothed;
  FpcaModel model;
  DeconvolvedBasis basis;
  std::vector<double> vt;
};

/// Presmoothing with cross-validated bandwidths per the config.
SmoothedScan presmooth_scan(const DynamicScan& scan, const RunConfig& cfg);

/// Presmooth -> FPCA -> deconvolve -> V_T map.
FitResult fit_pipeline(const DynamicScan& scan, const InputFunction& input,
                       const RunConfig& cfg);

/// FPCA/deconvolution restarted from an existing smoothed scan. The dense
/// grid defaults to the configured one; experiments may override it.
FitResult fit_from_smoothed(const DynamicScan& scan, const SmoothedScan& smoothed,
                            const InputFunction& input, const RunConfig& cfg,
                            const DenseGrid* dense_override = nullptr,
                            const FpcaOptions* fpca_override = nullptr);

/// Row-grid samples of the model mean and eigenfunctions, ready for the
/// deconvolution solve.
Eigen::MatrixXd basis_row_curves(const FpcaModel& model, const TimeGrid& grid,
                                 const DenseGrid& dense);

/// Per-voxel reconstructed IRFs (n x m on the left grid) using each voxel's
/// selected component count.
Eigen::MatrixXd reconstruct_all_irfs(const FpcaModel& model,
                                     const DeconvolvedBasis& basis,
                                     int threads = 0);

struct BaselineResult {
  std::vector<double> vt;
  Eigen::MatrixXd irf;  // n x m on the left grid; empty unless requested
};

/// method: depict | pdepict | cc | sp. pdepict/cc/sp need the smoothed scan.
BaselineResult run_baseline(const std::string& method, const DynamicScan& scan,
                            const SmoothedScan* smoothed,
                            const InputFunction& input, const RunConfig& cfg,
                            bool with_irf,
                            const DenseGrid* dense_override = nullptr);

}  // namespace fpd
