#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "fpdeconv/presmooth.hpp"
#include "fpdeconv/scan.hpp"

namespace fpd {

/// Multiplicative Karhunen-Loeve model of the concentration curves:
/// C_i(t) = A_i0 mu(t) + sum_k A_ik phi_k(t).
struct FpcaModel {
  std::vector<double> mu_frames;   // p
  std::vector<double> mu_dense;    // m, left grid
  std::vector<double> a0;          // n
  Eigen::MatrixXd gamma;           // p x p
  std::vector<double> eigvals;     // K, non-increasing, >= 0
  Eigen::MatrixXd eigfuncs;        // K x m, L2-orthonormal under grid quadrature
  Eigen::MatrixXd eigfuncs_frames; // K x p
  Eigen::MatrixXd scores;          // n x K
  std::vector<int> L;              // selected components per voxel
  Eigen::MatrixXd r2;              // n x (K+1)
  std::vector<std::uint8_t> flat;  // flat-voxel diagnostic (var Y_i = 0)
  double eig_total = 0.0;          // full clamped spectrum mass

  int K() const { return static_cast<int>(eigvals.size()); }
};

/// Cross-sectional mean of the raw data, decay corrected:
/// mu(t_j) = mean_i Y_ij * exp(lambda t_j) over masked-in voxels.
std::vector<double> estimate_mean(const DynamicScan& scan);

/// A_i0 = int C_hat_i mu / int mu^2 under grid quadrature.
double estimate_multiplier(std::span<const double> c_hat_dense_i,
                           std::span<const double> mu_dense,
                           const DenseGrid& grid);

/// Gamma(t_j,t_k) = mean_i {C_hat_i(t_j)-A_i0 mu(t_j)}{C_hat_i(t_k)-A_i0 mu(t_k)}.
Eigen::MatrixXd estimate_covariance(const SmoothedScan& smoothed,
                                    std::span<const double> mu_frames,
                                    std::span<const double> a0,
                                    const std::vector<std::uint8_t>& mask,
                                    int threads = 0);

struct EigenBasis {
  std::vector<double> eigvals;  // top K, clamped at 0
  Eigen::MatrixXd dense;        // K x m, orthonormal under dense quadrature
  Eigen::MatrixXd frames;       // K x p
  double total = 0.0;           // sum of the full clamped spectrum
};

/// Quadrature-weighted eigensolve of the frame-grid covariance: symmetric
/// eigendecomposition of W^{1/2} Gamma W^{1/2} with trapezoid weights W, the
/// eigenvectors mapped back, interpolated to the dense grid and
/// re-orthonormalized there (modified Gram-Schmidt). Sign fixed so each
/// eigenfunction has non-negative integral.
EigenBasis eigendecompose(const Eigen::MatrixXd& gamma, const TimeGrid& grid,
                          const DenseGrid& dense, int k_max);

/// Quadrature inner products of the residual with each eigenfunction.
std::vector<double> compute_scores(std::span<const double> c_hat_dense_i,
                                   double a0_i, std::span<const double> mu_dense,
                                   const Eigen::MatrixXd& eigfuncs,
                                   const DenseGrid& grid);

/// Smallest k with R2(k+1) - R2(k) < threshold; K if no such k exists.
int select_components(std::span<const double> r2_row, double threshold);

struct FpcaOptions {
  int k_max = 10;
  double r2_threshold = 0.025;
  bool multiplicative = true;  // false pins A_i0 = 1 (test configuration)
  /// Per-voxel R2-gain rule, or one global count by fraction of variance
  /// explained (the convention of standard FPCA packages).
  enum class Selection { R2Gain, FVE } selection = Selection::R2Gain;
  double fve = 0.95;
  int threads = 0;
};

/// Full estimation path: mean, multipliers, covariance, eigenfunctions,
/// scores, R2 table and per-voxel component counts.
FpcaModel fit_fpca(const DynamicScan& scan, const SmoothedScan& smoothed,
                   const DenseGrid& dense, const FpcaOptions& opt = {});

}  // namespace fpd
