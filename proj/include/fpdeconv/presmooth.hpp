#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fpdeconv/scan.hpp"

namespace fpd {

/// Locally adaptive smoothing bandwidths: a quartic polynomial h_T(t) fitted
/// through per-anchor radii, a global time multiplier beta, and one spatial
/// bandwidth shared by all spatial axes.
struct BandwidthProfile {
  std::array<double, 5> poly{};  // coefficients in u = t / t_scale
  double t_scale = 1.0;
  double clamp_floor = 0.0;      // pointwise lower clamp; 0 disables
  double beta = 1.0;
  double h_space_mm = 0.0;       // 0 disables the spatial passes
  std::vector<std::pair<double, double>> anchors;  // (t, h_T(t))

  /// Fitted bandwidth function before the beta multiplier.
  double time_bandwidth(double t) const;
  /// beta * h_T(t), the bandwidth actually used by the time pass.
  double effective_time_bandwidth(double t) const;

  /// Checks beta*h_T > 0 on a 1000-point grid over [0, tau] and h_space >= 0.
  void validate(double tau) const;
};

/// Builds the polynomial part of the profile: n_b anchors spread uniformly by
/// index over the frame midpoints; at each anchor the radius is the smallest
/// h with >= min_obs midpoints in [t-h, t+h], floored near t=0 by the distance
/// to the min_obs-th midpoint; a quartic least-squares fit through the anchor
/// pairs, clamped below at half the smallest anchor radius if it dips <= 0.
BandwidthProfile fit_time_bandwidth_profile(const TimeGrid& grid, int n_b,
                                            int min_obs);

/// Leave-one-frame-out prediction error of the time-direction smoother on a
/// seeded voxel subsample; returns the error-minimizing beta (ties -> smaller).
double calibrate_beta_cv(const DynamicScan& scan, const BandwidthProfile& profile,
                         std::span<const double> beta_grid, int n_cv_voxels,
                         std::uint64_t seed);

/// Leave-one-voxel-out prediction error of the spatial local-linear smoother
/// on a seeded (voxel, frame) subsample; returns the best h (ties -> smaller).
double calibrate_hspace_cv(const DynamicScan& scan,
                           std::span<const double> h_grid_mm, int n_cv_voxels,
                           std::uint64_t seed);

struct SmoothDiagnostics {
  long enlarged_windows = 0;  // kernel windows grown to reach 2 support points
};

/// Decay-corrected smoothed curves C_hat_i(t_j).
struct SmoothedScan {
  Eigen::MatrixXd c_hat;  // n x p
  BandwidthProfile profile;
  TimeGrid grid;
  SmoothDiagnostics diag;
};

/// Sequential separable local-linear smoothing (Epanechnikov kernel per axis):
/// each spatial axis with h_space, then time with beta*h_T(t). The output is
/// decay-corrected with the scan's lambda.
SmoothedScan smooth_scan(const DynamicScan& scan, const BandwidthProfile& profile,
                         int threads = 0);

/// Direct product-kernel local-linear fit over (space..., time); reference
/// path used by tests only.
SmoothedScan smooth_scan_product_kernel(const DynamicScan& scan,
                                        const BandwidthProfile& profile);

}  // namespace fpd
