#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "fpdeconv/deconv.hpp"

namespace fpd {

/// Uniform cubic B-spline basis on [0, tau] with n_knots equally spaced
/// interior knots, extended past the boundary with the same spacing so that
/// second-difference penalties have the usual linear null space.
class BsplineBasis {
 public:
  BsplineBasis(double tau, int n_knots);

  int size() const { return nseg_ + 3; }
  /// points x size matrix of basis values.
  Eigen::MatrixXd evaluate(std::span<const double> points) const;

 private:
  double knot(int j) const;  // j from -3 .. nseg_+3
  double tau_;
  int nseg_;
  double h_;
};

/// Penalized least-squares deconvolution of one curve on the row grid:
/// theta minimizes ||c - A B theta||^2 + penalty ||D2 theta||^2.
/// Returns the IRF B theta on the left grid.
std::vector<double> spline_deconvolve(std::span<const double> curve_rows,
                                      const ConvolutionOperator& op, int n_knots,
                                      double penalty);

struct SplineFit {
  std::vector<double> irf;  // left grid
  double penalty = 0.0;
  double vt = 0.0;
};

/// Shared design/penalty factorizations for per-voxel spline fits; the
/// penalty is chosen per curve by generalized cross-validation over a fixed
/// log-spaced grid.
class SplineDeconvolver {
 public:
  SplineDeconvolver(const ConvolutionOperator& op, int n_knots,
                    std::vector<double> penalty_grid = {});

  SplineFit fit(std::span<const double> curve_rows) const;
  const std::vector<double>& penalty_grid() const { return grid_; }

 private:
  Eigen::MatrixXd basis_;    // m x nb on the left grid
  Eigen::MatrixXd design_;   // m x nb, A * B
  std::vector<Eigen::MatrixXd> solve_;  // per penalty: (G'G + l P)^-1 G'
  std::vector<double> edf_;  // per penalty: trace of the hat matrix
  std::vector<double> grid_;
  std::vector<double> weights_;  // quadrature weights for vt
};

}  // namespace fpd
