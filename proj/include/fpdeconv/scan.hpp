#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "fpdeconv/grids.hpp"

namespace fpd {

/// Integer lattice positions of the voxels. ndim = 0 means the rows carry no
/// spatial structure (plain curve ensembles); 2 or 3 for images/volumes.
struct VoxelLattice {
  int ndim = 0;
  std::vector<std::array<int, 3>> pos;
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};

  /// Row-major 2-D image lattice, x fastest.
  static VoxelLattice image2d(int nx, int ny, double dx_mm, double dy_mm);
};

/// Measured dynamic scan: Y_ij in the decayed domain, one row per voxel.
struct DynamicScan {
  Eigen::MatrixXd values;      // n x p
  VoxelLattice lattice;
  std::vector<std::uint8_t> mask;  // n, 1 = in analysis
  TimeGrid grid;
  double decay_lambda = 0.0;   // 1/s

  Eigen::Index n_voxels() const { return values.rows(); }
  Eigen::Index frames() const { return values.cols(); }
  std::size_t masked_count() const;

  void validate() const;
};

/// out[i][j] = values[i][j] * exp(lambda * t_j). Negate lambda to invert.
Eigen::MatrixXd decay_correct(const Eigen::MatrixXd& values, const TimeGrid& grid,
                              double lambda);

}  // namespace fpd
