#include "fpdeconv/scan.hpp"

#include <cmath>
#include <string>

#include "fpdeconv/errors.hpp"

namespace fpd {

VoxelLattice VoxelLattice::image2d(int nx, int ny, double dx_mm, double dy_mm) {
  if (nx <= 0 || ny <= 0 || !(dx_mm > 0.0) || !(dy_mm > 0.0))
    throw ValidationError("VoxelLattice::image2d: bad dimensions");
  VoxelLattice lat;
  lat.ndim = 2;
  lat.spacing_mm = {dx_mm, dy_mm, 1.0};
  lat.pos.reserve(static_cast<std::size_t>(nx) * ny);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) lat.pos.push_back({x, y, 0});
  return lat;
}

std::size_t DynamicScan::masked_count() const {
  std::size_t c = 0;
  for (auto b : mask) c += (b != 0);
  return c;
}

void DynamicScan::validate() const {
  grid.validate();
  const auto n = values.rows();
  const auto p = values.cols();
  if (n < 1) throw ValidationError("DynamicScan: need at least one voxel");
  if (static_cast<std::size_t>(p) != grid.frames())
    throw ValidationError("DynamicScan: frame count mismatch with TimeGrid");
  if (mask.size() != static_cast<std::size_t>(n))
    throw ValidationError("DynamicScan: mask length mismatch");
  if (!(decay_lambda >= 0.0))
    throw ValidationError("DynamicScan: decay_lambda must be >= 0");
  if (lattice.ndim != 0 && lattice.pos.size() != static_cast<std::size_t>(n))
    throw ValidationError("DynamicScan: lattice position per voxel required");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      if (!std::isfinite(values(i, j)))
        throw ValidationError("DynamicScan: non-finite value at voxel " +
                              std::to_string(i) + ", frame " + std::to_string(j));
}

Eigen::MatrixXd decay_correct(const Eigen::MatrixXd& values, const TimeGrid& grid,
                              double lambda) {
  if (static_cast<std::size_t>(values.cols()) != grid.frames())
    throw ValidationError("decay_correct: frame count mismatch");
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      if (!std::isfinite(values(i, j)))
        throw ValidationError("decay_correct: non-finite value at voxel " +
                              std::to_string(i) + ", frame " + std::to_string(j));
  Eigen::MatrixXd out = values;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    out.col(j) *= std::exp(lambda * grid.frame_mid[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace fpd
