#pragma once

#include <span>
#include <vector>

#include "fpdeconv/grids.hpp"

namespace fpd {

/// Piecewise-linear interpolant with constant extension on both sides.
class LinearInterpolant {
 public:
  LinearInterpolant(std::span<const double> x, std::span<const double> y);
  double operator()(double t) const;
  std::vector<double> eval(std::span<const double> ts) const;

 private:
  std::vector<double> x_, y_;
};

/// Quadrature of values given on the left endpoints s_0..s_{m-1}.
double integrate_curve(std::span<const double> values, const DenseGrid& grid);

/// Frame-midpoint curve resampled at the left endpoints s_0..s_{m-1}.
std::vector<double> interpolate_to_dense(std::span<const double> curve,
                                         const TimeGrid& grid,
                                         const DenseGrid& dense);

/// Frame-midpoint curve resampled at the row points s_1..s_m.
std::vector<double> interpolate_to_rows(std::span<const double> curve,
                                        const TimeGrid& grid,
                                        const DenseGrid& dense);

/// Values on s_0..s_{m-1} mapped to s_1..s_m (shared nodes shift by one,
/// the last value is held constant past s_{m-1}).
std::vector<double> left_to_rows(std::span<const double> left_values);

}  // namespace fpd
