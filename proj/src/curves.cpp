#include "fpdeconv/curves.hpp"

#include <algorithm>
#include <string>

#include "fpdeconv/errors.hpp"

namespace fpd {

LinearInterpolant::LinearInterpolant(std::span<const double> x,
                                     std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()) {
  if (x_.empty()) throw ValidationError("LinearInterpolant: empty curve");
  if (x_.size() != y_.size())
    throw ValidationError("LinearInterpolant: length mismatch");
  for (std::size_t i = 1; i < x_.size(); ++i)
    if (!(x_[i] > x_[i - 1]))
      throw ValidationError("LinearInterpolant: abscissae not increasing");
}

double LinearInterpolant::operator()(double t) const {
  if (t <= x_.front()) return y_.front();
  if (t >= x_.back()) return y_.back();
  const auto it = std::upper_bound(x_.begin(), x_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - x_.begin());
  const std::size_t lo = hi - 1;
  const double u = (t - x_[lo]) / (x_[hi] - x_[lo]);
  return y_[lo] + u * (y_[hi] - y_[lo]);
}

std::vector<double> LinearInterpolant::eval(std::span<const double> ts) const {
  std::vector<double> out(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) out[i] = (*this)(ts[i]);
  return out;
}

double integrate_curve(std::span<const double> values, const DenseGrid& grid) {
  if (values.size() != grid.m())
    throw ValidationError("integrate_curve: expected " + std::to_string(grid.m()) +
                          " values, got " + std::to_string(values.size()));
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k)
    acc += grid.weights[k] * values[k];
  return acc;
}

std::vector<double> interpolate_to_dense(std::span<const double> curve,
                                         const TimeGrid& grid,
                                         const DenseGrid& dense) {
  LinearInterpolant f(grid.frame_mid, curve);
  return f.eval(dense.left_points());
}

std::vector<double> interpolate_to_rows(std::span<const double> curve,
                                        const TimeGrid& grid,
                                        const DenseGrid& dense) {
  LinearInterpolant f(grid.frame_mid, curve);
  return f.eval(dense.row_points());
}

std::vector<double> left_to_rows(std::span<const double> left_values) {
  if (left_values.empty()) throw ValidationError("left_to_rows: empty input");
  std::vector<double> out(left_values.size());
  for (std::size_t k = 0; k + 1 < left_values.size(); ++k)
    out[k] = left_values[k + 1];
  out[left_values.size() - 1] = left_values[left_values.size() - 1];
  return out;
}

}  // namespace fpd
