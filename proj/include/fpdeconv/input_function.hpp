#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fpd {

/// Arterial input curve I(t): non-negative samples at strictly increasing
/// times starting at 0, evaluated by linear interpolation (zero before the
/// first sample, last value held afterwards).
class InputFunction {
 public:
  InputFunction(std::vector<double> times, std::vector<double> values);

  double operator()(double t) const;
  std::vector<double> eval(std::span<const double> ts) const;

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  /// I(t) = peak * (t/theta) * exp(1 - t/theta), sampled on [0, t_max].
  static InputFunction scaled_gamma(double t_max, double theta, double peak,
                                    std::size_t n_samples = 2048);

 private:
  std::vector<double> times_, values_;
};

}  // namespace fpd
