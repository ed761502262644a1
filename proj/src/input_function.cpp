#include "fpdeconv/input_function.hpp"

#include <algorithm>
#include <cmath>

#include "fpdeconv/errors.hpp"

namespace fpd {

InputFunction::InputFunction(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.empty() || times_.size() != values_.size())
    throw ValidationError("InputFunction: bad sample arrays");
  if (times_.front() != 0.0)
    throw ValidationError("InputFunction: samples must start at t=0");
  bool positive = false;
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (i > 0 && !(times_[i] > times_[i - 1]))
      throw ValidationError("InputFunction: times not strictly increasing");
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
      throw ValidationError("InputFunction: negative or non-finite value");
    if (values_[i] > 0.0) positive = true;
  }
  if (!positive)
    throw ValidationError("InputFunction: identically zero input");
}

double InputFunction::operator()(double t) const {
  if (t < times_.front()) return 0.0;
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  const std::size_t lo = hi - 1;
  const double u = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return values_[lo] + u * (values_[hi] - values_[lo]);
}

std::vector<double> InputFunction::eval(std::span<const double> ts) const {
  std::vector<double> out(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) out[i] = (*this)(ts[i]);
  return out;
}

InputFunction InputFunction::scaled_gamma(double t_max, double theta, double peak,
                                          std::size_t n_samples) {
  if (!(t_max > 0.0) || !(theta > 0.0) || !(peak > 0.0) || n_samples < 2)
    throw ValidationError("InputFunction::scaled_gamma: bad parameters");
  std::vector<double> t(n_samples), v(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    t[i] = t_max * static_cast<double>(i) / static_cast<double>(n_samples - 1);
    v[i] = peak * (t[i] / theta) * std::exp(1.0 - t[i] / theta);
  }
  return InputFunction(std::move(t), std::move(v));
}

}  // namespace fpd
