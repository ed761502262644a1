#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace fpd {

/// Acquisition frame timing. Frame midpoints t_1..t_p are the nominal
/// observation times; tau = frame_end.back() is the end of the experiment.
struct TimeGrid {
  std::vector<double> frame_start;  // seconds
  std::vector<double> frame_mid;    // strictly increasing, in (0, tau]
  std::vector<double> frame_end;

  std::size_t frames() const { return frame_mid.size(); }
  double tau() const { return frame_end.back(); }

  /// Trapezoid quadrature weights over the midpoints, spanning [t_1, t_p].
  std::vector<double> trapezoid_weights() const;

  /// Frames of equal duration dt covering (0, n*dt]; midpoints at frame ends.
  static TimeGrid uniform_end(std::size_t n, double dt);

  /// Contiguous blocks of (count, duration_s) frames starting at 0,
  /// midpoints at frame centers.
  static TimeGrid from_blocks(const std::vector<std::pair<int, double>>& blocks);

  void validate() const;
};

/// Discretization grid for the convolution operator and curve quadrature.
/// Nodes s_0=0 < s_1 < ... < s_m = tau. Quadrature weights live on the left
/// endpoints s_0..s_{m-1}: w_0 = s_1/2, w_k = (s_{k+1}-s_{k-1})/2.
struct DenseGrid {
  std::vector<double> s;        // m+1 nodes
  std::vector<double> weights;  // m

  std::size_t m() const { return weights.size(); }
  double tau() const { return s.back(); }

  /// s_0..s_{m-1}: where deconvolved functions and quadrature live.
  std::vector<double> left_points() const;
  /// s_1..s_m: where convolved curves are sampled for deconvolution.
  std::vector<double> row_points() const;

  static DenseGrid uniform(double tau, std::size_t m);
  /// Node density decaying with t: s_k = tau*(exp(c*k/m)-1)/(exp(c)-1), c>0.
  static DenseGrid log_early(double tau, std::size_t m, double c = 3.0);
  static DenseGrid from_nodes(std::vector<double> nodes);

  void validate() const;
};

}  // namespace fpd
