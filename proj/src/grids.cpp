#include "fpdeconv/grids.hpp"

#include <cmath>
#include <string>

#include "fpdeconv/errors.hpp"

namespace fpd {

void TimeGrid::validate() const {
  const std::size_t p = frame_mid.size();
  if (p == 0) throw ValidationError("TimeGrid: no frames");
  if (frame_start.size() != p || frame_end.size() != p)
    throw ValidationError("TimeGrid: start/mid/end length mismatch");
  const double t_end = frame_end.back();
  for (std::size_t j = 0; j < p; ++j) {
    if (!(frame_mid[j] > 0.0) || !(frame_mid[j] <= t_end))
      throw ValidationError("TimeGrid: frame_mid[" + std::to_string(j) +
                            "] outside (0, tau]");
    if (j > 0 && !(frame_mid[j] > frame_mid[j - 1]))
      throw ValidationError("TimeGrid: frame_mid not strictly increasing at " +
                            std::to_string(j));
    if (!(frame_start[j] <= frame_mid[j]) || !(frame_mid[j] <= frame_end[j]))
      throw ValidationError("TimeGrid: mid outside [start, end] at " +
                            std::to_string(j));
    if (j > 0 && !(frame_end[j - 1] <= frame_start[j]))
      throw ValidationError("TimeGrid: overlapping frames at " + std::to_string(j));
  }
}

std::vector<double> TimeGrid::trapezoid_weights() const {
  const std::size_t p = frame_mid.size();
  std::vector<double> w(p, 0.0);
  if (p == 1) {
    w[0] = 1.0;
    return w;
  }
  w[0] = 0.5 * (frame_mid[1] - frame_mid[0]);
  for (std::size_t j = 1; j + 1 < p; ++j)
    w[j] = 0.5 * (frame_mid[j + 1] - frame_mid[j - 1]);
  w[p - 1] = 0.5 * (frame_mid[p - 1] - frame_mid[p - 2]);
  return w;
}

TimeGrid TimeGrid::uniform_end(std::size_t n, double dt) {
  TimeGrid g;
  g.frame_start.resize(n);
  g.frame_mid.resize(n);
  g.frame_end.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    g.frame_start[j] = dt * static_cast<double>(j);
    g.frame_end[j] = dt * static_cast<double>(j + 1);
    g.frame_mid[j] = g.frame_end[j];
  }
  g.validate();
  return g;
}

TimeGrid TimeGrid::from_blocks(const std::vector<std::pair<int, double>>& blocks) {
  TimeGrid g;
  double t = 0.0;
  for (const auto& [count, dur] : blocks) {
    if (count < 0 || !(dur > 0.0))
      throw ValidationError("TimeGrid: bad frame block");
    for (int k = 0; k < count; ++k) {
      g.frame_start.push_back(t);
      g.frame_mid.push_back(t + 0.5 * dur);
      g.frame_end.push_back(t + dur);
      t += dur;
    }
  }
  g.validate();
  return g;
}

void DenseGrid::validate() const {
  const std::size_t m_ = weights.size();
  if (m_ == 0 || s.size() != m_ + 1)
    throw ValidationError("DenseGrid: need m weights and m+1 nodes");
  if (s.front() != 0.0) throw ValidationError("DenseGrid: s_0 must be 0");
  for (std::size_t k = 1; k < s.size(); ++k)
    if (!(s[k] > s[k - 1]))
      throw ValidationError("DenseGrid: nodes not strictly increasing");
}

std::vector<double> DenseGrid::left_points() const {
  return std::vector<double>(s.begin(), s.end() - 1);
}

std::vector<double> DenseGrid::row_points() const {
  return std::vector<double>(s.begin() + 1, s.end());
}

DenseGrid DenseGrid::from_nodes(std::vector<double> nodes) {
  DenseGrid g;
  g.s = std::move(nodes);
  const std::size_t m_ = g.s.size() - 1;
  g.weights.resize(m_);
  g.weights[0] = 0.5 * g.s[1];
  for (std::size_t k = 1; k < m_; ++k)
    g.weights[k] = 0.5 * (g.s[k + 1] - g.s[k - 1]);
  g.validate();
  return g;
}

DenseGrid DenseGrid::uniform(double tau, std::size_t m) {
  if (!(tau > 0.0) || m == 0) throw ValidationError("DenseGrid: bad tau or m");
  std::vector<double> nodes(m + 1);
  for (std::size_t k = 0; k <= m; ++k)
    nodes[k] = tau * static_cast<double>(k) / static_cast<double>(m);
  nodes[m] = tau;
  return from_nodes(std::move(nodes));
}

DenseGrid DenseGrid::log_early(double tau, std::size_t m, double c) {
  if (!(tau > 0.0) || m == 0 || !(c > 0.0))
    throw ValidationError("DenseGrid: bad log_early parameters");
  std::vector<double> nodes(m + 1);
  const double denom = std::expm1(c);
  for (std::size_t k = 0; k <= m; ++k)
    nodes[k] = tau * std::expm1(c * static_cast<double>(k) / static_cast<double>(m)) / denom;
  nodes[0] = 0.0;
  nodes[m] = tau;
  return from_nodes(std::move(nodes));
}

}  // namespace fpd
