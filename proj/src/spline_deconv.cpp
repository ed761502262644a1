#include "fpdeconv/spline_deconv.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "fpdeconv/curves.hpp"
#include "fpdeconv/errors.hpp"

namespace fpd {

BsplineBasis::BsplineBasis(double tau, int n_knots) : tau_(tau) {
  if (!(tau > 0.0)) throw ValidationError("BsplineBasis: bad tau");
  if (n_knots < 4) throw ValidationError("BsplineBasis: need at least 4 knots");
  nseg_ = n_knots + 1;
  h_ = tau / nseg_;
}

double BsplineBasis::knot(int j) const { return h_ * j; }

Eigen::MatrixXd BsplineBasis::evaluate(std::span<const double> points) const {
  const int nb = size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()), nb);
  // Cox-de Boor on the uniform extended knot vector; basis i spans
  // [knot(i-3), knot(i+1)) for i = 0..nb-1.
  for (std::size_t r = 0; r < points.size(); ++r) {
    const double t = points[r];
    if (t < 0.0 || t > tau_) continue;
    int seg = static_cast<int>(std::floor(t / h_));
    if (seg >= nseg_) seg = nseg_ - 1;  // t == tau
    const double u = t / h_ - seg;      // local coordinate in [0, 1]
    // uniform cubic B-spline segment weights for the 4 active bases
    const double v = 1.0 - u;
    const double b0 = v * v * v / 6.0;
    const double b1 = (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0;
    const double b2 = (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0;
    const double b3 = u * u * u / 6.0;
    out(static_cast<Eigen::Index>(r), seg + 0) = b0;
    out(static_cast<Eigen::Index>(r), seg + 1) = b1;
    out(static_cast<Eigen::Index>(r), seg + 2) = b2;
    out(static_cast<Eigen::Index>(r), seg + 3) = b3;
  }
  return out;
}

namespace {

Eigen::MatrixXd second_difference(int nb) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(nb - 2, nb);
  for (int r = 0; r < nb - 2; ++r) {
    d(r, r) = 1.0;
    d(r, r + 1) = -2.0;
    d(r, r + 2) = 1.0;
  }
  return d;
}

std::vector<double> default_penalty_grid(const Eigen::MatrixXd& design,
                                         const Eigen::MatrixXd& pen) {
  // 10-point log grid scaled to the problem
  const double scale = design.squaredNorm() / std::max(pen.trace(), 1e-300);
  std::vector<double> grid(10);
  for (int k = 0; k < 10; ++k)
    grid[static_cast<std::size_t>(k)] = scale * std::pow(10.0, -6.0 + k);
  return grid;
}

}  // namespace

std::vector<double> spline_deconvolve(std::span<const double> curve_rows,
                                      const ConvolutionOperator& op, int n_knots,
                                      double penalty) {
  const Eigen::Index m = op.matrix.rows();
  if (curve_rows.size() != static_cast<std::size_t>(m))
    throw ValidationError("spline_deconvolve: curve length mismatch");
  if (!(penalty >= 0.0)) throw ValidationError("spline_deconvolve: negative penalty");
  const BsplineBasis bs(op.grid.tau(), n_knots);
  const std::vector<double> left = op.grid.left_points();
  const Eigen::MatrixXd basis = bs.evaluate(left);
  const Eigen::MatrixXd design = op.matrix * basis;
  const Eigen::MatrixXd d2 = second_difference(bs.size());
  const Eigen::MatrixXd lhs =
      design.transpose() * design + penalty * d2.transpose() * d2;
  const Eigen::Map<const Eigen::VectorXd> c(curve_rows.data(), m);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("spline_deconvolve: singular penalized system");
  const Eigen::VectorXd theta = ldlt.solve(design.transpose() * c);
  if ((lhs * theta - design.transpose() * c).norm() >
      1e-6 * std::max(1.0, (design.transpose() * c).norm()))
    throw NumericError("spline_deconvolve: singular penalized system");
  const Eigen::VectorXd irf = basis * theta;
  return std::vector<double>(irf.data(), irf.data() + m);
}

SplineDeconvolver::SplineDeconvolver(const ConvolutionOperator& op, int n_knots,
                                     std::vector<double> penalty_grid)
    : weights_(op.grid.weights) {
  const BsplineBasis bs(op.grid.tau(), n_knots);
  const std::vector<double> left = op.grid.left_points();
  basis_ = bs.evaluate(left);
  design_ = op.matrix * basis_;
  const Eigen::MatrixXd d2 = second_difference(bs.size());
  const Eigen::MatrixXd pen = d2.transpose() * d2;
  grid_ = penalty_grid.empty() ? default_penalty_grid(design_, pen)
                               : std::move(penalty_grid);
  const Eigen::MatrixXd gtg = design_.transpose() * design_;
  for (const double lambda : grid_) {
    if (!(lambda >= 0.0))
      throw ValidationError("SplineDeconvolver: negative penalty in grid");
    const Eigen::MatrixXd lhs = gtg + lambda * pen;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
    if (ldlt.info() != Eigen::Success)
      throw NumericError("SplineDeconvolver: singular penalized system");
    solve_.push_back(ldlt.solve(design_.transpose()));
    edf_.push_back(ldlt.solve(gtg).trace());
  }
}

SplineFit SplineDeconvolver::fit(std::span<const double> curve_rows) const {
  const Eigen::Index m = design_.rows();
  if (curve_rows.size() != static_cast<std::size_t>(m))
    throw ValidationError("SplineDeconvolver: curve length mismatch");
  const Eigen::Map<const Eigen::VectorXd> c(curve_rows.data(), m);
  double best_gcv = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
  double best_lambda = grid_.front();
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    const Eigen::VectorXd theta = solve_[k] * c;
    const double rss = (c - design_ * theta).squaredNorm();
    const double denom = static_cast<double>(m) - edf_[k];
    const double gcv = static_cast<double>(m) * rss / (denom * denom);
    if (gcv < best_gcv) {
      best_gcv = gcv;
      best_theta = theta;
      best_lambda = grid_[k];
    }
  }
  SplineFit out;
  const Eigen::VectorXd irf = basis_ * best_theta;
  out.irf.assign(irf.data(), irf.data() + m);
  out.penalty = best_lambda;
  out.vt = 0.0;
  for (std::size_t q = 0; q < out.irf.size(); ++q) out.vt += weights_[q] * out.irf[q];
  return out;
}

}  // namespace fpd
