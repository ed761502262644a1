#include "fpdeconv/nnls.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fpdeconv/errors.hpp"

namespace fpd {

namespace {

Eigen::VectorXd solve_on_set(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                             const std::vector<int>& passive) {
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(passive.size()));
  for (std::size_t k = 0; k < passive.size(); ++k)
    sub.col(static_cast<Eigen::Index>(k)) = a.col(passive[k]);
  return sub.colPivHouseholderQr().solve(b);
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                int max_iter, double tol) {
  const Eigen::Index cols = design.cols();
  if (target.size() != design.rows())
    throw ValidationError("nnls: target length mismatch");
  if (!design.allFinite() || !target.allFinite())
    throw ValidationError("nnls: non-finite input");
  if (max_iter <= 0) max_iter = 3 * static_cast<int>(cols);

  Eigen::VectorXd col_norm(cols);
  for (Eigen::Index j = 0; j < cols; ++j) col_norm(j) = design.col(j).norm();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(cols);
  std::vector<bool> in_passive(static_cast<std::size_t>(cols), false);
  std::vector<int> passive;
  Eigen::VectorXd resid = target;
  int outer = 0;

  for (;;) {
    const Eigen::VectorXd w = design.transpose() * resid;
    const double rnorm = resid.norm();

    // candidate selection; a candidate whose trial coefficient is not
    // positive is banned for this round (Lawson-Hanson anti-cycling)
    std::vector<bool> banned(static_cast<std::size_t>(cols), false);
    int chosen = -1;
    Eigen::VectorXd z;
    for (;;) {
      chosen = -1;
      double best = 0.0;
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (in_passive[static_cast<std::size_t>(j)] || banned[static_cast<std::size_t>(j)])
          continue;
        const double thresh = tol * col_norm(j) * rnorm;
        if (w(j) > thresh && w(j) > best) {
          best = w(j);
          chosen = static_cast<int>(j);
        }
      }
      if (chosen < 0) break;
      passive.push_back(chosen);
      z = solve_on_set(design, target, passive);
      if (z(z.size() - 1) > 0.0) break;
      passive.pop_back();
      banned[static_cast<std::size_t>(chosen)] = true;
    }
    if (chosen < 0) break;  // KKT satisfied
    if (++outer > max_iter)
      throw NumericError("nnls: iteration cap exceeded, residual " +
                         std::to_string(resid.norm()));
    in_passive[static_cast<std::size_t>(chosen)] = true;

    for (;;) {
      bool feasible = true;
      for (Eigen::Index k = 0; k < z.size(); ++k)
        if (z(k) <= 0.0) {
          feasible = false;
          break;
        }
      if (feasible) {
        x.setZero();
        for (std::size_t k = 0; k < passive.size(); ++k)
          x(passive[k]) = z(static_cast<Eigen::Index>(k));
        break;
      }
      // step toward z until the first passive coordinate reaches zero
      double alpha = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < passive.size(); ++k) {
        const double zk = z(static_cast<Eigen::Index>(k));
        if (zk <= 0.0) {
          const double xk = x(passive[k]);
          alpha = std::min(alpha, xk / (xk - zk));
        }
      }
      if (!std::isfinite(alpha)) alpha = 0.0;
      double xmax = 0.0;
      for (std::size_t k = 0; k < passive.size(); ++k) {
        const int j = passive[k];
        x(j) += alpha * (z(static_cast<Eigen::Index>(k)) - x(j));
        xmax = std::max(xmax, x(j));
      }
      std::vector<int> kept;
      for (std::size_t k = 0; k < passive.size(); ++k) {
        const int j = passive[k];
        if (x(j) <= 1e-14 * xmax) {
          x(j) = 0.0;
          in_passive[static_cast<std::size_t>(j)] = false;
        } else {
          kept.push_back(j);
        }
      }
      passive = std::move(kept);
      if (passive.empty()) {
        x.setZero();
        break;
      }
      z = solve_on_set(design, target, passive);
    }
    resid = target - design * x;
  }

  NnlsResult out;
  out.x = x;
  out.residual_norm = resid.norm();
  out.iterations = outer;
  return out;
}

}  // namespace fpd
