#pragma once

#include <Eigen/Core>

namespace fpd {

struct NnlsResult {
  Eigen::VectorXd x;      // >= 0 exactly
  double residual_norm;   // ||target - design x||
  int iterations;
};

/// Lawson-Hanson active-set solve of min ||target - design x||^2 s.t. x >= 0.
/// KKT at exit: gradient components of zero coordinates >= -tol*scale.
/// max_iter = 0 uses 3 * cols; exceeding the cap throws NumericError with a
/// residual report.
NnlsResult nnls(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                int max_iter = 0, double tol = 1e-10);

}  // namespace fpd
