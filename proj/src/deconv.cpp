#include "fpdeconv/deconv.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "fpdeconv/curves.hpp"
#include "fpdeconv/errors.hpp"

namespace fpd {

ConvolutionOperator build_convolution_matrix(const InputFunction& input,
                                             const DenseGrid& grid) {
  grid.validate();
  const Eigen::Index m = static_cast<Eigen::Index>(grid.m());
  ConvolutionOperator op;
  op.grid = grid;
  op.matrix = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double sj = grid.s[static_cast<std::size_t>(j + 1)];  // row grid
    for (Eigen::Index k = 0; k <= j; ++k) {
      const double v = input(sj - grid.s[static_cast<std::size_t>(k)]);
      if (v < 0.0)
        throw ValidationError("build_convolution_matrix: negative input value");
      op.matrix(j, k) = v * grid.weights[static_cast<std::size_t>(k)];
    }
  }
  return op;
}

std::vector<double> deconvolve_curve(const ConvolutionOperator& op,
                                     std::span<const double> curve_rows,
                                     const DeconvOptions& opt) {
  const Eigen::Index m = op.matrix.rows();
  if (curve_rows.size() != static_cast<std::size_t>(m))
    throw ValidationError("deconvolve_curve: curve length mismatch");
  const Eigen::Map<const Eigen::VectorXd> c(curve_rows.data(), m);
  Eigen::VectorXd x;
  if (opt.ridge > 0.0) {
    const Eigen::MatrixXd ata =
        op.matrix.transpose() * op.matrix +
        opt.ridge * opt.ridge * Eigen::MatrixXd::Identity(m, m);
    x = Eigen::LDLT<Eigen::MatrixXd>(ata).solve(op.matrix.transpose() * c);
  } else {
    const double dmax = op.matrix.cwiseAbs().maxCoeff();
    const double dmin = op.matrix.diagonal().minCoeff();
    if (!(dmin > 1e-14 * dmax))
      throw NumericError("deconvolve_curve: ill-conditioned operator "
                         "(diagonal " + std::to_string(dmin) + ", enable ridge)");
    x = op.matrix.triangularView<Eigen::Lower>().solve(c);
  }
  return std::vector<double>(x.data(), x.data() + m);
}

DeconvolvedBasis deconvolve_basis(const ConvolutionOperator& op,
                                  const Eigen::MatrixXd& curves_rows,
                                  const DeconvOptions& opt) {
  const Eigen::Index m = op.matrix.rows();
  if (curves_rows.cols() != m || curves_rows.rows() < 1)
    throw ValidationError("deconvolve_basis: curves shape mismatch");
  const int K = static_cast<int>(curves_rows.rows()) - 1;

  DeconvolvedBasis basis;
  basis.phi_d.resize(K, m);
  basis.integrals.resize(static_cast<std::size_t>(K) + 1);
  basis.residuals.resize(static_cast<std::size_t>(K) + 1);
  for (int r = 0; r <= K; ++r) {
    std::vector<double> curve(static_cast<std::size_t>(m));
    for (Eigen::Index q = 0; q < m; ++q)
      curve[static_cast<std::size_t>(q)] = curves_rows(r, q);
    const std::vector<double> x = deconvolve_curve(op, curve, opt);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), m);
    const Eigen::Map<const Eigen::VectorXd> cv(curve.data(), m);
    const double cnorm = cv.norm();
    basis.residuals[static_cast<std::size_t>(r)] =
        cnorm > 0.0 ? (op.matrix * xv - cv).norm() / cnorm : 0.0;
    basis.integrals[static_cast<std::size_t>(r)] = integrate_curve(x, op.grid);
    if (r == 0)
      basis.mu_d = x;
    else
      for (Eigen::Index q = 0; q < m; ++q) basis.phi_d(r - 1, q) = x[static_cast<std::size_t>(q)];
  }
  return basis;
}

std::vector<double> reconstruct_irf(const DeconvolvedBasis& basis, double a0,
                                    std::span<const double> scores, int L) {
  const int K = static_cast<int>(basis.phi_d.rows());
  if (L < 0 || L > K || static_cast<std::size_t>(L) > scores.size())
    throw ValidationError("reconstruct_irf: L exceeds available components");
  const std::size_t m = basis.mu_d.size();
  std::vector<double> irf(m);
  for (std::size_t q = 0; q < m; ++q) irf[q] = a0 * basis.mu_d[q];
  for (int k = 0; k < L; ++k)
    for (std::size_t q = 0; q < m; ++q)
      irf[q] += scores[static_cast<std::size_t>(k)] * basis.phi_d(k, static_cast<Eigen::Index>(q));
  return irf;
}

std::vector<double> compute_vt_map(const FpcaModel& model,
                                   const DeconvolvedBasis& basis) {
  const int K = static_cast<int>(basis.phi_d.rows());
  if (K != model.K())
    throw ValidationError("compute_vt_map: basis and model disagree on K");
  const std::size_t n = model.a0.size();
  std::vector<double> vt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = model.a0[i] * basis.integrals[0];
    const int L = model.L[i];
    for (int k = 0; k < L; ++k)
      v += model.scores(static_cast<Eigen::Index>(i), k) *
           basis.integrals[static_cast<std::size_t>(k) + 1];
    vt[i] = v;
  }
  return vt;
}

}  // namespace fpd
