#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "fpdeconv/fpca.hpp"
#include "fpdeconv/grids.hpp"
#include "fpdeconv/input_function.hpp"

namespace fpd {

/// Lower-triangular discretization of the convolution integral: rows indexed
/// by s_1..s_m, columns by s_0..s_{m-1}, entry (j,k) = I(s_j - s_k) * w_k.
struct ConvolutionOperator {
  Eigen::MatrixXd matrix;  // m x m
  DenseGrid grid;
};

ConvolutionOperator build_convolution_matrix(const InputFunction& input,
                                             const DenseGrid& grid);

struct DeconvOptions {
  double ridge = 0.0;  // penalty epsilon; 0 = exact triangular solve
};

/// Deconvolved basis on the left grid s_0..s_{m-1}: the mean row first, then
/// the eigenfunction rows, with their quadrature integrals and the relative
/// convolve-back residuals of each solve.
struct DeconvolvedBasis {
  std::vector<double> mu_d;       // m
  Eigen::MatrixXd phi_d;          // K x m
  std::vector<double> integrals;  // K+1: int mu_d, then int phi_d_k
  std::vector<double> residuals;  // K+1
};

/// Least-squares deconvolution of one curve sampled on the row grid s_1..s_m.
std::vector<double> deconvolve_curve(const ConvolutionOperator& op,
                                     std::span<const double> curve_rows,
                                     const DeconvOptions& opt = {});

/// curves: (K+1) x m, the dense mean then the eigenfunctions, on the row grid.
DeconvolvedBasis deconvolve_basis(const ConvolutionOperator& op,
                                  const Eigen::MatrixXd& curves_rows,
                                  const DeconvOptions& opt = {});

/// M_i(t, L) = a0 * mu_d(t) + sum_{k<=L} scores_k * phi_d_k(t).
std::vector<double> reconstruct_irf(const DeconvolvedBasis& basis, double a0,
                                    std::span<const double> scores, int L);

/// V_T(i) = a0_i * int mu_d + sum_{k<=L_i} scores_ik * int phi_d_k.
std::vector<double> compute_vt_map(const FpcaModel& model,
                                   const DeconvolvedBasis& basis);

}  // namespace fpd
