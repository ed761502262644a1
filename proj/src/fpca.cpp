#include "fpdeconv/fpca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fpdeconv/curves.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/parallel.hpp"

namespace fpd {

std::vector<double> estimate_mean(const DynamicScan& scan) {
  const std::size_t n_in = scan.masked_count();
  if (n_in == 0) throw ValidationError("estimate_mean: empty mask");
  const int p = static_cast<int>(scan.frames());
  std::vector<double> mu(static_cast<std::size_t>(p), 0.0);
  for (int i = 0; i < scan.n_voxels(); ++i) {
    if (!scan.mask[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < p; ++j) mu[static_cast<std::size_t>(j)] += scan.values(i, j);
  }
  for (int j = 0; j < p; ++j)
    mu[static_cast<std::size_t>(j)] *=
        std::exp(scan.decay_lambda * scan.grid.frame_mid[static_cast<std::size_t>(j)]) /
        static_cast<double>(n_in);
  return mu;
}

double estimate_multiplier(std::span<const double> c_hat_dense_i,
                           std::span<const double> mu_dense,
                           const DenseGrid& grid) {
  const double denom = [&] {
    double acc = 0.0;
    for (std::size_t k = 0; k < mu_dense.size(); ++k)
      acc += grid.weights[k] * mu_dense[k] * mu_dense[k];
    return acc;
  }();
  if (!(denom > 0.0))
    throw ValidationError("estimate_multiplier: mean function has zero norm");
  if (c_hat_dense_i.size() != mu_dense.size() || mu_dense.size() != grid.m())
    throw ValidationError("estimate_multiplier: length mismatch");
  double num = 0.0;
  for (std::size_t k = 0; k < mu_dense.size(); ++k)
    num += grid.weights[k] * c_hat_dense_i[k] * mu_dense[k];
  return num / denom;
}

Eigen::MatrixXd estimate_covariance(const SmoothedScan& smoothed,
                                    std::span<const double> mu_frames,
                                    std::span<const double> a0,
                                    const std::vector<std::uint8_t>& mask,
                                    int threads) {
  const Eigen::Index n = smoothed.c_hat.rows();
  const Eigen::Index p = smoothed.c_hat.cols();
  if (static_cast<std::size_t>(p) != mu_frames.size() ||
      static_cast<std::size_t>(n) != a0.size() ||
      static_cast<std::size_t>(n) != mask.size())
    throw ValidationError("estimate_covariance: dimension mismatch");
  std::size_t n_in = 0;
  for (auto b : mask) n_in += (b != 0);
  if (n_in == 0) throw ValidationError("estimate_covariance: empty mask");

  const Eigen::Map<const Eigen::VectorXd> mu(mu_frames.data(), p);
  // per-chunk partial sums merged in chunk order for determinism
  const std::size_t chunk = 1024;
  const std::size_t n_chunks = (static_cast<std::size_t>(n) + chunk - 1) / chunk;
  std::vector<Eigen::MatrixXd> partials(n_chunks);
  parallel_chunks(static_cast<std::size_t>(n), chunk, threads,
                  [&](std::size_t c, std::size_t b, std::size_t e) {
                    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
                    Eigen::VectorXd r(p);
                    for (std::size_t i = b; i < e; ++i) {
                      if (!mask[i]) continue;
                      r = smoothed.c_hat.row(static_cast<Eigen::Index>(i)).transpose() -
                          a0[i] * mu;
                      acc.selfadjointView<Eigen::Lower>().rankUpdate(r);
                    }
                    partials[c] = std::move(acc);
                  });
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(p, p);
  for (const auto& part : partials) gamma += part;
  gamma = gamma.selfadjointView<Eigen::Lower>();
  gamma /= static_cast<double>(n_in);
  return gamma;
}

EigenBasis eigendecompose(const Eigen::MatrixXd& gamma, const TimeGrid& grid,
                          const DenseGrid& dense, int k_max) {
  const Eigen::Index p = gamma.rows();
  if (gamma.cols() != p || static_cast<std::size_t>(p) != grid.frames())
    throw ValidationError("eigendecompose: covariance shape mismatch");
  const double scale = std::max(1.0, gamma.cwiseAbs().maxCoeff());
  if ((gamma - gamma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ValidationError("eigendecompose: covariance not symmetric");
  if (k_max < 1) throw ValidationError("eigendecompose: k_max must be >= 1");

  const std::vector<double> w = grid.trapezoid_weights();
  Eigen::VectorXd sqw(p);
  for (Eigen::Index j = 0; j < p; ++j)
    sqw(j) = std::sqrt(w[static_cast<std::size_t>(j)]);
  const Eigen::MatrixXd sym =
      sqw.asDiagonal() * ((gamma + gamma.transpose()) / 2.0) * sqw.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecompose: eigensolver failed");

  const int K = std::min<int>(k_max, static_cast<int>(p));
  EigenBasis basis;
  basis.eigvals.resize(static_cast<std::size_t>(K));
  const double top = std::max(0.0, es.eigenvalues()(p - 1));
  basis.total = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    double v = es.eigenvalues()(j);
    if (v < -1e-8 * std::max(top, 1e-300))
      v = 0.0;  // tiny negatives from finite precision
    basis.total += std::max(v, 0.0);
  }

  const std::size_t m = dense.m();
  basis.dense.resize(K, static_cast<Eigen::Index>(m));
  basis.frames.resize(K, p);
  const std::vector<double> left = dense.left_points();

  std::vector<Eigen::VectorXd> dense_rows;
  dense_rows.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const Eigen::Index col = p - 1 - k;  // descending eigenvalues
    basis.eigvals[static_cast<std::size_t>(k)] = std::max(0.0, es.eigenvalues()(col));
    Eigen::VectorXd phi_frames = es.eigenvectors().col(col).cwiseQuotient(sqw);
    std::vector<double> pf(phi_frames.data(), phi_frames.data() + p);
    const std::vector<double> pd = interpolate_to_dense(pf, grid, dense);
    dense_rows.emplace_back(Eigen::Map<const Eigen::VectorXd>(pd.data(),
                                                              static_cast<Eigen::Index>(m)));
  }

  // re-orthonormalize on the dense grid (modified Gram-Schmidt under the
  // quadrature inner product), in descending eigenvalue order
  const Eigen::Map<const Eigen::VectorXd> qw(dense.weights.data(),
                                             static_cast<Eigen::Index>(m));
  auto dot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a.array() * b.array() * qw.array()).sum();
  };
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd v = dense_rows[static_cast<std::size_t>(k)];
    for (int j = 0; j < k; ++j) {
      const Eigen::VectorXd prev = basis.dense.row(j).transpose();
      v -= dot(prev, v) * prev;
    }
    const double nrm = std::sqrt(std::max(0.0, dot(v, v)));
    if (nrm > 1e-12) {
      v /= nrm;
    } else {
      v.setZero();  // exactly degenerate direction; its eigenvalue is ~0
    }
    // sign convention: non-negative integral, ties by first significant value
    const double integral = (v.array() * qw.array()).sum();
    bool flip = integral < 0.0;
    if (std::abs(integral) <= 1e-10) {
      for (Eigen::Index q = 0; q < v.size(); ++q)
        if (std::abs(v(q)) > 1e-12) {
          flip = v(q) < 0.0;
          break;
        }
    }
    if (flip) v = -v;
    basis.dense.row(k) = v.transpose();
  }

  // frame-point values from the dense representation, for R^2 reconstruction
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd v = basis.dense.row(k).transpose();
    const LinearInterpolant f(left, std::span<const double>(v.data(),
                                                            static_cast<std::size_t>(v.size())));
    for (Eigen::Index j = 0; j < p; ++j)
      basis.frames(k, j) = f(grid.frame_mid[static_cast<std::size_t>(j)]);
  }
  return basis;
}

std::vector<double> compute_scores(std::span<const double> c_hat_dense_i,
                                   double a0_i, std::span<const double> mu_dense,
                                   const Eigen::MatrixXd& eigfuncs,
                                   const DenseGrid& grid) {
  const std::size_t m = grid.m();
  if (c_hat_dense_i.size() != m || mu_dense.size() != m ||
      static_cast<std::size_t>(eigfuncs.cols()) != m)
    throw ValidationError("compute_scores: length mismatch");
  const int K = static_cast<int>(eigfuncs.rows());
  std::vector<double> scores(static_cast<std::size_t>(K), 0.0);
  for (int k = 0; k < K; ++k) {
    double acc = 0.0;
    for (std::size_t q = 0; q < m; ++q)
      acc += grid.weights[q] * (c_hat_dense_i[q] - a0_i * mu_dense[q]) *
             eigfuncs(k, static_cast<Eigen::Index>(q));
    scores[static_cast<std::size_t>(k)] = acc;
  }
  return scores;
}

int select_components(std::span<const double> r2_row, double threshold) {
  const int K = static_cast<int>(r2_row.size()) - 1;
  for (int k = 0; k < K; ++k)
    if (r2_row[static_cast<std::size_t>(k + 1)] - r2_row[static_cast<std::size_t>(k)] <
        threshold)
      return k;
  return K;
}

FpcaModel fit_fpca(const DynamicScan& scan, const SmoothedScan& smoothed,
                   const DenseGrid& dense, const FpcaOptions& opt) {
  const Eigen::Index n = scan.n_voxels();
  const int p = static_cast<int>(scan.frames());
  const std::size_t m = dense.m();

  FpcaModel model;
  model.mu_frames = estimate_mean(scan);
  model.mu_dense = interpolate_to_dense(model.mu_frames, scan.grid, dense);

  // dense resample of every smoothed curve; row-major so rows are contiguous
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c_dense(
      n, static_cast<Eigen::Index>(m));
  parallel_for(static_cast<std::size_t>(n), opt.threads, [&](std::size_t i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    if (!scan.mask[i]) {
      c_dense.row(row).setZero();
      return;
    }
    std::vector<double> curve(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) curve[static_cast<std::size_t>(j)] = smoothed.c_hat(row, j);
    const std::vector<double> cd = interpolate_to_dense(curve, scan.grid, dense);
    for (std::size_t q = 0; q < m; ++q)
      c_dense(row, static_cast<Eigen::Index>(q)) = cd[q];
  });

  model.a0.assign(static_cast<std::size_t>(n), 1.0);
  if (opt.multiplicative) {
    parallel_for(static_cast<std::size_t>(n), opt.threads, [&](std::size_t i) {
      if (!scan.mask[i]) return;
      const Eigen::Index row = static_cast<Eigen::Index>(i);
      const std::span<const double> cd(&c_dense(row, 0), m);
      model.a0[i] = estimate_multiplier(cd, model.mu_dense, dense);
    });
  }

  model.gamma = estimate_covariance(smoothed, model.mu_frames, model.a0, scan.mask,
                                    opt.threads);
  EigenBasis basis = eigendecompose(model.gamma, scan.grid, dense, opt.k_max);
  model.eigvals = std::move(basis.eigvals);
  model.eigfuncs = std::move(basis.dense);
  model.eigfuncs_frames = std::move(basis.frames);
  model.eig_total = basis.total;
  const int K = model.K();

  model.scores.resize(n, K);
  model.r2.resize(n, K + 1);
  model.L.assign(static_cast<std::size_t>(n), 0);
  model.flat.assign(static_cast<std::size_t>(n), 0);

  parallel_for(static_cast<std::size_t>(n), opt.threads, [&](std::size_t i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    if (!scan.mask[i]) {
      model.scores.row(row).setZero();
      model.r2.row(row).setZero();
      return;
    }
    const std::span<const double> cd(&c_dense(row, 0), m);
    const std::vector<double> sc =
        compute_scores(cd, model.a0[i], model.mu_dense, model.eigfuncs, dense);
    for (int k = 0; k < K; ++k) model.scores(row, k) = sc[static_cast<std::size_t>(k)];

    // R^2 against the raw decayed data
    double y_mean = 0.0;
    for (int j = 0; j < p; ++j) y_mean += scan.values(row, j);
    y_mean /= p;
    double y_var = 0.0;
    for (int j = 0; j < p; ++j) {
      const double d = scan.values(row, j) - y_mean;
      y_var += d * d;
    }
    y_var /= p;
    if (y_var <= 0.0) {
      model.flat[i] = 1;
      model.L[i] = 0;
      model.r2.row(row).setZero();
      return;
    }
    for (int Lc = 0; Lc <= K; ++Lc) {
      double r_mean = 0.0, r_var = 0.0;
      std::vector<double> resid(static_cast<std::size_t>(p));
      for (int j = 0; j < p; ++j) {
        double fit = model.a0[i] * model.mu_frames[static_cast<std::size_t>(j)];
        for (int k = 0; k < Lc; ++k)
          fit += model.scores(row, k) * model.eigfuncs_frames(k, j);
        fit *= std::exp(-scan.decay_lambda * scan.grid.frame_mid[static_cast<std::size_t>(j)]);
        resid[static_cast<std::size_t>(j)] = scan.values(row, j) - fit;
        r_mean += resid[static_cast<std::size_t>(j)];
      }
      r_mean /= p;
      for (int j = 0; j < p; ++j) {
        const double d = resid[static_cast<std::size_t>(j)] - r_mean;
        r_var += d * d;
      }
      r_var /= p;
      model.r2(row, Lc) = 1.0 - r_var / y_var;
    }
    std::vector<double> r2row(static_cast<std::size_t>(K + 1));
    for (int k = 0; k <= K; ++k) r2row[static_cast<std::size_t>(k)] = model.r2(row, k);
    model.L[i] = select_components(r2row, opt.r2_threshold);
  });

  if (opt.selection == FpcaOptions::Selection::FVE) {
    int k_sel = 0;
    double acc = 0.0;
    while (k_sel < K && model.eig_total > 0.0 && acc < opt.fve * model.eig_total)
      acc += model.eigvals[static_cast<std::size_t>(k_sel++)];
    for (std::size_t i = 0; i < model.L.size(); ++i)
      if (scan.mask[i] && !model.flat[i]) model.L[i] = k_sel;
  }
  return model;
}

}  // namespace fpd
