#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fpdeconv/config.hpp"
#include "fpdeconv/curves.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/fpca.hpp"
#include "fpdeconv/phantom.hpp"
#include "fpdeconv/pipeline.hpp"
#include "fpdeconv/rng.hpp"

using namespace fpd;

namespace {

SmoothedScan wrap_smoothed(const Eigen::MatrixXd& c_hat, const TimeGrid& grid) {
  SmoothedScan sm;
  sm.c_hat = c_hat;
  sm.grid = grid;
  sm.profile.poly = {1.0, 0, 0, 0, 0};
  sm.profile.beta = 1.0;
  return sm;
}

double quad_dot(std::span<const double> a, std::span<const double> b,
                const DenseGrid& g) {
  double acc = 0.0;
  for (std::size_t k = 0; k < g.m(); ++k) acc += g.weights[k] * a[k] * b[k];
  return acc;
}

}  // namespace

TEST_CASE("estimate_mean") {
  TimeGrid grid = TimeGrid::uniform_end(6, 10.0);

  SUBCASE("shared curve is returned as-is when lambda = 0") {
    DynamicScan scan;
    scan.grid = grid;
    scan.values.resize(3, 6);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 6; ++j) scan.values(i, j) = 1.0 + 0.5 * j;
    scan.mask.assign(3, 1);
    const auto mu = estimate_mean(scan);
    for (int j = 0; j < 6; ++j)
      CHECK(mu[static_cast<std::size_t>(j)] == doctest::Approx(1.0 + 0.5 * j));
  }

  SUBCASE("two voxels at 0 and 2c average to c exp(lambda t)") {
    DynamicScan scan;
    scan.grid = grid;
    scan.decay_lambda = 5.663e-4;
    scan.values.resize(2, 6);
    scan.values.row(0).setZero();
    scan.values.row(1).setConstant(4.0);
    scan.mask.assign(2, 1);
    const auto mu = estimate_mean(scan);
    for (int j = 0; j < 6; ++j)
      CHECK(mu[static_cast<std::size_t>(j)] ==
            doctest::Approx(2.0 * std::exp(5.663e-4 *
                                           grid.frame_mid[static_cast<std::size_t>(j)])));
  }

  SUBCASE("masked-out voxels are excluded") {
    DynamicScan scan;
    scan.grid = grid;
    scan.values = Eigen::MatrixXd::Ones(2, 6);
    scan.values.row(1).setConstant(100.0);
    scan.mask = {1, 0};
    const auto mu = estimate_mean(scan);
    CHECK(mu[0] == doctest::Approx(1.0));
    scan.mask = {0, 0};
    CHECK_THROWS_AS(estimate_mean(scan), ValidationError);
  }

  SUBCASE("CLT-scale agreement on the 1-D simulation") {
    Sim1dConfig opt;  // 200 curves, 200 frames, sd 2
    const InputFunction input = InputFunction::scaled_gamma(2000.0, 60.0, 1.0);
    const DenseGrid dense = DenseGrid::uniform(2000.0, 250);
    const Sim1dData data = generate_1d_dataset(opt, input, dense, 2024);
    const auto mu = estimate_mean(data.scan);
    // independent truth: fine-trapezoid convolution of the mean IRF
    double worst = 0.0;
    for (std::size_t j = 0; j < data.scan.grid.frames(); ++j) {
      const double t = data.scan.grid.frame_mid[j];
      const int nfine = 4000;
      double conv = 0.0;
      for (int q = 0; q <= nfine; ++q) {
        const double u = t * q / nfine;
        const double mval =
            0.0049 * std::exp(-0.0005 * u) + 0.0018 * std::exp(-0.0112 * u);
        const double w = (q == 0 || q == nfine) ? 0.5 : 1.0;
        conv += w * input(t - u) * mval;
      }
      conv *= t / nfine;
      worst = std::max(worst, std::abs(mu[j] - conv));
    }
    CHECK(worst < 3.0 * 2.0 / std::sqrt(200.0));
  }
}

TEST_CASE("estimate_multiplier") {
  const DenseGrid dense = DenseGrid::uniform(100.0, 50);
  const std::vector<double> left = dense.left_points();
  std::vector<double> mu(50);
  for (std::size_t k = 0; k < 50; ++k) mu[k] = 1.0 + 0.02 * left[k];

  SUBCASE("identical curve gives 1, scaled curve gives the scale") {
    CHECK(estimate_multiplier(mu, mu, dense) == doctest::Approx(1.0).epsilon(1e-14));
    std::vector<double> two(50);
    for (std::size_t k = 0; k < 50; ++k) two[k] = 2.0 * mu[k];
    CHECK(estimate_multiplier(two, mu, dense) == doctest::Approx(2.0).epsilon(1e-14));
  }

  SUBCASE("orthogonal perturbation leaves the multiplier at 1") {
    // explicit Gram-Schmidt of a bump against mu under the grid quadrature
    std::vector<double> g(50);
    for (std::size_t k = 0; k < 50; ++k)
      g[k] = std::sin(0.3 * left[k]) * std::exp(-0.01 * left[k]);
    const double proj = quad_dot(g, mu, dense) / quad_dot(mu, mu, dense);
    std::vector<double> curve(50);
    for (std::size_t k = 0; k < 50; ++k) {
      g[k] -= proj * mu[k];
      curve[k] = mu[k] + g[k];
    }
    CHECK(std::abs(quad_dot(g, mu, dense)) < 1e-12);
    CHECK(estimate_multiplier(curve, mu, dense) ==
          doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("zero-norm mean rejected") {
    std::vector<double> zeros(50, 0.0);
    CHECK_THROWS_AS(estimate_multiplier(mu, zeros, dense), ValidationError);
  }
}

TEST_CASE("estimate_covariance") {
  const TimeGrid grid = TimeGrid::uniform_end(12, 10.0);
  const int p = 12;
  std::vector<double> mu(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j)
    mu[static_cast<std::size_t>(j)] = 2.0 + 0.1 * j;

  SUBCASE("exact multiplicative curves give the zero matrix") {
    Eigen::MatrixXd c(3, p);
    std::vector<double> a0 = {0.5, 1.0, 2.5};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < p; ++j) c(i, j) = a0[static_cast<std::size_t>(i)] * mu[static_cast<std::size_t>(j)];
    const Eigen::MatrixXd gamma = estimate_covariance(
        wrap_smoothed(c, grid), mu, a0, std::vector<std::uint8_t>(3, 1));
    CHECK(gamma.cwiseAbs().maxCoeff() < 1e-20);
  }

  SUBCASE("one voxel gives the rank-one residual outer product") {
    Eigen::MatrixXd c(1, p);
    std::vector<double> r(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
      r[static_cast<std::size_t>(j)] = std::cos(0.4 * j);
      c(0, j) = 1.3 * mu[static_cast<std::size_t>(j)] + r[static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd gamma =
        estimate_covariance(wrap_smoothed(c, grid), mu,
                            std::vector<double>{1.3}, std::vector<std::uint8_t>{1});
    for (int j = 0; j < p; ++j)
      for (int k = 0; k < p; ++k)
        CHECK(gamma(j, k) == doctest::Approx(r[static_cast<std::size_t>(j)] *
                                             r[static_cast<std::size_t>(k)])
                                 .epsilon(1e-12));
  }

  SUBCASE("rank-one synthetic data recovers the planted eigenvector") {
    const DenseGrid dense = DenseGrid::uniform(grid.tau(), 60);
    const int n = 200;
    std::vector<double> phi(static_cast<std::size_t>(p));
    double nrm = 0.0;
    for (int j = 0; j < p; ++j) {
      phi[static_cast<std::size_t>(j)] = std::sin(0.5 * (j + 1));
      nrm += phi[static_cast<std::size_t>(j)] * phi[static_cast<std::size_t>(j)];
    }
    for (auto& v : phi) v /= std::sqrt(nrm);
    Rng rng(5);
    Eigen::MatrixXd c(n, p);
    std::vector<double> a0(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      a0[static_cast<std::size_t>(i)] = 1.0 + 0.1 * rng.normal();
      const double a1 = 0.8 * rng.normal();
      for (int j = 0; j < p; ++j)
        c(i, j) = a0[static_cast<std::size_t>(i)] * mu[static_cast<std::size_t>(j)] +
                  a1 * phi[static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd gamma = estimate_covariance(
        wrap_smoothed(c, grid), mu, a0, std::vector<std::uint8_t>(n, 1));
    const EigenBasis basis = eigendecompose(gamma, grid, dense, 3);
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (int j = 0; j < p; ++j) {
      dot += basis.frames(0, j) * phi[static_cast<std::size_t>(j)];
      n1 += basis.frames(0, j) * basis.frames(0, j);
      n2 += phi[static_cast<std::size_t>(j)] * phi[static_cast<std::size_t>(j)];
    }
    CHECK(std::abs(dot) / std::sqrt(n1 * n2) > 0.99);
  }
}

TEST_CASE("eigendecompose") {
  const TimeGrid grid = TimeGrid::uniform_end(32, 10.0);
  const DenseGrid dense = DenseGrid::uniform(grid.tau(), 100);
  const int p = 32;

  SUBCASE("rank-one covariance") {
    Eigen::VectorXd r(p);
    for (int j = 0; j < p; ++j) r(j) = std::exp(-0.01 * j) * std::sin(0.2 * j + 0.4);
    const Eigen::MatrixXd gamma = r * r.transpose();
    const EigenBasis basis = eigendecompose(gamma, grid, dense, 5);
    CHECK(basis.eigvals[0] > 0.0);
    for (std::size_t k = 1; k < basis.eigvals.size(); ++k)
      CHECK(basis.eigvals[k] == doctest::Approx(0.0).epsilon(1e-10));
    // unit quadrature norm
    std::vector<double> phi1(dense.m());
    for (std::size_t q = 0; q < dense.m(); ++q) phi1[q] = basis.dense(0, static_cast<Eigen::Index>(q));
    CHECK(quad_dot(phi1, phi1, dense) == doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("zero covariance has an all-zero spectrum") {
    const EigenBasis basis =
        eigendecompose(Eigen::MatrixXd::Zero(p, p), grid, dense, 4);
    for (const double v : basis.eigvals) CHECK(v == 0.0);
    CHECK(basis.total == 0.0);
  }

  SUBCASE("planted two-component spectrum with 4:1 ratio") {
    const std::vector<double> w = grid.trapezoid_weights();
    Eigen::VectorXd phi1(p), phi2(p);
    for (int j = 0; j < p; ++j) {
      const double t = grid.frame_mid[static_cast<std::size_t>(j)];
      phi1(j) = std::sin(2.0 * M_PI * t / grid.tau());
      phi2(j) = std::cos(2.0 * M_PI * t / grid.tau());
    }
    // normalize under the trapezoid weights and orthogonalize
    auto wdot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
      double acc = 0.0;
      for (int j = 0; j < p; ++j) acc += w[static_cast<std::size_t>(j)] * a(j) * b(j);
      return acc;
    };
    phi2 -= phi1 * (wdot(phi1, phi2) / wdot(phi1, phi1));
    phi1 /= std::sqrt(wdot(phi1, phi1));
    phi2 /= std::sqrt(wdot(phi2, phi2));
    const double z1 = 2.0, z2 = 0.5;
    const Eigen::MatrixXd gamma =
        z1 * phi1 * phi1.transpose() + z2 * phi2 * phi2.transpose();
    const EigenBasis basis = eigendecompose(gamma, grid, dense, 2);
    CHECK(basis.eigvals[0] / basis.eigvals[1] == doctest::Approx(4.0).epsilon(0.05));
  }

  SUBCASE("asymmetric input rejected") {
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Identity(p, p);
    gamma(0, 1) = 0.5;
    CHECK_THROWS_AS(eigendecompose(gamma, grid, dense, 3), ValidationError);
  }

  SUBCASE("sign convention: non-negative integral") {
    Eigen::VectorXd r = Eigen::VectorXd::Constant(p, -1.0);
    const EigenBasis basis = eigendecompose(r * r.transpose(), grid, dense, 1);
    double integral = 0.0;
    for (std::size_t q = 0; q < dense.m(); ++q)
      integral += dense.weights[q] * basis.dense(0, static_cast<Eigen::Index>(q));
    CHECK(integral > 0.0);
  }
}

TEST_CASE("compute_scores") {
  const TimeGrid grid = TimeGrid::uniform_end(16, 20.0);
  const DenseGrid dense = DenseGrid::uniform(grid.tau(), 80);
  // build an orthonormal basis through the estimator itself
  Eigen::VectorXd r1(16), r2(16);
  for (int j = 0; j < 16; ++j) {
    r1(j) = std::sin(0.3 * j + 0.2);
    r2(j) = std::cos(0.7 * j);
  }
  const Eigen::MatrixXd gamma =
      4.0 * r1 * r1.transpose() + 1.0 * r2 * r2.transpose();
  const EigenBasis basis = eigendecompose(gamma, grid, dense, 2);

  const std::size_t m = dense.m();
  std::vector<double> mu(m, 1.0);
  std::vector<double> curve(m);

  SUBCASE("zero residual gives zero scores") {
    for (std::size_t q = 0; q < m; ++q) curve[q] = 2.0 * mu[q];
    const auto s = compute_scores(curve, 2.0, mu, basis.dense, dense);
    for (const double v : s) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("residual equal to a basis function") {
    for (std::size_t q = 0; q < m; ++q)
      curve[q] = mu[q] + 0.7 * basis.dense(0, static_cast<Eigen::Index>(q));
    const auto s = compute_scores(curve, 1.0, mu, basis.dense, dense);
    CHECK(s[0] == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(s[1] == doctest::Approx(0.0).epsilon(1e-8));
  }

  SUBCASE("residual 2 phi1 - 3 phi2") {
    for (std::size_t q = 0; q < m; ++q)
      curve[q] = mu[q] + 2.0 * basis.dense(0, static_cast<Eigen::Index>(q)) -
                 3.0 * basis.dense(1, static_cast<Eigen::Index>(q));
    const auto s = compute_scores(curve, 1.0, mu, basis.dense, dense);
    CHECK(s[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(s[1] == doctest::Approx(-3.0).epsilon(1e-8));
  }
}

TEST_CASE("select_components applies the gain rule") {
  // gains (0.01): stop immediately
  CHECK(select_components(std::vector<double>{0.90, 0.91}, 0.025) == 0);
  // gains (0.30, 0.10, 0.01): two useful components
  CHECK(select_components(std::vector<double>{0.0, 0.30, 0.40, 0.41}, 0.025) == 2);
  // all gains large: return K
  CHECK(select_components(std::vector<double>{0.0, 0.2, 0.4, 0.6}, 0.025) == 3);
}

TEST_CASE("fpca model on a seeded phantom run") {
  RunConfig cfg;
  cfg.phantom.c_noise = 0.1;
  cfg.threads = 2;
  const TimeGrid frames = cfg.phantom_frames();
  PhantomSpec spec = PhantomSpec::simulation1(frames, cfg.phantom_input(), 0.1);
  const DenseGrid dense = cfg.make_dense_grid(frames.tau());
  const PhantomData data = synthesize_scan(spec, dense, 2718, false, 2);
  const SmoothedScan smoothed = presmooth_scan(data.scan, cfg);
  FpcaOptions fopt;
  fopt.k_max = 10;
  fopt.threads = 2;
  const FpcaModel model = fit_fpca(data.scan, smoothed, dense, fopt);

  SUBCASE("eigenfunctions orthonormal under grid quadrature") {
    for (int a = 0; a < model.K(); ++a)
      for (int b = a; b < model.K(); ++b) {
        double acc = 0.0;
        for (std::size_t q = 0; q < dense.m(); ++q)
          acc += dense.weights[q] * model.eigfuncs(a, static_cast<Eigen::Index>(q)) *
                 model.eigfuncs(b, static_cast<Eigen::Index>(q));
        CHECK(std::abs(acc - (a == b ? 1.0 : 0.0)) < 1e-8);
      }
  }

  SUBCASE("eigenvalues non-increasing and non-negative") {
    for (int k = 1; k < model.K(); ++k) {
      CHECK(model.eigvals[static_cast<std::size_t>(k)] <=
            model.eigvals[static_cast<std::size_t>(k - 1)] + 1e-15);
      CHECK(model.eigvals[static_cast<std::size_t>(k)] >= 0.0);
    }
  }

  SUBCASE("spectrum mass matches the quadrature trace within 1%") {
    const std::vector<double> w = frames.trapezoid_weights();
    double trace = 0.0;
    for (std::size_t j = 0; j < frames.frames(); ++j)
      trace += w[j] * model.gamma(static_cast<Eigen::Index>(j),
                                  static_cast<Eigen::Index>(j));
    CHECK(model.eig_total == doctest::Approx(trace).epsilon(0.01));
  }

  SUBCASE("variance decomposition non-decreasing under quadrature fitting") {
    // the quadrature-domain R^2: residual norm of the smoothed curve after L
    // orthonormal components, which is non-increasing by construction
    const std::vector<double> left = dense.left_points();
    int checked = 0;
    for (int i = 0; i < data.scan.n_voxels(); i += 37) {
      std::vector<double> curve(frames.frames());
      for (std::size_t j = 0; j < frames.frames(); ++j)
        curve[j] = smoothed.c_hat(i, static_cast<Eigen::Index>(j));
      const std::vector<double> cd = interpolate_to_dense(curve, frames, dense);
      std::vector<double> resid(dense.m());
      for (std::size_t q = 0; q < dense.m(); ++q)
        resid[q] = cd[q] - model.a0[static_cast<std::size_t>(i)] * model.mu_dense[q];
      double prev = quad_dot(resid, resid, dense);
      for (int k = 0; k < model.K(); ++k) {
        for (std::size_t q = 0; q < dense.m(); ++q)
          resid[q] -= model.scores(i, k) * model.eigfuncs(k, static_cast<Eigen::Index>(q));
        const double cur = quad_dot(resid, resid, dense);
        CHECK(cur <= prev + 1e-9 * (1.0 + prev));
        prev = cur;
      }
      ++checked;
    }
    CHECK(checked > 400);
  }

  SUBCASE("mean multiplier near one") {
    double mean_a0 = 0.0;
    for (const double a : model.a0) mean_a0 += a;
    mean_a0 /= static_cast<double>(model.a0.size());
    CHECK(mean_a0 > 0.9);
    CHECK(mean_a0 < 1.1);
  }

  SUBCASE("flat voxels are flagged with L = 0") {
    DynamicScan flat = data.scan;
    flat.values.row(0).setConstant(1.0);
    SmoothedScan sflat = smoothed;
    sflat.c_hat.row(0).setConstant(1.0);
    const FpcaModel m2 = fit_fpca(flat, sflat, dense, fopt);
    CHECK(m2.flat[0] == 1);
    CHECK(m2.L[0] == 0);
  }
}
