#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fpdeconv/curves.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/grids.hpp"
#include "fpdeconv/input_function.hpp"
#include "fpdeconv/scan.hpp"

using namespace fpd;

TEST_CASE("time grid validation") {
  TimeGrid g = TimeGrid::uniform_end(4, 10.0);
  CHECK(g.tau() == doctest::Approx(40.0));
  CHECK(g.frames() == 4);

  TimeGrid bad = g;
  bad.frame_mid[2] = bad.frame_mid[1];  // not strictly increasing
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = g;
  bad.frame_mid[0] = -1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("dense grid weights and telescoping identity") {
  for (const std::size_t m : {1ul, 2ul, 7ul, 250ul}) {
    const DenseGrid g = DenseGrid::uniform(4200.0, m);
    CHECK(g.weights[0] == doctest::Approx(0.5 * g.s[1]).epsilon(1e-15));
    for (std::size_t k = 1; k < m; ++k)
      CHECK(g.weights[k] == doctest::Approx(0.5 * (g.s[k + 1] - g.s[k - 1])).epsilon(1e-15));
    double sum = 0.0;
    for (const double w : g.weights) sum += w;
    CHECK(sum == doctest::Approx(0.5 * (g.s[m] + g.s[m - 1])).epsilon(1e-14));
  }
  // log-early spacing keeps the identity by construction
  const DenseGrid lg = DenseGrid::log_early(4200.0, 100, 3.0);
  double sum = 0.0;
  for (const double w : lg.weights) sum += w;
  CHECK(sum == doctest::Approx(0.5 * (lg.s[100] + lg.s[99])).epsilon(1e-14));
  CHECK(lg.s[1] < 4200.0 / 100.0);  // denser early
}

TEST_CASE("decay correction") {
  TimeGrid g;
  g.frame_start = {0.0, 1000.0};
  g.frame_mid = {0.5, 2000.0};  // includes the t ~ 0 and t = 2000 s cases
  g.frame_end = {1000.0, 2000.0};
  g.validate();

  const double lambda = 5.663e-4;
  Eigen::MatrixXd y(1, 2);
  y << 3.2, 1.0;
  Eigen::MatrixXd out = decay_correct(y, g, lambda);
  CHECK(out(0, 0) == doctest::Approx(3.2 * std::exp(lambda * 0.5)));
  // frozen from the exponential: exp(5.663e-4 * 2000) = exp(1.1326)
  CHECK(out(0, 1) == doctest::Approx(3.1037156794).epsilon(1e-9));

  SUBCASE("t = 0 leaves the value unchanged") {
    TimeGrid g0;
    g0.frame_start = {0.0};
    g0.frame_mid = {1e-300};
    g0.frame_end = {1.0};
    Eigen::MatrixXd v(1, 1);
    v << 3.2;
    CHECK(decay_correct(v, g0, lambda)(0, 0) == doctest::Approx(3.2).epsilon(1e-15));
  }

  SUBCASE("round trip with negated lambda") {
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> u(0.1, 9.0);
    Eigen::MatrixXd big(3, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) big(i, j) = u(eng);
    const Eigen::MatrixXd fwd = decay_correct(big, g, lambda);
    const Eigen::MatrixXd back = decay_correct(fwd, g, -lambda);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(back(i, j) == doctest::Approx(big(i, j)).epsilon(1e-12));
  }

  SUBCASE("non-finite input rejected with the offending index") {
    Eigen::MatrixXd v(1, 2);
    v << 1.0, std::numeric_limits<double>::quiet_NaN();
    try {
      decay_correct(v, g, lambda);
      FAIL("expected rejection");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("frame 1") != std::string::npos);
    }
  }
}

TEST_CASE("integrate_curve") {
  const std::size_t m = 250;
  const DenseGrid g = DenseGrid::uniform(4200.0, m);

  SUBCASE("zero integrand") {
    std::vector<double> zeros(m, 0.0);
    CHECK(integrate_curve(zeros, g) == 0.0);
  }

  SUBCASE("constant one equals tau - dt/2") {
    std::vector<double> ones(m, 1.0);
    const double dt = 4200.0 / m;
    CHECK(integrate_curve(ones, g) == doctest::Approx(4200.0 - dt / 2).epsilon(1e-14));
  }

  SUBCASE("exponential against the analytic antiderivative") {
    std::vector<double> v(m);
    const std::vector<double> left = g.left_points();
    for (std::size_t k = 0; k < m; ++k) v[k] = std::exp(-0.003 * left[k]);
    const double exact = (1.0 - std::exp(-12.6)) / 0.003;  // 333.332
    CHECK(integrate_curve(v, g) ==
          doctest::Approx(exact).epsilon(0.005));
  }

  SUBCASE("length mismatch rejected") {
    std::vector<double> v(m - 1, 1.0);
    CHECK_THROWS_AS(integrate_curve(v, g), ValidationError);
  }

  SUBCASE("degree <= 1 sharp identity") {
    // The quadrature equals the analytic integral over [0, s_{m-1} + dt/2]
    // minus slope * dt^2 / 8 exactly; constants integrate exactly.
    const double dt = 4200.0 / m;
    const double a = 0.7, b = 0.31;
    std::vector<double> v(m);
    const std::vector<double> left = g.left_points();
    for (std::size_t k = 0; k < m; ++k) v[k] = a + b * left[k];
    const double T = left[m - 1] + dt / 2;
    const double analytic = a * T + b * T * T / 2;
    const double correction = b * dt * dt / 8.0;
    CHECK(integrate_curve(v, g) ==
          doctest::Approx(analytic - correction).epsilon(1e-10));
    std::vector<double> c(m, a);
    CHECK(integrate_curve(c, g) == doctest::Approx(a * T).epsilon(1e-12));
  }
}

TEST_CASE("interpolate_to_dense") {
  const TimeGrid grid = TimeGrid::uniform_end(8, 10.0);
  const DenseGrid dense = DenseGrid::uniform(grid.tau(), 40);

  SUBCASE("constant curve") {
    std::vector<double> c(8, 3.5);
    for (const double v : interpolate_to_dense(c, grid, dense))
      CHECK(v == doctest::Approx(3.5).epsilon(1e-15));
  }

  SUBCASE("midpoint of a segment") {
    std::vector<double> c = {1, 2, 3, 4, 5, 6, 7, 8};
    const LinearInterpolant f(grid.frame_mid, c);
    const double mid = 0.5 * (grid.frame_mid[2] + grid.frame_mid[3]);
    CHECK(f(mid) == doctest::Approx(0.5 * (c[2] + c[3])).epsilon(1e-15));
  }

  SUBCASE("piecewise-linear curve reproduced at dense points") {
    std::vector<double> c(8);
    for (std::size_t j = 0; j < 8; ++j) c[j] = 2.0 + 0.25 * grid.frame_mid[j];
    const std::vector<double> out = interpolate_to_dense(c, grid, dense);
    const std::vector<double> left = dense.left_points();
    for (std::size_t q = 0; q < left.size(); ++q) {
      const double t = left[q];
      double expect;
      if (t <= grid.frame_mid.front())
        expect = c.front();  // constant extrapolation
      else if (t >= grid.frame_mid.back())
        expect = c.back();
      else
        expect = 2.0 + 0.25 * t;
      CHECK(out[q] == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  SUBCASE("empty curve rejected") {
    std::vector<double> none;
    CHECK_THROWS_AS(LinearInterpolant(none, none), ValidationError);
  }
}

TEST_CASE("left_to_rows shifts shared nodes and holds the last value") {
  std::vector<double> left = {10.0, 11.0, 12.0, 13.0};
  const auto rows = left_to_rows(left);
  CHECK(rows == std::vector<double>{11.0, 12.0, 13.0, 13.0});
}

TEST_CASE("input function") {
  InputFunction f({0.0, 1.0, 3.0}, {0.0, 2.0, 2.5});
  CHECK(f(-1.0) == 0.0);
  CHECK(f(0.5) == doctest::Approx(1.0));
  CHECK(f(2.0) == doctest::Approx(2.25));
  CHECK(f(99.0) == doctest::Approx(2.5));  // last value held

  CHECK_THROWS_AS(InputFunction({0.5, 1.0}, {1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(InputFunction({0.0, 1.0}, {0.0, -1.0}), ValidationError);
  CHECK_THROWS_AS(InputFunction({0.0, 1.0}, {0.0, 0.0}), ValidationError);

  const InputFunction g = InputFunction::scaled_gamma(2000.0, 60.0, 1.0);
  CHECK(g(60.0) == doctest::Approx(1.0).epsilon(1e-3));  // peak at theta
  CHECK(g(0.0) == 0.0);
}

TEST_CASE("scan validation") {
  DynamicScan scan;
  scan.grid = TimeGrid::uniform_end(3, 5.0);
  scan.values = Eigen::MatrixXd::Ones(2, 3);
  scan.mask = {1, 1};
  scan.validate();

  scan.decay_lambda = -0.1;
  CHECK_THROWS_AS(scan.validate(), ValidationError);
  scan.decay_lambda = 0.0;
  scan.mask = {1};
  CHECK_THROWS_AS(scan.validate(), ValidationError);
}
