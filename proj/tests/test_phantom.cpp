#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fpdeconv/config.hpp"
#include "fpdeconv/curves.hpp"
#include "fpdeconv/deconv.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/fpca.hpp"
#include "fpdeconv/phantom.hpp"
#include "fpdeconv/rng.hpp"

using namespace fpd;

TEST_CASE("label image has the exact region sizes") {
  const std::vector<int> labels = shepp_vardi_labels();
  REQUIRE(labels.size() == 128u * 128u);
  const std::vector<int> sizes = region_sizes(labels);
  CHECK(sizes == std::vector<int>{9614, 5351, 701, 14, 704});
  // deterministic
  CHECK(shepp_vardi_labels() == labels);
}

TEST_CASE("gamma mixture IRF") {
  GammaMixture r2;  // region-2 defaults
  CHECK(gamma_mixture_irf(r2, 0.0) == doctest::Approx(1.0 / 200.0));

  IrfSample irf;
  irf.kind = IrfSpec::Kind::GammaMix;
  irf.gm = r2;

  SUBCASE("mean V_T formula (60/c) sum w a b") {
    // region 2: (60/200)(0.7*1.5*2 + 0.3*10*1.5) = 1.98, paper quotes ~1.97
    const double vt2 = analytic_vt(irf, 1e9);
    CHECK(vt2 == doctest::Approx(1.98).epsilon(1e-6));
    CHECK(std::abs(vt2 - 1.97) / 1.97 < 0.01);

    GammaMixture r4;
    r4.w1 = 0.8;
    r4.w2 = 0.2;
    r4.a1 = 2.0;
    r4.b1 = 2.5;
    r4.a2 = 15.0;
    r4.b2 = 2.0;
    r4.c = 70.0;
    IrfSample irf4;
    irf4.kind = IrfSpec::Kind::GammaMix;
    irf4.gm = r4;
    const double vt4 = analytic_vt(irf4, 1e9);
    CHECK(vt4 == doctest::Approx(60.0 / 70.0 * (0.8 * 5.0 + 0.2 * 30.0)).epsilon(1e-6));
    CHECK(std::abs(vt4 - 8.54) / 8.54 < 0.01);
  }

  SUBCASE("finite-tau analytic V_T matches a 10,000-point trapezoid") {
    const double tau = 5580.0;
    const int n = 10000;
    double acc = 0.0;
    for (int q = 0; q <= n; ++q) {
      const double t = tau * q / n;
      const double w = (q == 0 || q == n) ? 0.5 : 1.0;
      acc += w * gamma_mixture_irf(r2, t);
    }
    acc *= tau / n;
    CHECK(analytic_vt(irf, tau) == doctest::Approx(acc).epsilon(1e-6));
  }

  SUBCASE("non-positive shape or scale rejected") {
    GammaMixture bad = r2;
    bad.a1 = -1.0;
    CHECK_THROWS_AS(gamma_mixture_irf(bad, 10.0), ValidationError);
  }
}

TEST_CASE("analytic V_T for exponential sums") {
  IrfSample irf;
  irf.kind = IrfSpec::Kind::SumExp;

  SUBCASE("region-5 value approaches 0.02 for large tau") {
    irf.terms = {{0.0007, 0.0377}};
    CHECK(analytic_vt(irf, 1e7) == doctest::Approx(0.0007 / 0.0377).epsilon(1e-9));
    CHECK(analytic_vt(irf, 5580.0) == doctest::Approx(0.0185676).epsilon(1e-4));
  }

  SUBCASE("region-2 value is alpha/beta at infinity") {
    irf.terms = {{0.0060, 0.0030}};
    CHECK(analytic_vt(irf, 1e9) == doctest::Approx(2.0).epsilon(1e-9));
  }

  SUBCASE("region-3 value at tau = 5580") {
    irf.terms = {{0.0040, 0.0008}, {0.0023, 0.0103}};
    CHECK(analytic_vt(irf, 5580.0) == doctest::Approx(5.16572).epsilon(1e-5));
  }

  SUBCASE("zero IRF integrates to zero") {
    IrfSample zero;
    CHECK(analytic_vt(zero, 5580.0) == 0.0);
  }
}

namespace {

RunConfig small_cfg() {
  RunConfig cfg;
  cfg.threads = 2;
  return cfg;
}

PhantomSpec spec_with(const RunConfig& cfg, double c_noise, double fwhm,
                      const std::string& mode = "global") {
  PhantomSpec spec = PhantomSpec::simulation1(cfg.phantom_frames(),
                                              cfg.phantom_input(), c_noise);
  spec.psf_fwhm_mm = fwhm;
  spec.noise_mode = mode;
  return spec;
}

}  // namespace

TEST_CASE("noiseless unblurred scan equals the direct convolution") {
  const RunConfig cfg = small_cfg();
  const PhantomSpec spec = spec_with(cfg, 0.0, 0.0);
  const DenseGrid dense = cfg.make_dense_grid(spec.frames.tau());
  const PhantomData data = synthesize_scan(spec, dense, 4, false, 2);

  // fine-trapezoid oracle at a few voxels and frames
  int checked = 0;
  for (int i = 5000; i < data.scan.n_voxels() && checked < 4; i += 977) {
    const int region = spec.labels[static_cast<std::size_t>(i)];
    if (region != 2) continue;
    ++checked;
    Rng rng(4, static_cast<std::uint64_t>(i));
    const IrfSample irf = sample_irf(spec.region_irfs.at(region), rng);
    const double curve_max = data.scan.values.row(i).cwiseAbs().maxCoeff();
    for (const int j : {3, 17, 31}) {
      const double t = spec.frames.frame_mid[static_cast<std::size_t>(j)];
      const int nf = 20000;
      double conv = 0.0;
      for (int q = 0; q <= nf; ++q) {
        const double u = t * q / nf;
        const double w = (q == 0 || q == nf) ? 0.5 : 1.0;
        conv += w * spec.input(t - u) * irf.value(u);
      }
      conv *= t / nf;
      // within the m=250 operator discretization error of the curve scale
      CHECK(std::abs(data.scan.values(i, j) - conv) < 0.015 * curve_max);
    }
  }
  CHECK(checked == 4);

  SUBCASE("seed determinism is bit exact") {
    const PhantomData again = synthesize_scan(spec, dense, 4, false, 2);
    CHECK((again.scan.values - data.scan.values).cwiseAbs().maxCoeff() == 0.0);
    const PhantomData other = synthesize_scan(spec, dense, 5, false, 2);
    CHECK((other.scan.values - data.scan.values).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("PSF blur preserves each frame's spatial sum") {
  const RunConfig cfg = small_cfg();
  const PhantomSpec clean = spec_with(cfg, 0.0, 0.0);
  const PhantomSpec blurred = spec_with(cfg, 0.0, 6.0);
  const DenseGrid dense = cfg.make_dense_grid(clean.frames.tau());
  const PhantomData a = synthesize_scan(clean, dense, 9, false, 2);
  const PhantomData b = synthesize_scan(blurred, dense, 9, false, 2);
  for (int j = 0; j < a.scan.frames(); ++j) {
    const double sum_clean = a.scan.values.col(j).sum();
    const double sum_blur = b.scan.values.col(j).sum();
    if (sum_clean > 0.0)
      CHECK(std::abs(sum_blur - sum_clean) / sum_clean < 1e-3);
  }
}

TEST_CASE("per-voxel noise realization matches the requested variance") {
  const RunConfig cfg = small_cfg();
  const PhantomSpec clean = spec_with(cfg, 0.0, 6.0, "voxel");
  PhantomSpec noisy = clean;
  noisy.c_noise = 0.25;
  const DenseGrid dense = cfg.make_dense_grid(clean.frames.tau());
  const PhantomData base = synthesize_scan(clean, dense, 31, false, 2);
  const PhantomData with = synthesize_scan(noisy, dense, 31, false, 2);
  const int p = static_cast<int>(base.scan.frames());
  Rng pick(1234);
  int tested = 0;
  while (tested < 100) {
    const int i = static_cast<int>(pick.below(static_cast<std::uint64_t>(base.scan.n_voxels())));
    const double mean_signal = base.scan.values.row(i).mean();
    const double target = 0.25 * mean_signal;
    if (target <= 0.0) continue;
    ++tested;
    double var = 0.0;
    for (int j = 0; j < p; ++j) {
      const double d = with.scan.values(i, j) - base.scan.values(i, j);
      var += d * d;
    }
    var /= p;
    const double se = target * std::sqrt(2.0 / (p - 1));
    CHECK(std::abs(var - target) < 3.0 * se + 1e-12);
  }
}

TEST_CASE("per-region V_T jitter has the intended spread") {
  const RunConfig cfg = small_cfg();
  const PhantomSpec spec = spec_with(cfg, 0.0, 0.0);
  const DenseGrid dense = cfg.make_dense_grid(spec.frames.tau());
  const PhantomData data = synthesize_scan(spec, dense, 77, false, 2);
  for (const int region : {2, 3, 5}) {
    double sum = 0.0, sum2 = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < spec.labels.size(); ++i) {
      if (spec.labels[i] != region) continue;
      sum += data.vt_true[i];
      sum2 += data.vt_true[i] * data.vt_true[i];
      ++count;
    }
    const double mean = sum / count;
    const double cv = std::sqrt(sum2 / count - mean * mean) / mean;
    CHECK(cv > 0.05);
    CHECK(cv < 0.08);
  }
}

TEST_CASE("gamma-region sampling rejects non-positive jittered parameters") {
  IrfSpec spec;
  spec.kind = IrfSpec::Kind::GammaMix;
  spec.gm.sd_a1 = 10.0;  // wild jitter guarantees a non-positive draw
  bool threw = false;
  for (int k = 0; k < 200 && !threw; ++k) {
    Rng rng(k);
    try {
      sample_irf(spec, rng);
    } catch (const ValidationError&) {
      threw = true;
    }
  }
  CHECK(threw);
}

TEST_CASE("1-D dataset") {
  Sim1dConfig opt;
  const InputFunction input = InputFunction::scaled_gamma(2000.0, 60.0, 1.0);
  const DenseGrid dense = DenseGrid::uniform(2000.0, 250);

  SUBCASE("basis normalizer c1 = 1/sqrt(1000)") {
    // int_0^2000 sin^2(2 pi t / 2000) dt = 1000; check the dense samples
    Sim1dConfig zc = opt;
    zc.noise_sd = 0.0;
    zc.b1_var = 0.0;
    zc.b2_var = 0.0;
    const Sim1dData base = generate_1d_dataset(zc, input, dense, 1);
    Sim1dConfig one = zc;
    one.b1_var = 1.0;  // B1 = standard normal draw
    const Sim1dData bumped = generate_1d_dataset(one, input, dense, 1);
    // difference of the true IRFs is B1 * psi1; its L2 norm is |B1|
    double norm2 = 0.0;
    for (std::size_t q = 0; q < dense.m(); ++q) {
      const double d = bumped.irf_true(0, static_cast<Eigen::Index>(q)) -
                       base.irf_true(0, static_cast<Eigen::Index>(q));
      norm2 += dense.weights[q] * d * d;
    }
    Rng rng(1, 0);
    const double b1 = rng.normal();
    CHECK(std::sqrt(norm2) == doctest::Approx(std::abs(b1)).epsilon(0.01));
  }

  SUBCASE("zero-noise zero-coefficient curves equal the convolved mean") {
    Sim1dConfig zc = opt;
    zc.noise_sd = 0.0;
    zc.b1_var = 0.0;
    zc.b2_var = 0.0;
    zc.n_curves = 8;
    const Sim1dData data = generate_1d_dataset(zc, input, dense, 3);
    for (int i = 1; i < 8; ++i)
      CHECK((data.scan.values.row(i) - data.scan.values.row(0)).cwiseAbs().maxCoeff() ==
            0.0);
    // FPCA mean recovers it to quadrature error
    const auto mu = estimate_mean(data.scan);
    for (std::size_t j = 0; j < data.scan.grid.frames(); ++j)
      CHECK(mu[j] == doctest::Approx(data.scan.values(0, static_cast<Eigen::Index>(j)))
                         .epsilon(1e-12));
  }

  SUBCASE("true V_T equals the integral of the mean IRF") {
    const Sim1dData data = generate_1d_dataset(opt, input, dense, 5);
    const double expect = 0.0049 * (1.0 - std::exp(-0.0005 * 2000.0)) / 0.0005 +
                          0.0018 * (1.0 - std::exp(-0.0112 * 2000.0)) / 0.0112;
    for (const double v : data.vt_true)
      CHECK(v == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("seed determinism") {
    const Sim1dData a = generate_1d_dataset(opt, input, dense, 12);
    const Sim1dData b = generate_1d_dataset(opt, input, dense, 12);
    CHECK((a.scan.values - b.scan.values).cwiseAbs().maxCoeff() == 0.0);
  }
}
