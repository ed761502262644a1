#include "fpdeconv/phantom.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "fpdeconv/curves.hpp"
#include "fpdeconv/deconv.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/parallel.hpp"
#include "fpdeconv/rng.hpp"

namespace fpd {

namespace {

inline double gamma_cdf(double shape, double scale, double x) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(shape, x / scale);
}

}  // namespace

double gamma_mixture_irf(const GammaMixture& gm, double t_s) {
  if (!(gm.a1 > 0.0) || !(gm.b1 > 0.0) || !(gm.a2 > 0.0) || !(gm.b2 > 0.0) ||
      !(gm.c > 0.0))
    throw ValidationError("gamma_mixture_irf: non-positive shape/scale");
  const double v = t_s / 60.0;  // CDFs live in minutes
  const double mix = gm.w1 * gamma_cdf(gm.a1, gm.b1, v) +
                     gm.w2 * gamma_cdf(gm.a2, gm.b2, v);
  return (1.0 - mix) / gm.c;
}

double IrfSample::value(double t_s) const {
  switch (kind) {
    case IrfSpec::Kind::Zero:
      return 0.0;
    case IrfSpec::Kind::SumExp: {
      double v = 0.0;
      for (const auto& term : terms) v += term.alpha * std::exp(-term.beta * t_s);
      return v;
    }
    case IrfSpec::Kind::GammaMix:
      return gamma_mixture_irf(gm, t_s);
  }
  return 0.0;
}

double analytic_vt(const IrfSample& irf, double tau) {
  switch (irf.kind) {
    case IrfSpec::Kind::Zero:
      return 0.0;
    case IrfSpec::Kind::SumExp: {
      double v = 0.0;
      for (const auto& term : irf.terms)
        v += term.alpha * -std::expm1(-term.beta * tau) / term.beta;
      return v;
    }
    case IrfSpec::Kind::GammaMix: {
      // int_0^T (1 - F_mix(v)) dv = T(1 - F(T)) + shape*scale*F_{shape+1}(T)
      const double T = tau / 60.0;
      const auto part = [T](double a, double b) {
        return T * (1.0 - gamma_cdf(a, b, T)) + a * b * gamma_cdf(a + 1.0, b, T);
      };
      const auto& g = irf.gm;
      return 60.0 * (g.w1 * part(g.a1, g.b1) + g.w2 * part(g.a2, g.b2)) / g.c;
    }
  }
  return 0.0;
}

IrfSample sample_irf(const IrfSpec& spec, Rng& rng) {
  IrfSample out;
  out.kind = spec.kind;
  switch (spec.kind) {
    case IrfSpec::Kind::Zero:
      break;
    case IrfSpec::Kind::SumExp: {
      // one multiplicative factor jitters V_T while keeping the kinetics
      double f = 1.0 + spec.vt_jitter_cv * rng.normal();
      f = std::max(f, 0.01);
      out.terms = spec.terms;
      for (auto& term : out.terms) {
        term.alpha *= f;
        if (!(term.beta > 0.0) || !(term.alpha >= 0.0))
          throw ValidationError("sample_irf: non-positive exponential rate");
      }
      break;
    }
    case IrfSpec::Kind::GammaMix: {
      out.gm = spec.gm;
      out.gm.a1 = spec.gm.a1 + spec.gm.sd_a1 * rng.normal();
      out.gm.b1 = spec.gm.b1 + spec.gm.sd_b1 * rng.normal();
      out.gm.a2 = spec.gm.a2 + spec.gm.sd_a2 * rng.normal();
      out.gm.b2 = spec.gm.b2 + spec.gm.sd_b2 * rng.normal();
      if (!(out.gm.a1 > 0.0) || !(out.gm.b1 > 0.0) || !(out.gm.a2 > 0.0) ||
          !(out.gm.b2 > 0.0))
        throw ValidationError("sample_irf: jittered gamma parameter not positive");
      break;
    }
  }
  return out;
}

namespace {

struct Ellipse {
  double cx, cy, ax, ay;
  double q(double x, double y) const {
    const double dx = (x - cx) / ax;
    const double dy = (y - cy) / ay;
    return dx * dx + dy * dy;
  }
};

/// Assigns the n smallest-score unassigned pixels to a region; ties broken by
/// pixel index so the image is fully deterministic.
void fill_region(std::vector<int>& labels, int region, int count,
                 const std::vector<double>& score) {
  std::vector<int> order;
  order.reserve(labels.size());
  for (int i = 0; i < static_cast<int>(labels.size()); ++i)
    if (labels[static_cast<std::size_t>(i)] == 0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return score[static_cast<std::size_t>(a)] < score[static_cast<std::size_t>(b)];
  });
  if (static_cast<int>(order.size()) < count)
    throw NumericError("shepp_vardi_labels: not enough pixels");
  for (int k = 0; k < count; ++k)
    labels[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = region;
}

}  // namespace

std::vector<int> shepp_vardi_labels() {
  constexpr int N = 128;
  std::vector<int> labels(N * N, 0);

  const Ellipse brain{63.5, 63.5, 40.0, 48.6};
  const Ellipse vent_l{52.5, 57.5, 8.2, 13.8};
  const Ellipse vent_r{74.5, 57.5, 8.2, 13.8};
  const Ellipse lesion{63.5, 88.5, 2.2, 2.2};
  const Ellipse skull{63.5, 63.5, 49.0, 57.5};

  auto scores = [&](auto&& f) {
    std::vector<double> s(N * N);
    for (int y = 0; y < N; ++y)
      for (int x = 0; x < N; ++x)
        s[static_cast<std::size_t>(y * N + x)] = f(static_cast<double>(x), static_cast<double>(y));
    return s;
  };

  // small structures first so the deterministic fills cannot collide
  fill_region(labels, 4, 14, scores([&](double x, double y) { return lesion.q(x, y); }));
  fill_region(labels, 3, 701, scores([&](double x, double y) {
                return std::min(vent_l.q(x, y), vent_r.q(x, y));
              }));
  fill_region(labels, 2, 5351, scores([&](double x, double y) { return brain.q(x, y); }));
  fill_region(labels, 5, 704, scores([&](double x, double y) {
                return std::abs(skull.q(x, y) - 1.0);
              }));
  for (auto& v : labels)
    if (v == 0) v = 1;
  return labels;
}

std::vector<int> region_sizes(const std::vector<int>& labels, int n_regions) {
  std::vector<int> sizes(static_cast<std::size_t>(n_regions), 0);
  for (const int v : labels)
    if (v >= 1 && v <= n_regions) ++sizes[static_cast<std::size_t>(v - 1)];
  return sizes;
}

namespace {

PhantomSpec base_phantom(TimeGrid frames, InputFunction input, double c_noise) {
  PhantomSpec spec;
  spec.labels = shepp_vardi_labels();
  spec.nx = 128;
  spec.ny = 128;
  spec.frames = std::move(frames);
  spec.input = std::move(input);
  spec.c_noise = c_noise;

  IrfSpec r1;  // empty background
  r1.kind = IrfSpec::Kind::Zero;
  IrfSpec r2;
  r2.kind = IrfSpec::Kind::SumExp;
  r2.terms = {{0.0060, 0.0030}};
  IrfSpec r3;
  r3.kind = IrfSpec::Kind::SumExp;
  r3.terms = {{0.0040, 0.0008}, {0.0023, 0.0103}};
  IrfSpec r4;
  r4.kind = IrfSpec::Kind::SumExp;
  r4.terms = {{0.0068, 0.0007}, {0.0009, 0.0203}};
  IrfSpec r5;
  r5.kind = IrfSpec::Kind::SumExp;
  r5.terms = {{0.0007, 0.0377}};
  spec.region_irfs = {{1, r1}, {2, r2}, {3, r3}, {4, r4}, {5, r5}};
  return spec;
}

}  // namespace

PhantomSpec PhantomSpec::simulation1(TimeGrid frames, InputFunction input,
                                     double c_noise) {
  return base_phantom(std::move(frames), std::move(input), c_noise);
}

PhantomSpec PhantomSpec::simulation2(TimeGrid frames, InputFunction input,
                                     double c_noise) {
  PhantomSpec spec = base_phantom(std::move(frames), std::move(input), c_noise);
  IrfSpec r2;
  r2.kind = IrfSpec::Kind::GammaMix;
  r2.gm = GammaMixture{};  // the region-2 mixture defaults
  r2.gm.sd_a1 = 0.05;
  r2.gm.sd_a2 = 0.5;
  r2.gm.sd_b1 = 0.2;
  r2.gm.sd_b2 = 0.1;
  IrfSpec r4;
  r4.kind = IrfSpec::Kind::GammaMix;
  r4.gm.w1 = 0.8;
  r4.gm.w2 = 0.2;
  r4.gm.a1 = 2.0;
  r4.gm.b1 = 2.5;
  r4.gm.a2 = 15.0;
  r4.gm.b2 = 2.0;
  r4.gm.c = 70.0;
  r4.gm.sd_a1 = 0.15;
  r4.gm.sd_b1 = 0.2;
  r4.gm.sd_a2 = 0.1;
  r4.gm.sd_b2 = 0.15;
  spec.region_irfs[2] = r2;
  spec.region_irfs[4] = r4;
  return spec;
}

void blur_image_columns(Eigen::MatrixXd& stack, int nx, int ny, double sigma_px) {
  if (sigma_px <= 0.0) return;
  if (stack.rows() != static_cast<Eigen::Index>(nx) * ny)
    throw ValidationError("blur_image_columns: stack shape mismatch");
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_px));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * (k / sigma_px) * (k / sigma_px));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    sum += w;
  }
  for (auto& w : kernel) w /= sum;

  std::vector<double> line(static_cast<std::size_t>(std::max(nx, ny)));
  for (Eigen::Index col = 0; col < stack.cols(); ++col) {
    double* img = stack.col(col).data();
    // x pass
    for (int y = 0; y < ny; ++y) {
      double* row = img + static_cast<std::ptrdiff_t>(y) * nx;
      for (int x = 0; x < nx; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = x + k;
          if (xx < 0 || xx >= nx) continue;  // zero padding
          acc += kernel[static_cast<std::size_t>(k + radius)] * row[xx];
        }
        line[static_cast<std::size_t>(x)] = acc;
      }
      std::copy(line.begin(), line.begin() + nx, row);
    }
    // y pass
    for (int x = 0; x < nx; ++x) {
      for (int y = 0; y < ny; ++y) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int yy = y + k;
          if (yy < 0 || yy >= ny) continue;
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 img[static_cast<std::ptrdiff_t>(yy) * nx + x];
        }
        line[static_cast<std::size_t>(y)] = acc;
      }
      for (int y = 0; y < ny; ++y) img[static_cast<std::ptrdiff_t>(y) * nx + x] = line[static_cast<std::size_t>(y)];
    }
  }
}

PhantomData synthesize_scan(const PhantomSpec& spec, const DenseGrid& dense,
                            std::uint64_t seed, bool with_irf_truth,
                            int threads) {
  const int n = spec.nx * spec.ny;
  if (static_cast<int>(spec.labels.size()) != n)
    throw ValidationError("synthesize_scan: label image size mismatch");
  spec.frames.validate();
  const int p = static_cast<int>(spec.frames.frames());
  const std::size_t m = dense.m();
  const ConvolutionOperator op = build_convolution_matrix(spec.input, dense);
  const std::vector<double> left = dense.left_points();

  PhantomData out;
  out.scan.values.resize(n, p);
  out.scan.lattice = VoxelLattice::image2d(spec.nx, spec.ny, spec.pixel_mm, spec.pixel_mm);
  out.scan.mask.assign(static_cast<std::size_t>(n), 1);
  out.scan.grid = spec.frames;
  out.scan.decay_lambda = spec.decay_lambda;
  out.vt_true.assign(static_cast<std::size_t>(n), 0.0);
  if (with_irf_truth)
    out.irf_true = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m));

  // anchored frame sampling of the convolved curve, as in the design build
  std::vector<double> ts(m + 1);
  ts[0] = 0.0;
  for (std::size_t q = 0; q < m; ++q) ts[q + 1] = dense.s[q + 1];

  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    const int region = spec.labels[i];
    const auto it = spec.region_irfs.find(region);
    if (it == spec.region_irfs.end() || it->second.kind == IrfSpec::Kind::Zero) {
      out.scan.values.row(static_cast<Eigen::Index>(i)).setZero();
      return;
    }
    Rng rng(seed, i);
    const IrfSample irf = sample_irf(it->second, rng);
    out.vt_true[i] = analytic_vt(irf, spec.frames.tau());

    Eigen::VectorXd x(static_cast<Eigen::Index>(m));
    for (std::size_t q = 0; q < m; ++q) x(static_cast<Eigen::Index>(q)) = irf.value(left[q]);
    if (with_irf_truth) out.irf_true.row(static_cast<Eigen::Index>(i)) = x.transpose();
    const Eigen::VectorXd conv = op.matrix * x;
    std::vector<double> cs(m + 1);
    cs[0] = 0.0;
    for (std::size_t q = 0; q < m; ++q) cs[q + 1] = conv(static_cast<Eigen::Index>(q));
    const LinearInterpolant f(ts, cs);
    for (int j = 0; j < p; ++j)
      out.scan.values(static_cast<Eigen::Index>(i), j) =
          f(spec.frames.frame_mid[static_cast<std::size_t>(j)]);
  }, 128);

  const double sigma_px =
      spec.psf_fwhm_mm > 0.0
          ? spec.psf_fwhm_mm / (2.0 * std::sqrt(2.0 * std::log(2.0))) / spec.pixel_mm
          : 0.0;
  if (sigma_px > 0.0) {
    blur_image_columns(out.scan.values, spec.nx, spec.ny, sigma_px);
    Eigen::MatrixXd vt_map(n, 1);
    for (int i = 0; i < n; ++i) vt_map(i, 0) = out.vt_true[static_cast<std::size_t>(i)];
    blur_image_columns(vt_map, spec.nx, spec.ny, sigma_px);
    out.vt_true_blurred.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.vt_true_blurred[static_cast<std::size_t>(i)] = vt_map(i, 0);
    if (with_irf_truth) {
      out.irf_true_blurred = out.irf_true;
      blur_image_columns(out.irf_true_blurred, spec.nx, spec.ny, sigma_px);
    }
  } else {
    out.vt_true_blurred = out.vt_true;
    if (with_irf_truth) out.irf_true_blurred = out.irf_true;
  }

  // decay, then noise with variance proportional to the voxel's time-averaged
  // noiseless decayed signal
  if (spec.decay_lambda > 0.0)
    for (int j = 0; j < p; ++j)
      out.scan.values.col(j) *=
          std::exp(-spec.decay_lambda * spec.frames.frame_mid[static_cast<std::size_t>(j)]);
  if (spec.c_noise > 0.0) {
    if (spec.noise_mode != "global" && spec.noise_mode != "voxel")
      throw ValidationError("synthesize_scan: noise_mode must be global or voxel");
    const bool per_voxel = spec.noise_mode == "voxel";
    const double grand_mean = out.scan.values.mean();
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
      const double mean_signal =
          per_voxel ? out.scan.values.row(static_cast<Eigen::Index>(i)).mean()
                    : grand_mean;
      const double sd = std::sqrt(std::max(0.0, spec.c_noise * mean_signal));
      if (sd <= 0.0) return;
      Rng rng(seed ^ 0x6e6f697365ULL, i);
      for (int j = 0; j < p; ++j)
        out.scan.values(static_cast<Eigen::Index>(i), j) += sd * rng.normal();
    }, 512);
  }
  out.scan.validate();
  return out;
}

Sim1dData generate_1d_dataset(const Sim1dConfig& opt, const InputFunction& input,
                              const DenseGrid& dense, std::uint64_t seed) {
  if (opt.n_curves < 1 || opt.n_times < 2)
    throw ValidationError("generate_1d_dataset: bad dimensions");
  const double dt = opt.t_max / opt.n_times;
  const TimeGrid grid = TimeGrid::uniform_end(static_cast<std::size_t>(opt.n_times), dt);
  const std::size_t m = dense.m();
  const std::vector<double> left = dense.left_points();
  const ConvolutionOperator op = build_convolution_matrix(input, dense);

  // mean and the two normalized basis functions on the left grid
  const double period = opt.t_max;
  const double two_pi = 6.283185307179586476925286766559;
  const double c1 = 1.0 / std::sqrt(period / 2.0);
  const double c2 = c1;
  Eigen::VectorXd mu(static_cast<Eigen::Index>(m)), psi1(static_cast<Eigen::Index>(m)),
      psi2(static_cast<Eigen::Index>(m));
  for (std::size_t q = 0; q < m; ++q) {
    const double t = left[q];
    mu(static_cast<Eigen::Index>(q)) =
        0.0049 * std::exp(-0.0005 * t) + 0.0018 * std::exp(-0.0112 * t);
    psi1(static_cast<Eigen::Index>(q)) = c1 * std::sin(two_pi * t / period);
    psi2(static_cast<Eigen::Index>(q)) = c2 * std::cos(two_pi * t / period);
  }

  // frame samples of the three convolved basis curves
  const int p = opt.n_times;
  std::vector<double> ts(m + 1);
  ts[0] = 0.0;
  for (std::size_t q = 0; q < m; ++q) ts[q + 1] = dense.s[q + 1];
  const auto frame_curve = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd conv = op.matrix * x;
    std::vector<double> cs(m + 1);
    cs[0] = 0.0;
    for (std::size_t q = 0; q < m; ++q) cs[q + 1] = conv(static_cast<Eigen::Index>(q));
    const LinearInterpolant f(ts, cs);
    std::vector<double> out(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j)
      out[static_cast<std::size_t>(j)] = f(grid.frame_mid[static_cast<std::size_t>(j)]);
    return out;
  };
  const std::vector<double> conv_mu = frame_curve(mu);
  const std::vector<double> conv_psi1 = frame_curve(psi1);
  const std::vector<double> conv_psi2 = frame_curve(psi2);

  Sim1dData out;
  out.scan.values.resize(opt.n_curves, p);
  out.scan.mask.assign(static_cast<std::size_t>(opt.n_curves), 1);
  out.scan.grid = grid;
  out.scan.decay_lambda = 0.0;
  out.irf_true.resize(opt.n_curves, static_cast<Eigen::Index>(m));
  out.vt_true.assign(static_cast<std::size_t>(opt.n_curves), 0.0);

  const double sd1 = std::sqrt(opt.b1_var);
  const double sd2 = std::sqrt(opt.b2_var);
  const double vt_mu = 0.0049 * -std::expm1(-0.0005 * opt.t_max) / 0.0005 +
                       0.0018 * -std::expm1(-0.0112 * opt.t_max) / 0.0112;
  for (int i = 0; i < opt.n_curves; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    const double b1 = sd1 * rng.normal();
    const double b2 = sd2 * rng.normal();
    out.irf_true.row(i) = (mu + b1 * psi1 + b2 * psi2).transpose();
    // both basis functions integrate to zero over a full period
    out.vt_true[static_cast<std::size_t>(i)] = vt_mu;
    for (int j = 0; j < p; ++j)
      out.scan.values(i, j) = conv_mu[static_cast<std::size_t>(j)] +
                              b1 * conv_psi1[static_cast<std::size_t>(j)] +
                              b2 * conv_psi2[static_cast<std::size_t>(j)] +
                              opt.noise_sd * rng.normal();
  }
  out.scan.validate();
  return out;
}

}  // namespace fpd
