#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fpdeconv/config.hpp"
#include "fpdeconv/grids.hpp"
#include "fpdeconv/input_function.hpp"
#include "fpdeconv/scan.hpp"

namespace fpd {

struct ExpTerm {
  double alpha = 0.0;
  double beta = 0.0;  // decay rate, 1/s
};

/// Two-component gamma-mixture survival IRF evaluated in minutes:
/// M(t) = (1/c) [1 - w1 F1(t/60) - w2 F2(t/60)], F gamma CDFs (shape, scale).
struct GammaMixture {
  double w1 = 0.7, w2 = 0.3;
  double a1 = 1.5, b1 = 2.0;   // shape, scale of f1
  double a2 = 10.0, b2 = 1.5;
  double c = 200.0;            // overall 1/c scale
  double sd_a1 = 0.0, sd_b1 = 0.0, sd_a2 = 0.0, sd_b2 = 0.0;  // parameter jitter
};

/// Per-region impulse-response generator.
struct IrfSpec {
  enum class Kind { Zero, SumExp, GammaMix };
  Kind kind = Kind::Zero;
  std::vector<ExpTerm> terms;      // SumExp
  double vt_jitter_cv = 0.065;     // multiplicative V_T jitter for SumExp
  GammaMixture gm;                 // GammaMix
};

/// Concrete (jittered) per-voxel IRF.
struct IrfSample {
  IrfSpec::Kind kind = IrfSpec::Kind::Zero;
  std::vector<ExpTerm> terms;
  GammaMixture gm;

  double value(double t_s) const;
};

double gamma_mixture_irf(const GammaMixture& gm, double t_s);

/// int_0^tau M(t) dt in closed form (exponential sums and gamma-CDF partial
/// expectations).
double analytic_vt(const IrfSample& irf, double tau);

class Rng;
IrfSample sample_irf(const IrfSpec& spec, Rng& rng);

/// Deterministic 128 x 128 head phantom with region ids 1..5 of sizes
/// 9614, 5351, 701, 14, 704 (row-major, x fastest).
std::vector<int> shepp_vardi_labels();
std::vector<int> region_sizes(const std::vector<int>& labels, int n_regions = 5);

struct PhantomSpec {
  std::vector<int> labels;  // region id per pixel, 0 = outside analysis
  int nx = 128, ny = 128;
  std::map<int, IrfSpec> region_irfs;
  double pixel_mm = 2.0;
  double psf_fwhm_mm = 6.0;
  double c_noise = 0.0;
  /// "global": variance = c_noise * grand mean of the noiseless decayed
  /// signal; "voxel": variance = c_noise * the voxel's own time average.
  std::string noise_mode = "global";
  double decay_lambda = 0.0;
  TimeGrid frames;
  InputFunction input{{0.0, 1.0}, {0.0, 1.0}};  // placeholder until configured

  /// Two-compartment regions everywhere (first image simulation).
  static PhantomSpec simulation1(TimeGrid frames, InputFunction input,
                                 double c_noise);
  /// Regions 2 and 4 replaced by gamma-mixture IRFs (second simulation).
  static PhantomSpec simulation2(TimeGrid frames, InputFunction input,
                                 double c_noise);
};

struct PhantomData {
  DynamicScan scan;
  std::vector<double> vt_true;          // per voxel, analytic at tau
  std::vector<double> vt_true_blurred;  // PSF applied to the map above
  Eigen::MatrixXd irf_true;             // n x m, left grid (optional)
  Eigen::MatrixXd irf_true_blurred;     // n x m (optional)
};

/// Seeded, reproducible synthesis: per-voxel IRF sampling (counter-based
/// streams), convolution with the input on the dense grid, Gaussian PSF blur
/// per frame, optional decay, and signal-proportional Gaussian noise.
PhantomData synthesize_scan(const PhantomSpec& spec, const DenseGrid& dense,
                            std::uint64_t seed, bool with_irf_truth = false,
                            int threads = 0);

/// Separable Gaussian blur of a stack of images stored as matrix columns
/// (each column one nx*ny image); kernel truncated at 4 sigma, renormalized.
void blur_image_columns(Eigen::MatrixXd& stack, int nx, int ny, double sigma_px);

struct Sim1dData {
  DynamicScan scan;
  Eigen::MatrixXd irf_true;     // n x m, left grid
  std::vector<double> vt_true;  // n
};

/// Curves M_i = mu_M + B_i1 psi_1 + B_i2 psi_2 observed as I (x) M_i plus
/// iid Gaussian noise at the frame midpoints.
Sim1dData generate_1d_dataset(const Sim1dConfig& opt, const InputFunction& input,
                              const DenseGrid& dense, std::uint64_t seed);

}  // namespace fpd
