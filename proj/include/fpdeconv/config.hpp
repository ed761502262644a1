#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fpdeconv/grids.hpp"
#include "fpdeconv/input_function.hpp"

namespace fpd {

struct DenseGridConfig {
  int m = 250;
  std::string spacing = "uniform";  // or "log_early"
  double log_factor = 3.0;
};

struct FpcaConfig {
  int k_max = 10;
  double r2_threshold = 0.025;
  bool multiplicative = true;
};

struct PresmoothConfig {
  int n_b = 0;       // 0 = ceil(p / 3)
  int min_obs = 4;
  double beta = 0.0;  // 0 = cross-validate over beta_grid
  std::vector<double> beta_grid = {0.5, 0.75, 1.0, 1.5, 2.0};
  double h_space_mm = -1.0;  // -1 = one voxel spacing, 0 = no spatial smoothing
  bool h_space_cv = false;   // select h_space over the grid below instead
  std::vector<double> h_space_grid_vox = {1.0, 2.0, 3.0};
  int cv_voxels = 2000;
  std::uint64_t cv_seed = 20107;
};

struct SpectralConfig {
  int grid_size = 100;
  double beta_min = 0.0;  // 0 = 0.1 / tau
  double beta_max = 0.0;  // 0 = 10 / min midpoint spacing
  std::string vt_horizon = "tau";  // or "infinity": V_T = sum alpha/beta
};

struct SplineConfig {
  int n_knots = 12;
  double penalty = -1.0;  // < 0 = per-curve GCV over a 10-point log grid
};

struct PhantomConfig {
  double pixel_mm = 2.0;
  double psf_fwhm_mm = 6.0;
  double c_noise = 0.1;
  std::string noise_mode = "global";  // or "voxel"
  double decay_lambda = 0.0;
  double vt_jitter_cv = 0.065;
  std::vector<std::pair<int, double>> frame_blocks = {
      {8, 15.0}, {8, 60.0}, {8, 180.0}, {8, 442.5}};
  double input_theta_s = 60.0;
  double input_peak = 1.0;
  std::string labels = "builtin";  // or a PGM path
};

struct Sim1dConfig {
  int n_curves = 200;
  int n_times = 200;
  double t_max = 2000.0;
  double noise_sd = 2.0;
  double b1_var = 0.01;
  double b2_var = 0.05;
  double input_peak = 0.0;  // 0 = shared phantom input peak
  int dense_m = 0;          // 0 = n_times (rows aligned with observations)
  std::string fpca_selection = "fve";  // component rule for this study
  double fve = 0.95;
};

struct BenchConfig {
  int runs = 20;
  std::vector<std::string> methods = {"fpca", "depict", "pdepict", "sp"};
  std::string score_truth = "blurred";  // or "analytic"
  bool mise = true;
  double calibrate_target = 0.1306;  // DEPICT background MSE aimed for
  int calibrate_runs = 3;
  std::vector<double> test_retest_deltas = {5.0, 10.0, 15.0, 20.0};
};

struct RunConfig {
  DenseGridConfig dense_grid;
  FpcaConfig fpca;
  PresmoothConfig presmooth;
  SpectralConfig spectral;
  SplineConfig spline;
  PhantomConfig phantom;
  Sim1dConfig sim1d;
  BenchConfig bench;
  int threads = 0;

  void validate() const;
  std::string to_json_string(int indent = 2) const;
  static RunConfig from_json_string(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;
  /// Merge a JSON fragment (same schema, unknown keys rejected).
  void apply_overrides(const std::string& json_fragment);
  std::string hash() const;

  DenseGrid make_dense_grid(double tau) const;
  TimeGrid phantom_frames() const;
  InputFunction phantom_input() const;
  InputFunction input_1d() const;
  DenseGrid dense_grid_1d() const;
};

}  // namespace fpd
