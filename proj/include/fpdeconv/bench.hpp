#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fpdeconv/config.hpp"
#include "fpdeconv/grids.hpp"

namespace fpd {

struct RegionMse {
  double mse = 0.0;
  int count = 0;
};

/// Mean squared V_T error per region id (>= 1). Empty regions are omitted.
std::map<int, RegionMse> region_mse(std::span<const double> vt_hat,
                                    std::span<const double> vt_true,
                                    const std::vector<int>& labels);

/// (1/n) sum_i int (Mhat_i - M_i)^2 under grid quadrature.
double mise(const Eigen::MatrixXd& m_hat, const Eigen::MatrixXd& m_true,
            const DenseGrid& grid);

struct TestRetestCell {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

/// mean and sd of |vt1 - vt2| / vt2 over voxels with vt2 > delta;
/// NaN-marked when the selection is empty.
TestRetestCell test_retest(std::span<const double> vt1,
                           std::span<const double> vt2, double delta);

/// Seeded multi-run experiment results; per-run values are kept so orderings
/// and aggregates can both be derived. Failed (method, run) cells carry NaN.
struct ExperimentReport {
  std::string kind;  // sim1 | sim2 | 1d
  std::vector<std::string> methods;
  std::vector<int> regions;  // empty for 1d
  std::map<std::string, Eigen::MatrixXd> region_mse_runs;  // runs x regions
  std::map<std::string, std::vector<double>> mise_runs;    // per run
  std::map<std::string, Eigen::MatrixXd> pointwise_mse;    // regions x m (1 x m for 1d)
  std::map<std::string, std::vector<double>> region_mean_vt;  // mean estimate, region-major
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  int runs = 0;
  double wall_seconds = 0.0;
  std::vector<double> dense_left;
  std::map<std::string, std::vector<int>> failed_runs;
  std::map<std::string, std::vector<std::string>> failure_messages;

  struct Cell {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    int runs = 0;
  };
  Cell region_cell(const std::string& method, int region) const;
  Cell mise_cell(const std::string& method) const;
};

ExperimentReport run_experiment(const RunConfig& cfg, const std::string& kind,
                                int runs, std::uint64_t seed);

struct CalibrationResult {
  std::vector<std::pair<double, double>> table;  // (c_noise, depict region-1 mse)
  double best_c_noise = 0.0;
};

/// Sweeps c_noise and scores the DEPICT background MSE against the target.
CalibrationResult calibrate_noise(const RunConfig& cfg, std::uint64_t seed);

}  // namespace fpd
