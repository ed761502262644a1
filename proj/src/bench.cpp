#include "fpdeconv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "fpdeconv/errors.hpp"
#include "fpdeconv/io.hpp"
#include "fpdeconv/phantom.hpp"
#include "fpdeconv/pipeline.hpp"
#include "fpdeconv/rng.hpp"

namespace fpd {

std::map<int, RegionMse> region_mse(std::span<const double> vt_hat,
                                    std::span<const double> vt_true,
                                    const std::vector<int>& labels) {
  if (vt_hat.size() != vt_true.size() || vt_hat.size() != labels.size())
    throw ValidationError("region_mse: length mismatch");
  std::map<int, RegionMse> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int r = labels[i];
    if (r < 1) continue;
    auto& cell = out[r];
    const double d = vt_hat[i] - vt_true[i];
    cell.mse += d * d;
    ++cell.count;
  }
  for (auto& [r, cell] : out) cell.mse /= cell.count;
  return out;
}

double mise(const Eigen::MatrixXd& m_hat, const Eigen::MatrixXd& m_true,
            const DenseGrid& grid) {
  if (m_hat.rows() != m_true.rows() || m_hat.cols() != m_true.cols() ||
      static_cast<std::size_t>(m_hat.cols()) != grid.m())
    throw ValidationError("mise: shape mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m_hat.rows(); ++i)
    for (Eigen::Index q = 0; q < m_hat.cols(); ++q) {
      const double d = m_hat(i, q) - m_true(i, q);
      acc += grid.weights[static_cast<std::size_t>(q)] * d * d;
    }
  return acc / static_cast<double>(m_hat.rows());
}

TestRetestCell test_retest(std::span<const double> vt1,
                           std::span<const double> vt2, double delta) {
  if (vt1.size() != vt2.size()) throw ValidationError("test_retest: length mismatch");
  TestRetestCell cell;
  double sum = 0.0;
  std::vector<double> vals;
  for (std::size_t i = 0; i < vt1.size(); ++i) {
    if (!(vt2[i] > delta)) continue;
    const double v = std::abs(vt1[i] - vt2[i]) / vt2[i];
    vals.push_back(v);
    sum += v;
  }
  cell.count = static_cast<int>(vals.size());
  if (vals.empty()) return cell;  // NaN-marked
  cell.mean = sum / static_cast<double>(vals.size());
  if (vals.size() > 1) {
    double ss = 0.0;
    for (const double v : vals) ss += (v - cell.mean) * (v - cell.mean);
    cell.sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
  } else {
    cell.sd = 0.0;
  }
  return cell;
}

ExperimentReport::Cell ExperimentReport::region_cell(const std::string& method,
                                                     int region) const {
  Cell cell;
  const auto it = region_mse_runs.find(method);
  if (it == region_mse_runs.end()) return cell;
  const auto rit = std::find(regions.begin(), regions.end(), region);
  if (rit == regions.end()) return cell;
  const Eigen::Index col = rit - regions.begin();
  double sum = 0.0;
  std::vector<double> vals;
  for (Eigen::Index r = 0; r < it->second.rows(); ++r) {
    const double v = it->second(r, col);
    if (std::isnan(v)) continue;
    vals.push_back(v);
    sum += v;
  }
  if (vals.empty()) return cell;
  cell.runs = static_cast<int>(vals.size());
  cell.mean = sum / cell.runs;
  if (vals.size() > 1) {
    double ss = 0.0;
    for (const double v : vals) ss += (v - cell.mean) * (v - cell.mean);
    cell.se = std::sqrt(ss / (vals.size() - 1)) / std::sqrt(static_cast<double>(vals.size()));
  } else {
    cell.se = 0.0;
  }
  return cell;
}

ExperimentReport::Cell ExperimentReport::mise_cell(const std::string& method) const {
  Cell cell;
  const auto it = mise_runs.find(method);
  if (it == mise_runs.end()) return cell;
  double sum = 0.0;
  std::vector<double> vals;
  for (const double v : it->second)
    if (!std::isnan(v)) {
      vals.push_back(v);
      sum += v;
    }
  if (vals.empty()) return cell;
  cell.runs = static_cast<int>(vals.size());
  cell.mean = sum / cell.runs;
  if (vals.size() > 1) {
    double ss = 0.0;
    for (const double v : vals) ss += (v - cell.mean) * (v - cell.mean);
    cell.se = std::sqrt(ss / (vals.size() - 1)) / std::sqrt(static_cast<double>(vals.size()));
  } else {
    cell.se = 0.0;
  }
  return cell;
}

namespace {

PhantomSpec make_phantom_spec(const RunConfig& cfg, const std::string& kind) {
  const TimeGrid frames = cfg.phantom_frames();
  InputFunction input = cfg.phantom_input();
  PhantomSpec spec = kind == "sim2"
                         ? PhantomSpec::simulation2(frames, std::move(input),
                                                    cfg.phantom.c_noise)
                         : PhantomSpec::simulation1(frames, std::move(input),
                                                    cfg.phantom.c_noise);
  spec.pixel_mm = cfg.phantom.pixel_mm;
  spec.psf_fwhm_mm = cfg.phantom.psf_fwhm_mm;
  spec.noise_mode = cfg.phantom.noise_mode;
  spec.decay_lambda = cfg.phantom.decay_lambda;
  for (auto& [region, irf] : spec.region_irfs)
    irf.vt_jitter_cv = cfg.phantom.vt_jitter_cv;
  if (cfg.phantom.labels != "builtin") {
    spec.labels = read_pgm_labels(cfg.phantom.labels, spec.nx, spec.ny);
  }
  return spec;
}

bool needs_smoothing(const std::vector<std::string>& methods) {
  for (const auto& mth : methods)
    if (mth == "fpca" || mth == "pdepict" || mth == "cc" || mth == "sp") return true;
  return false;
}

void accumulate_pointwise(Eigen::MatrixXd& acc, const Eigen::MatrixXd& irf_hat,
                          const Eigen::MatrixXd& irf_true,
                          const std::vector<int>& labels,
                          const std::vector<int>& regions) {
  std::vector<Eigen::Index> region_count(regions.size(), 0);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(acc.rows(), acc.cols());
  for (Eigen::Index i = 0; i < irf_hat.rows(); ++i) {
    const int lab = labels.empty() ? 1 : labels[static_cast<std::size_t>(i)];
    const auto rit = std::find(regions.begin(), regions.end(), lab);
    if (rit == regions.end()) continue;
    const Eigen::Index row = rit - regions.begin();
    ++region_count[static_cast<std::size_t>(row)];
    for (Eigen::Index q = 0; q < irf_hat.cols(); ++q) {
      const double d = irf_hat(i, q) - irf_true(i, q);
      sq(row, q) += d * d;
    }
  }
  for (std::size_t r = 0; r < regions.size(); ++r)
    if (region_count[r] > 0)
      sq.row(static_cast<Eigen::Index>(r)) /= static_cast<double>(region_count[r]);
  acc += sq;
}

}  // namespace

ExperimentReport run_experiment(const RunConfig& cfg, const std::string& kind,
                                int runs, std::uint64_t seed) {
  if (kind != "sim1" && kind != "sim2" && kind != "1d")
    throw ValidationError("run_experiment: kind must be sim1, sim2 or 1d");
  if (runs < 1) throw ValidationError("run_experiment: runs must be >= 1");
  const auto t_start = std::chrono::steady_clock::now();

  ExperimentReport report;
  report.kind = kind;
  report.runs = runs;
  report.config_hash = cfg.hash();
  for (int r = 0; r < runs; ++r)
    report.seeds.push_back(stream_seed(seed, 0xbe9c000ULL + static_cast<std::uint64_t>(r)));

  if (kind == "1d") {
    report.methods = {"fpca", "cc", "sp"};
    const InputFunction input = cfg.input_1d();
    const DenseGrid dense = cfg.dense_grid_1d();
    report.dense_left = dense.left_points();
    const std::vector<int> regions = {1};
    for (const auto& mth : report.methods) {
      report.mise_runs[mth].assign(static_cast<std::size_t>(runs),
                                   std::numeric_limits<double>::quiet_NaN());
      report.pointwise_mse[mth] =
          Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(dense.m()));
    }
    std::map<std::string, int> ok_runs;
    for (int r = 0; r < runs; ++r) {
      const Sim1dData data =
          generate_1d_dataset(cfg.sim1d, input, dense, report.seeds[static_cast<std::size_t>(r)]);
      const SmoothedScan smoothed = presmooth_scan(data.scan, cfg);
      for (const auto& mth : report.methods) {
        try {
          Eigen::MatrixXd irf_hat;
          if (mth == "fpca") {
            // the 1-D replication follows the original study: one global
            // component count chosen by fraction of variance explained
            FpcaOptions fopt;
            fopt.k_max = cfg.fpca.k_max;
            fopt.r2_threshold = cfg.fpca.r2_threshold;
            fopt.multiplicative = cfg.fpca.multiplicative;
            fopt.threads = cfg.threads;
            if (cfg.sim1d.fpca_selection == "fve") {
              fopt.selection = FpcaOptions::Selection::FVE;
              fopt.fve = cfg.sim1d.fve;
            }
            const FitResult fit =
                fit_from_smoothed(data.scan, smoothed, input, cfg, &dense, &fopt);
            irf_hat = reconstruct_all_irfs(fit.model, fit.basis, cfg.threads);
          } else {
            irf_hat =
                run_baseline(mth, data.scan, &smoothed, input, cfg, true, &dense).irf;
          }
          report.mise_runs[mth][static_cast<std::size_t>(r)] =
              mise(irf_hat, data.irf_true, dense);
          accumulate_pointwise(report.pointwise_mse[mth], irf_hat, data.irf_true, {},
                               regions);
          ++ok_runs[mth];
        } catch (const std::exception& e) {
          report.failed_runs[mth].push_back(r);
          report.failure_messages[mth].push_back(e.what());
        }
      }
    }
    for (const auto& mth : report.methods)
      if (ok_runs[mth] > 0) report.pointwise_mse[mth] /= ok_runs[mth];
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
  }

  report.methods = cfg.bench.methods;
  report.regions = {1, 2, 3, 4, 5};
  const PhantomSpec spec = make_phantom_spec(cfg, kind);
  const DenseGrid dense = cfg.make_dense_grid(spec.frames.tau());
  report.dense_left = dense.left_points();
  const bool want_irf = cfg.bench.mise;
  for (const auto& mth : report.methods) {
    report.region_mse_runs[mth] =
        Eigen::MatrixXd::Constant(runs, static_cast<Eigen::Index>(report.regions.size()),
                                  std::numeric_limits<double>::quiet_NaN());
    report.mise_runs[mth].assign(static_cast<std::size_t>(runs),
                                 std::numeric_limits<double>::quiet_NaN());
    if (want_irf)
      report.pointwise_mse[mth] = Eigen::MatrixXd::Zero(
          static_cast<Eigen::Index>(report.regions.size()),
          static_cast<Eigen::Index>(dense.m()));
    report.region_mean_vt[mth].assign(report.regions.size(), 0.0);
  }

  std::map<std::string, int> ok_runs;
  for (int r = 0; r < runs; ++r) {
    const PhantomData data = synthesize_scan(spec, dense,
                                             report.seeds[static_cast<std::size_t>(r)],
                                             want_irf, cfg.threads);
    const std::vector<double>& vt_true = cfg.bench.score_truth == "analytic"
                                             ? data.vt_true
                                             : data.vt_true_blurred;
    const Eigen::MatrixXd& irf_true = cfg.bench.score_truth == "analytic"
                                          ? data.irf_true
                                          : data.irf_true_blurred;

    SmoothedScan smoothed;
    const bool smooth_needed = needs_smoothing(report.methods);
    if (smooth_needed) smoothed = presmooth_scan(data.scan, cfg);

    for (const auto& mth : report.methods) {
      try {
        std::vector<double> vt_hat;
        Eigen::MatrixXd irf_hat;
        if (mth == "fpca") {
          const FitResult fit =
              fit_from_smoothed(data.scan, smoothed, spec.input, cfg);
          vt_hat = fit.vt;
          if (want_irf) irf_hat = reconstruct_all_irfs(fit.model, fit.basis, cfg.threads);
        } else {
          BaselineResult res = run_baseline(mth, data.scan,
                                            smooth_needed ? &smoothed : nullptr,
                                            spec.input, cfg, want_irf);
          vt_hat = std::move(res.vt);
          irf_hat = std::move(res.irf);
        }
        const auto stats = region_mse(vt_hat, vt_true, spec.labels);
        for (std::size_t c = 0; c < report.regions.size(); ++c) {
          const auto it = stats.find(report.regions[c]);
          if (it != stats.end())
            report.region_mse_runs[mth](r, static_cast<Eigen::Index>(c)) = it->second.mse;
        }
        // region-mean estimates, for bias reporting
        std::vector<double> mean_vt(report.regions.size(), 0.0);
        std::vector<int> cnt(report.regions.size(), 0);
        for (std::size_t i = 0; i < vt_hat.size(); ++i) {
          const int lab = spec.labels[i];
          const auto rit = std::find(report.regions.begin(), report.regions.end(), lab);
          if (rit == report.regions.end()) continue;
          const std::size_t c = static_cast<std::size_t>(rit - report.regions.begin());
          mean_vt[c] += vt_hat[i];
          ++cnt[c];
        }
        for (std::size_t c = 0; c < report.regions.size(); ++c)
          if (cnt[c] > 0) report.region_mean_vt[mth][c] += mean_vt[c] / cnt[c];
        if (want_irf) {
          report.mise_runs[mth][static_cast<std::size_t>(r)] =
              mise(irf_hat, irf_true, dense);
          accumulate_pointwise(report.pointwise_mse[mth], irf_hat, irf_true,
                               spec.labels, report.regions);
        }
        ++ok_runs[mth];
      } catch (const std::exception& e) {
        report.failed_runs[mth].push_back(r);
        report.failure_messages[mth].push_back(e.what());
      }
    }
  }
  for (const auto& mth : report.methods)
    if (ok_runs[mth] > 0) {
      if (want_irf) report.pointwise_mse[mth] /= ok_runs[mth];
      for (auto& v : report.region_mean_vt[mth]) v /= ok_runs[mth];
    }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

CalibrationResult calibrate_noise(const RunConfig& cfg, std::uint64_t seed) {
  RunConfig work = cfg;
  work.bench.methods = {"depict"};
  work.bench.mise = false;
  const double c0 = cfg.phantom.c_noise > 0.0 ? cfg.phantom.c_noise : 0.05;
  CalibrationResult out;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int k = -4; k <= 4; ++k) {
    work.phantom.c_noise = c0 * std::pow(2.0, k);
    const ExperimentReport rep =
        run_experiment(work, "sim1", cfg.bench.calibrate_runs, seed);
    const auto cell = rep.region_cell("depict", 1);
    out.table.emplace_back(work.phantom.c_noise, cell.mean);
    if (cell.runs > 0 && cell.mean > 0.0) {
      const double gap = std::abs(std::log(cell.mean / cfg.bench.calibrate_target));
      if (gap < best_gap) {
        best_gap = gap;
        out.best_c_noise = work.phantom.c_noise;
      }
    }
  }
  return out;
}

}  // namespace fpd
