#include "fpdeconv/capi.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <json.hpp>
#include <memory>
#include <string>

#include "fpdeconv/bench.hpp"
#include "fpdeconv/config.hpp"
#include "fpdeconv/curves.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/io.hpp"
#include "fpdeconv/phantom.hpp"
#include "fpdeconv/pipeline.hpp"
#include "fpdeconv/version.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

struct fpd_config {
  fpd::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

fpd_status fail(fpd_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename Fn>
fpd_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return FPD_OK;
  } catch (const fpd::ValidationError& e) {
    return fail(FPD_ERR_VALIDATION, e.what());
  } catch (const fpd::NumericError& e) {
    return fail(FPD_ERR_NUMERIC, e.what());
  } catch (const fpd::IoError& e) {
    return fail(FPD_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(FPD_ERR_NUMERIC, e.what());
  }
}

const fpd::RunConfig& unwrap(const fpd_config* cfg) {
  if (!cfg) throw fpd::ValidationError("null config handle");
  return cfg->cfg;
}

void write_sim_truth(const std::string& dir, const fpd::PhantomData& data) {
  fpd::write_vt_map(dir, "vt_true", data.vt_true, {128, 128});
  fpd::write_vt_map(dir, "vt_true_blurred", data.vt_true_blurred, {128, 128});
}

}  // namespace

extern "C" {

const char* fpd_version(void) { return FPD_VERSION_STRING; }

const char* fpd_last_error(void) { return g_last_error.c_str(); }

fpd_status fpd_config_create(fpd_config** out) {
  return guarded([&] {
    if (!out) throw fpd::ValidationError("null output pointer");
    *out = new fpd_config{};
  });
}

fpd_status fpd_config_load(const char* path, fpd_config** out) {
  return guarded([&] {
    if (!out || !path) throw fpd::ValidationError("null argument");
    auto cfg = std::make_unique<fpd_config>();
    cfg->cfg = fpd::RunConfig::load(path);
    *out = cfg.release();
  });
}

fpd_status fpd_config_override(fpd_config* cfg, const char* json_fragment) {
  return guarded([&] {
    if (!cfg || !json_fragment) throw fpd::ValidationError("null argument");
    cfg->cfg.apply_overrides(json_fragment);
  });
}

fpd_status fpd_config_write(const fpd_config* cfg, const char* path) {
  return guarded([&] {
    if (!path) throw fpd::ValidationError("null path");
    unwrap(cfg).save(path);
  });
}

void fpd_config_destroy(fpd_config* cfg) { delete cfg; }

fpd_status fpd_simulate_1d(const fpd_config* cfg, uint64_t seed,
                           const char* out_dir) {
  return guarded([&] {
    const fpd::RunConfig& c = unwrap(cfg);
    if (!out_dir) throw fpd::ValidationError("null output directory");
    const fpd::InputFunction input = c.input_1d();
    const fpd::DenseGrid dense = c.dense_grid_1d();
    const fpd::Sim1dData data = fpd::generate_1d_dataset(c.sim1d, input, dense, seed);
    fpd::write_scan(out_dir, data.scan, input);
    fpd::write_vt_map(out_dir, "vt_true", data.vt_true, {c.sim1d.n_curves});
    fpd::write_manifest(out_dir, "simulate-1d", c.hash(), seed,
                        {"scan.json", "scan.f32", "mask.u8", "input.csv",
                         "vt_true.json", "vt_true.f32"});
  });
}

fpd_status fpd_simulate_phantom(const fpd_config* cfg, int simulation,
                                uint64_t seed, const char* out_dir) {
  return guarded([&] {
    const fpd::RunConfig& c = unwrap(cfg);
    if (!out_dir) throw fpd::ValidationError("null output directory");
    if (simulation != 1 && simulation != 2)
      throw fpd::ValidationError("simulation must be 1 or 2");
    const fpd::TimeGrid frames = c.phantom_frames();
    fpd::PhantomSpec spec =
        simulation == 1
            ? fpd::PhantomSpec::simulation1(frames, c.phantom_input(), c.phantom.c_noise)
            : fpd::PhantomSpec::simulation2(frames, c.phantom_input(), c.phantom.c_noise);
    spec.pixel_mm = c.phantom.pixel_mm;
    spec.psf_fwhm_mm = c.phantom.psf_fwhm_mm;
    spec.noise_mode = c.phantom.noise_mode;
    spec.decay_lambda = c.phantom.decay_lambda;
    for (auto& [region, irf] : spec.region_irfs)
      irf.vt_jitter_cv = c.phantom.vt_jitter_cv;
    if (c.phantom.labels != "builtin")
      spec.labels = fpd::read_pgm_labels(c.phantom.labels, spec.nx, spec.ny);
    const fpd::DenseGrid dense = c.make_dense_grid(frames.tau());
    const fpd::PhantomData data = fpd::synthesize_scan(spec, dense, seed, false,
                                                       c.threads);
    fpd::write_scan(out_dir, data.scan, spec.input);
    write_sim_truth(out_dir, data);
    fpd::write_pgm_labels((fs::path(out_dir) / "labels.pgm").string(), spec.labels,
                          spec.nx, spec.ny);
    fpd::write_manifest(out_dir, "simulate-phantom", c.hash(), seed,
                        {"scan.json", "scan.f32", "mask.u8", "input.csv",
                         "vt_true.json", "vt_true_blurred.json", "labels.pgm"});
  });
}

fpd_status fpd_fit(const fpd_config* cfg, const char* scan_dir,
                   const char* out_dir) {
  return guarded([&] {
    const fpd::RunConfig& c = unwrap(cfg);
    if (!scan_dir || !out_dir) throw fpd::ValidationError("null path");
    const fpd::ScanArtifact art = fpd::read_scan(scan_dir);
    const fpd::FitResult fit = fpd::fit_pipeline(art.scan, art.input, c);

    std::vector<int> dims;
    if (art.scan.lattice.ndim == 0) {
      dims = {static_cast<int>(art.scan.n_voxels())};
    } else {
      std::array<int, 3> hi{0, 0, 0};
      for (const auto& pos : art.scan.lattice.pos)
        for (int a = 0; a < 3; ++a)
          hi[static_cast<std::size_t>(a)] =
              std::max(hi[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(a)] + 1);
      dims.assign(hi.begin(), hi.begin() + art.scan.lattice.ndim);
    }
    fpd::write_vt_map(out_dir, "vt", fit.vt, dims);

    // dense basis table: mean and eigenfunctions with their deconvolutions
    const fpd::DenseGrid dense = c.make_dense_grid(art.scan.grid.tau());
    const std::vector<double> left = dense.left_points();
    fpd::Csv basis;
    basis.header = {"s", "mu", "mu_d"};
    const int K = fit.model.K();
    for (int k = 1; k <= K; ++k) {
      basis.header.push_back("phi_" + std::to_string(k));
      basis.header.push_back("phi_d_" + std::to_string(k));
    }
    for (std::size_t q = 0; q < left.size(); ++q) {
      std::vector<std::string> row{fpd::format_double(left[q]),
                                   fpd::format_double(fit.model.mu_dense[q]),
                                   fpd::format_double(fit.basis.mu_d[q])};
      for (int k = 0; k < K; ++k) {
        row.push_back(fpd::format_double(fit.model.eigfuncs(k, static_cast<Eigen::Index>(q))));
        row.push_back(fpd::format_double(fit.basis.phi_d(k, static_cast<Eigen::Index>(q))));
      }
      basis.rows.push_back(std::move(row));
    }
    basis.save((fs::path(out_dir) / "basis.csv").string());

    json model;
    model["k"] = K;
    model["eigenvalues"] = fit.model.eigvals;
    model["basis_integrals"] = fit.basis.integrals;
    model["deconv_residuals"] = fit.basis.residuals;
    model["beta"] = fit.profile.beta;
    model["h_space_mm"] = fit.profile.h_space_mm;
    model["enlarged_windows"] = fit.smoothed.diag.enlarged_windows;
    std::vector<int> l_hist(static_cast<std::size_t>(K) + 1, 0);
    for (const int l : fit.model.L) ++l_hist[static_cast<std::size_t>(l)];
    model["selected_components_histogram"] = l_hist;
    model["eigenvalue_total"] = fit.model.eig_total;
    model["config_hash"] = c.hash();
    fpd::atomic_write_text((fs::path(out_dir) / "model.json").string(),
                           model.dump(2) + "\n");
    fpd::write_manifest(out_dir, "fit", c.hash(), 0,
                        {"vt.json", "vt.f32", "basis.csv", "model.json"});
  });
}

fpd_status fpd_baseline(const fpd_config* cfg, const char* method,
                        const char* scan_dir, const char* out_dir) {
  return guarded([&] {
    const fpd::RunConfig& c = unwrap(cfg);
    if (!method || !scan_dir || !out_dir) throw fpd::ValidationError("null argument");
    const std::string mth(method);
    const fpd::ScanArtifact art = fpd::read_scan(scan_dir);
    fpd::SmoothedScan smoothed;
    const bool needs_smooth = mth == "pdepict" || mth == "cc" || mth == "sp";
    if (needs_smooth) smoothed = fpd::presmooth_scan(art.scan, c);
    const fpd::BaselineResult res = fpd::run_baseline(
        mth, art.scan, needs_smooth ? &smoothed : nullptr, art.input, c, false);
    std::vector<int> dims = {static_cast<int>(art.scan.n_voxels())};
    fpd::write_vt_map(out_dir, "vt_" + mth, res.vt, dims);
    fpd::write_manifest(out_dir, "baseline-" + mth, c.hash(), 0,
                        {"vt_" + mth + ".json", "vt_" + mth + ".f32"});
  });
}

fpd_status fpd_benchmark(const fpd_config* cfg, const char* kind, int runs,
                         uint64_t seed, const char* out_dir) {
  return guarded([&] {
    const fpd::RunConfig& c = unwrap(cfg);
    if (!kind || !out_dir) throw fpd::ValidationError("null argument");
    if (runs <= 0) runs = c.bench.runs;
    const fpd::ExperimentReport report = fpd::run_experiment(c, kind, runs, seed);
    fpd::write_experiment_report(out_dir, report);
    fpd::write_manifest(out_dir, std::string("benchmark-") + kind, c.hash(), seed,
                        {"report.csv", "mise_runs.csv", "pointwise_mse.csv",
                         "metadata.json"});
  });
}

fpd_status fpd_test_retest(const fpd_config* cfg, const char* vt1_header,
                           const char* vt2_header, const char* out_csv) {
  return guarded([&] {
    const fpd::RunConfig& c = unwrap(cfg);
    if (!vt1_header || !vt2_header || !out_csv)
      throw fpd::ValidationError("null argument");
    const std::vector<double> vt1 = fpd::read_vt_map(vt1_header);
    const std::vector<double> vt2 = fpd::read_vt_map(vt2_header);
    fpd::Csv csv;
    csv.header = {"delta", "mean", "sd", "count"};
    for (const double delta : c.bench.test_retest_deltas) {
      const fpd::TestRetestCell cell = fpd::test_retest(vt1, vt2, delta);
      csv.rows.push_back({fpd::format_double(delta), fpd::format_double(cell.mean),
                          fpd::format_double(cell.sd), std::to_string(cell.count)});
    }
    csv.save(out_csv);
  });
}

fpd_status fpd_calibrate_noise(const fpd_config* cfg, uint64_t seed,
                               const char* out_csv) {
  return guarded([&] {
    const fpd::RunConfig& c = unwrap(cfg);
    if (!out_csv) throw fpd::ValidationError("null path");
    const fpd::CalibrationResult res = fpd::calibrate_noise(c, seed);
    fpd::Csv csv;
    csv.header = {"c_noise", "depict_region1_mse", "selected"};
    for (const auto& [cn, mse] : res.table)
      csv.rows.push_back({fpd::format_double(cn), fpd::format_double(mse),
                          cn == res.best_c_noise ? "1" : "0"});
    csv.save(out_csv);
  });
}

}  // extern "C"
