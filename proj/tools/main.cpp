// fpdeconv command-line tool. All functionality is reached through the C API
// of the shared library; this file only parses arguments.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <json.hpp>
#include <string>
#include <vector>

#include "fpdeconv/capi.h"

namespace {

struct ConfigGuard {
  fpd_config* cfg = nullptr;
  ~ConfigGuard() { fpd_config_destroy(cfg); }
};

int exit_code(fpd_status status) {
  switch (status) {
    case FPD_OK:
      return 0;
    case FPD_ERR_NUMERIC:
      return 2;
    default:
      return 1;  // validation and IO failures
  }
}

int finish(fpd_status status) {
  if (status != FPD_OK)
    std::fprintf(stderr, "fpdeconv: error: %s\n", fpd_last_error());
  return exit_code(status);
}

fpd_status load_config(const std::string& config_path,
                       const std::vector<std::string>& overrides,
                       int threads, ConfigGuard& guard) {
  fpd_status st = config_path.empty() ? fpd_config_create(&guard.cfg)
                                      : fpd_config_load(config_path.c_str(), &guard.cfg);
  if (st != FPD_OK) return st;
  for (const auto& text : overrides) {
    st = fpd_config_override(guard.cfg, text.c_str());
    if (st != FPD_OK) return st;
  }
  if (threads > 0) {
    const std::string patch =
        nlohmann::json{{"threads", threads}}.dump();
    st = fpd_config_override(guard.cfg, patch.c_str());
  }
  return st;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric deconvolution of dynamic tracer data via "
               "functional principal components, with spectral-analysis "
               "baselines and a phantom benchmark harness"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  app.add_option("-c,--config", config_path, "Config JSON file");
  app.add_option("--set", overrides,
                 "JSON fragment merged into the config, e.g. "
                 "'{\"fpca\":{\"k_max\":5}}' (repeatable)");
  app.add_option("-j,--threads", threads, "Worker thread count (0 = all cores)");

  // config init
  auto* cmd_config = app.add_subcommand("config", "Configuration utilities");
  auto* cmd_config_init = cmd_config->add_subcommand("init", "Write a config with all defaults");
  std::string config_out = "fpdeconv.json";
  cmd_config_init->add_option("-o,--out", config_out, "Output path");

  // simulate-1d
  auto* cmd_sim1d = app.add_subcommand("simulate-1d", "Generate the 1-D curve dataset");
  std::uint64_t seed = 0;
  std::string out_dir;
  cmd_sim1d->add_option("--seed", seed, "RNG seed")->required();
  cmd_sim1d->add_option("-o,--out", out_dir, "Output directory")->required();

  // simulate-phantom
  auto* cmd_simph = app.add_subcommand("simulate-phantom", "Generate a 2-D phantom scan");
  int simulation = 1;
  cmd_simph->add_option("--sim", simulation, "Simulation variant (1 or 2)")
      ->check(CLI::IsMember({1, 2}));
  cmd_simph->add_option("--seed", seed, "RNG seed")->required();
  cmd_simph->add_option("-o,--out", out_dir, "Output directory")->required();

  // fit
  auto* cmd_fit = app.add_subcommand(
      "fit", "Presmooth, estimate the FPCA model, deconvolve and map V_T");
  std::string scan_dir;
  cmd_fit->add_option("--scan", scan_dir, "Scan artifact directory")->required();
  cmd_fit->add_option("-o,--out", out_dir, "Output directory")->required();

  // baseline
  auto* cmd_base = app.add_subcommand("baseline", "Run a comparison estimator");
  std::string method;
  cmd_base->add_option("method", method, "depict | pdepict | cc | sp")
      ->required()
      ->check(CLI::IsMember({"depict", "pdepict", "cc", "sp"}));
  cmd_base->add_option("--scan", scan_dir, "Scan artifact directory")->required();
  cmd_base->add_option("-o,--out", out_dir, "Output directory")->required();

  // benchmark
  auto* cmd_bench = app.add_subcommand("benchmark", "Seeded multi-run experiment");
  std::string kind;
  int runs = 0;
  cmd_bench->add_option("kind", kind, "sim1 | sim2 | 1d")
      ->required()
      ->check(CLI::IsMember({"sim1", "sim2", "1d"}));
  cmd_bench->add_option("--runs", runs, "Replicates (default from config)");
  cmd_bench->add_option("--seed", seed, "RNG seed")->required();
  cmd_bench->add_option("-o,--out", out_dir, "Output directory")->required();

  // test-retest
  auto* cmd_tr = app.add_subcommand("test-retest",
                                    "Relative V_T difference over thresholds");
  std::string vt1, vt2, out_csv;
  cmd_tr->add_option("--vt1", vt1, "First V_T map header (.json)")->required();
  cmd_tr->add_option("--vt2", vt2, "Second V_T map header (.json)")->required();
  cmd_tr->add_option("-o,--out", out_csv, "Output CSV")->required();

  // calibrate-noise
  auto* cmd_cal = app.add_subcommand(
      "calibrate-noise", "Sweep c_noise against the background DEPICT target");
  cmd_cal->add_option("--seed", seed, "RNG seed")->required();
  cmd_cal->add_option("-o,--out", out_csv, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  ConfigGuard guard;
  const fpd_status cfg_status = load_config(config_path, overrides, threads, guard);
  if (cfg_status != FPD_OK) return finish(cfg_status);

  if (cmd_config_init->parsed())
    return finish(fpd_config_write(guard.cfg, config_out.c_str()));
  if (cmd_sim1d->parsed())
    return finish(fpd_simulate_1d(guard.cfg, seed, out_dir.c_str()));
  if (cmd_simph->parsed())
    return finish(fpd_simulate_phantom(guard.cfg, simulation, seed, out_dir.c_str()));
  if (cmd_fit->parsed())
    return finish(fpd_fit(guard.cfg, scan_dir.c_str(), out_dir.c_str()));
  if (cmd_base->parsed())
    return finish(fpd_baseline(guard.cfg, method.c_str(), scan_dir.c_str(),
                               out_dir.c_str()));
  if (cmd_bench->parsed()) {
    if (runs <= 0) {
      // fall back to the configured default by asking the library
      runs = -1;
    }
    return finish(fpd_benchmark(guard.cfg, kind.c_str(), runs, seed, out_dir.c_str()));
  }
  if (cmd_tr->parsed())
    return finish(fpd_test_retest(guard.cfg, vt1.c_str(), vt2.c_str(), out_csv.c_str()));
  if (cmd_cal->parsed())
    return finish(fpd_calibrate_noise(guard.cfg, seed, out_csv.c_str()));

  std::fprintf(stderr, "fpdeconv: no subcommand\n");
  return 1;
}
