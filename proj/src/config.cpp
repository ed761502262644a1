#include "fpdeconv/config.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fpdeconv/errors.hpp"

namespace fpd {

using nlohmann::json;

namespace {

json to_json(const RunConfig& c) {
  json j;
  j["dense_grid"] = {{"m", c.dense_grid.m},
                     {"spacing", c.dense_grid.spacing},
                     {"log_factor", c.dense_grid.log_factor}};
  j["fpca"] = {{"k_max", c.fpca.k_max},
               {"r2_threshold", c.fpca.r2_threshold},
               {"multiplicative", c.fpca.multiplicative}};
  j["presmooth"] = {{"n_b", c.presmooth.n_b},
                    {"min_obs", c.presmooth.min_obs},
                    {"beta", c.presmooth.beta},
                    {"beta_grid", c.presmooth.beta_grid},
                    {"h_space_mm", c.presmooth.h_space_mm},
                    {"h_space_cv", c.presmooth.h_space_cv},
                    {"h_space_grid_vox", c.presmooth.h_space_grid_vox},
                    {"cv_voxels", c.presmooth.cv_voxels},
                    {"cv_seed", c.presmooth.cv_seed}};
  j["spectral"] = {{"grid_size", c.spectral.grid_size},
                   {"beta_min", c.spectral.beta_min},
                   {"beta_max", c.spectral.beta_max},
                   {"vt_horizon", c.spectral.vt_horizon}};
  j["spline"] = {{"n_knots", c.spline.n_knots}, {"penalty", c.spline.penalty}};
  json blocks = json::array();
  for (const auto& [count, dur] : c.phantom.frame_blocks)
    blocks.push_back({{"frames", count}, {"duration_s", dur}});
  j["phantom"] = {{"pixel_mm", c.phantom.pixel_mm},
                  {"psf_fwhm_mm", c.phantom.psf_fwhm_mm},
                  {"c_noise", c.phantom.c_noise},
                  {"noise_mode", c.phantom.noise_mode},
                  {"decay_lambda", c.phantom.decay_lambda},
                  {"vt_jitter_cv", c.phantom.vt_jitter_cv},
                  {"frame_blocks", blocks},
                  {"input_theta_s", c.phantom.input_theta_s},
                  {"input_peak", c.phantom.input_peak},
                  {"labels", c.phantom.labels}};
  j["sim1d"] = {{"n_curves", c.sim1d.n_curves},
                {"n_times", c.sim1d.n_times},
                {"t_max", c.sim1d.t_max},
                {"noise_sd", c.sim1d.noise_sd},
                {"b1_var", c.sim1d.b1_var},
                {"b2_var", c.sim1d.b2_var},
                {"input_peak", c.sim1d.input_peak},
                {"dense_m", c.sim1d.dense_m},
                {"fpca_selection", c.sim1d.fpca_selection},
                {"fve", c.sim1d.fve}};
  j["bench"] = {{"runs", c.bench.runs},
                {"methods", c.bench.methods},
                {"score_truth", c.bench.score_truth},
                {"mise", c.bench.mise},
                {"calibrate_target", c.bench.calibrate_target},
                {"calibrate_runs", c.bench.calibrate_runs},
                {"test_retest_deltas", c.bench.test_retest_deltas}};
  j["threads"] = c.threads;
  return j;
}

void check_keys(const json& input, const json& schema, const std::string& path) {
  if (!input.is_object()) return;
  if (!schema.is_object())
    throw ValidationError("config: unexpected object at " + path);
  for (const auto& [key, value] : input.items()) {
    if (!schema.contains(key))
      throw ValidationError("config: unknown key '" + path + key + "'");
    if (value.is_object()) check_keys(value, schema.at(key), path + key + ".");
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void from_json_obj(const json& j, RunConfig& c) {
  check_keys(j, to_json(RunConfig{}), "");
  if (j.contains("dense_grid")) {
    const auto& s = j.at("dense_grid");
    get_if(s, "m", c.dense_grid.m);
    get_if(s, "spacing", c.dense_grid.spacing);
    get_if(s, "log_factor", c.dense_grid.log_factor);
  }
  if (j.contains("fpca")) {
    const auto& s = j.at("fpca");
    get_if(s, "k_max", c.fpca.k_max);
    get_if(s, "r2_threshold", c.fpca.r2_threshold);
    get_if(s, "multiplicative", c.fpca.multiplicative);
  }
  if (j.contains("presmooth")) {
    const auto& s = j.at("presmooth");
    get_if(s, "n_b", c.presmooth.n_b);
    get_if(s, "min_obs", c.presmooth.min_obs);
    get_if(s, "beta", c.presmooth.beta);
    get_if(s, "beta_grid", c.presmooth.beta_grid);
    get_if(s, "h_space_mm", c.presmooth.h_space_mm);
    get_if(s, "h_space_cv", c.presmooth.h_space_cv);
    get_if(s, "h_space_grid_vox", c.presmooth.h_space_grid_vox);
    get_if(s, "cv_voxels", c.presmooth.cv_voxels);
    get_if(s, "cv_seed", c.presmooth.cv_seed);
  }
  if (j.contains("spectral")) {
    const auto& s = j.at("spectral");
    get_if(s, "grid_size", c.spectral.grid_size);
    get_if(s, "beta_min", c.spectral.beta_min);
    get_if(s, "beta_max", c.spectral.beta_max);
    get_if(s, "vt_horizon", c.spectral.vt_horizon);
  }
  if (j.contains("spline")) {
    const auto& s = j.at("spline");
    get_if(s, "n_knots", c.spline.n_knots);
    get_if(s, "penalty", c.spline.penalty);
  }
  if (j.contains("phantom")) {
    const auto& s = j.at("phantom");
    get_if(s, "pixel_mm", c.phantom.pixel_mm);
    get_if(s, "psf_fwhm_mm", c.phantom.psf_fwhm_mm);
    get_if(s, "c_noise", c.phantom.c_noise);
    get_if(s, "noise_mode", c.phantom.noise_mode);
    get_if(s, "decay_lambda", c.phantom.decay_lambda);
    get_if(s, "vt_jitter_cv", c.phantom.vt_jitter_cv);
    if (s.contains("frame_blocks")) {
      c.phantom.frame_blocks.clear();
      for (const auto& b : s.at("frame_blocks")) {
        check_keys(b, json{{"frames", 0}, {"duration_s", 0.0}}, "phantom.frame_blocks.");
        c.phantom.frame_blocks.emplace_back(b.at("frames").get<int>(),
                                            b.at("duration_s").get<double>());
      }
    }
    get_if(s, "input_theta_s", c.phantom.input_theta_s);
    get_if(s, "input_peak", c.phantom.input_peak);
    get_if(s, "labels", c.phantom.labels);
  }
  if (j.contains("sim1d")) {
    const auto& s = j.at("sim1d");
    get_if(s, "n_curves", c.sim1d.n_curves);
    get_if(s, "n_times", c.sim1d.n_times);
    get_if(s, "t_max", c.sim1d.t_max);
    get_if(s, "noise_sd", c.sim1d.noise_sd);
    get_if(s, "b1_var", c.sim1d.b1_var);
    get_if(s, "b2_var", c.sim1d.b2_var);
    get_if(s, "input_peak", c.sim1d.input_peak);
    get_if(s, "dense_m", c.sim1d.dense_m);
    get_if(s, "fpca_selection", c.sim1d.fpca_selection);
    get_if(s, "fve", c.sim1d.fve);
  }
  if (j.contains("bench")) {
    const auto& s = j.at("bench");
    get_if(s, "runs", c.bench.runs);
    get_if(s, "methods", c.bench.methods);
    get_if(s, "score_truth", c.bench.score_truth);
    get_if(s, "mise", c.bench.mise);
    get_if(s, "calibrate_target", c.bench.calibrate_target);
    get_if(s, "calibrate_runs", c.bench.calibrate_runs);
    get_if(s, "test_retest_deltas", c.bench.test_retest_deltas);
  }
  get_if(j, "threads", c.threads);
  c.validate();
}

}  // namespace

void RunConfig::validate() const {
  if (dense_grid.m < 2) throw ValidationError("config: dense_grid.m must be >= 2");
  if (dense_grid.spacing != "uniform" && dense_grid.spacing != "log_early")
    throw ValidationError("config: dense_grid.spacing must be uniform or log_early");
  if (fpca.k_max < 1) throw ValidationError("config: fpca.k_max must be >= 1");
  if (!(fpca.r2_threshold > 0.0))
    throw ValidationError("config: fpca.r2_threshold must be > 0");
  if (presmooth.min_obs < 2)
    throw ValidationError("config: presmooth.min_obs must be >= 2");
  if (presmooth.beta_grid.empty())
    throw ValidationError("config: presmooth.beta_grid empty");
  for (double b : presmooth.beta_grid)
    if (!(b > 0.0)) throw ValidationError("config: presmooth.beta_grid entries must be > 0");
  if (spectral.grid_size < 1)
    throw ValidationError("config: spectral.grid_size must be >= 1");
  if (spectral.vt_horizon != "tau" && spectral.vt_horizon != "infinity")
    throw ValidationError("config: spectral.vt_horizon must be tau or infinity");
  if (spline.n_knots < 4)
    throw ValidationError("config: spline.n_knots must be >= 4");
  if (phantom.frame_blocks.empty())
    throw ValidationError("config: phantom.frame_blocks empty");
  if (!(phantom.pixel_mm > 0.0))
    throw ValidationError("config: phantom.pixel_mm must be > 0");
  if (!(phantom.c_noise >= 0.0))
    throw ValidationError("config: phantom.c_noise must be >= 0");
  if (phantom.noise_mode != "global" && phantom.noise_mode != "voxel")
    throw ValidationError("config: phantom.noise_mode must be global or voxel");
  if (!(phantom.decay_lambda >= 0.0))
    throw ValidationError("config: phantom.decay_lambda must be >= 0");
  if (sim1d.n_curves < 2 || sim1d.n_times < 8)
    throw ValidationError("config: sim1d dimensions too small");
  if (sim1d.fpca_selection != "r2" && sim1d.fpca_selection != "fve")
    throw ValidationError("config: sim1d.fpca_selection must be r2 or fve");
  if (bench.runs < 1) throw ValidationError("config: bench.runs must be >= 1");
  if (bench.score_truth != "blurred" && bench.score_truth != "analytic")
    throw ValidationError("config: bench.score_truth must be blurred or analytic");
  for (const auto& mth : bench.methods)
    if (mth != "fpca" && mth != "depict" && mth != "pdepict" && mth != "cc" &&
        mth != "sp")
      throw ValidationError("config: unknown method '" + mth + "'");
}

std::string RunConfig::to_json_string(int indent) const {
  return to_json(*this).dump(indent) + "\n";
}

RunConfig RunConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: JSON parse error: ") + e.what());
  }
  RunConfig c;
  from_json_obj(j, c);
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("config: cannot write " + path);
  out << to_json_string();
}

void RunConfig::apply_overrides(const std::string& json_fragment) {
  json patch;
  try {
    patch = json::parse(json_fragment);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config override: parse error: ") + e.what());
  }
  check_keys(patch, to_json(RunConfig{}), "");
  json merged = to_json(*this);
  merged.merge_patch(patch);
  from_json_obj(merged, *this);
}

std::string RunConfig::hash() const {
  const std::string dump = to_json(*this).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

DenseGrid RunConfig::make_dense_grid(double tau) const {
  if (dense_grid.spacing == "log_early")
    return DenseGrid::log_early(tau, static_cast<std::size_t>(dense_grid.m),
                                dense_grid.log_factor);
  return DenseGrid::uniform(tau, static_cast<std::size_t>(dense_grid.m));
}

TimeGrid RunConfig::phantom_frames() const {
  return TimeGrid::from_blocks(phantom.frame_blocks);
}

InputFunction RunConfig::phantom_input() const {
  return InputFunction::scaled_gamma(phantom_frames().tau(), phantom.input_theta_s,
                                     phantom.input_peak);
}

InputFunction RunConfig::input_1d() const {
  const double peak =
      sim1d.input_peak > 0.0 ? sim1d.input_peak : phantom.input_peak;
  return InputFunction::scaled_gamma(sim1d.t_max, phantom.input_theta_s, peak);
}

DenseGrid RunConfig::dense_grid_1d() const {
  const int m = sim1d.dense_m > 0 ? sim1d.dense_m : sim1d.n_times;
  if (dense_grid.spacing == "log_early")
    return DenseGrid::log_early(sim1d.t_max, static_cast<std::size_t>(m),
                                dense_grid.log_factor);
  return DenseGrid::uniform(sim1d.t_max, static_cast<std::size_t>(m));
}

}  // namespace fpd
