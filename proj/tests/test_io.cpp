#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "fpdeconv/config.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/io.hpp"
#include "fpdeconv/phantom.hpp"
#include "fpdeconv/rng.hpp"

using namespace fpd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fpdeconv_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int counter;
};
int TempDir::counter = 0;

}  // namespace

TEST_CASE("format_double round-trips") {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const double v = std::exp(rng.uniform(-40.0, 40.0)) *
                     (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("scan artifact round-trip") {
  TempDir tmp;
  Rng rng(9);
  DynamicScan scan;
  scan.grid = TimeGrid::from_blocks({{4, 15.0}, {4, 60.0}});
  scan.lattice = VoxelLattice::image2d(6, 5, 2.0, 2.5);
  scan.values.resize(30, 8);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 8; ++j)
      scan.values(i, j) = static_cast<double>(static_cast<float>(rng.normal()));
  scan.mask.assign(30, 1);
  scan.mask[7] = 0;
  scan.decay_lambda = 5.663e-4;
  const InputFunction input = InputFunction::scaled_gamma(300.0, 60.0, 1.0, 32);

  write_scan(tmp.path.string(), scan, input);
  const ScanArtifact art = read_scan(tmp.path.string());
  CHECK((art.scan.values - scan.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(art.scan.mask == scan.mask);
  CHECK(art.scan.grid.frame_mid == scan.grid.frame_mid);
  CHECK(art.scan.decay_lambda == scan.decay_lambda);
  CHECK(art.scan.lattice.ndim == 2);
  CHECK(art.scan.lattice.pos == scan.lattice.pos);
  CHECK(art.input.times() == input.times());
  CHECK(art.input.values() == input.values());
}

TEST_CASE("vt map round-trip") {
  TempDir tmp;
  Rng rng(10);
  std::vector<double> vt(100);
  for (auto& v : vt) v = static_cast<double>(static_cast<float>(rng.normal()));
  write_vt_map(tmp.path.string(), "vt", vt, {10, 10});
  const auto back = read_vt_map((tmp.path / "vt.json").string());
  CHECK(back == vt);
}

TEST_CASE("label PGM round-trip") {
  TempDir tmp;
  const std::vector<int> labels = shepp_vardi_labels();
  const std::string path = (tmp.path / "labels.pgm").string();
  write_pgm_labels(path, labels, 128, 128);
  CHECK(read_pgm_labels(path, 128, 128) == labels);
  CHECK_THROWS_AS(read_pgm_labels(path, 64, 64), ValidationError);
}

TEST_CASE("csv round-trip") {
  TempDir tmp;
  Csv csv;
  csv.header = {"a", "b", "c"};
  csv.rows = {{"1", "2.5", "x"}, {"-0.125", "nan", "y"}};
  const std::string path = (tmp.path / "t.csv").string();
  csv.save(path);
  const Csv back = Csv::load(path);
  CHECK(back.header == csv.header);
  CHECK(back.rows == csv.rows);
}

TEST_CASE("config round-trip and validation") {
  RunConfig cfg;
  cfg.fpca.k_max = 7;
  cfg.presmooth.beta_grid = {0.25, 1.0};
  cfg.phantom.frame_blocks = {{4, 30.0}, {4, 120.0}};
  const std::string text = cfg.to_json_string();
  const RunConfig back = RunConfig::from_json_string(text);
  CHECK(back.to_json_string() == text);

  SUBCASE("unknown keys rejected") {
    CHECK_THROWS_WITH_AS(RunConfig::from_json_string("{\"fpca\":{\"kmax\":3}}"),
                         doctest::Contains("unknown key"), ValidationError);
    CHECK_THROWS_AS(RunConfig::from_json_string("{\"bogus\":1}"), ValidationError);
  }

  SUBCASE("invalid values rejected") {
    CHECK_THROWS_AS(RunConfig::from_json_string("{\"dense_grid\":{\"m\":1}}"),
                    ValidationError);
    CHECK_THROWS_AS(
        RunConfig::from_json_string("{\"bench\":{\"methods\":[\"nope\"]}}"),
        ValidationError);
    CHECK_THROWS_AS(
        RunConfig::from_json_string("{\"phantom\":{\"noise_mode\":\"odd\"}}"),
        ValidationError);
  }

  SUBCASE("override merges and re-validates") {
    RunConfig c2;
    c2.apply_overrides("{\"fpca\":{\"k_max\":4},\"threads\":3}");
    CHECK(c2.fpca.k_max == 4);
    CHECK(c2.threads == 3);
    CHECK(c2.dense_grid.m == 250);  // untouched defaults survive
    CHECK_THROWS_AS(c2.apply_overrides("{\"fpca\":{\"k_max\":0}}"), ValidationError);
  }

  SUBCASE("config hash tracks content") {
    RunConfig a, b;
    CHECK(a.hash() == b.hash());
    b.fpca.k_max = 9;
    CHECK(a.hash() != b.hash());
  }
}

TEST_CASE("config file save/load") {
  TempDir tmp;
  RunConfig cfg;
  cfg.threads = 5;
  const std::string path = (tmp.path / "cfg.json").string();
  cfg.save(path);
  const RunConfig back = RunConfig::load(path);
  CHECK(back.threads == 5);
  CHECK_THROWS_AS(RunConfig::load((tmp.path / "missing.json").string()), IoError);
}

TEST_CASE("atomic writes leave no temp files") {
  TempDir tmp;
  const std::string path = (tmp.path / "out.txt").string();
  atomic_write_text(path, "hello");
  CHECK(read_text(path) == "hello");
  int files = 0;
  for (const auto& entry : fs::directory_iterator(tmp.path)) {
    (void)entry;
    ++files;
  }
  CHECK(files == 1);
}

TEST_CASE("manifest contents") {
  TempDir tmp;
  write_manifest(tmp.path.string(), "fit", "abc123", 42, {"vt.json"});
  const std::string text = read_text((tmp.path / "manifest.json").string());
  CHECK(text.find("\"command\": \"fit\"") != std::string::npos);
  CHECK(text.find("abc123") != std::string::npos);
  CHECK(text.find("\"seed\": 42") != std::string::npos);
  CHECK(text.find("\"version\"") != std::string::npos);
}
