#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpdeconv/bench.hpp"
#include "fpdeconv/input_function.hpp"
#include "fpdeconv/scan.hpp"

namespace fpd {

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// Writes via a temp file in the same directory, then renames into place.
void atomic_write_text(const std::string& path, const std::string& content);
void atomic_write_bytes(const std::string& path, const void* data, std::size_t size);

std::string read_text(const std::string& path);

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void save(const std::string& path) const;
  static Csv load(const std::string& path);
};

struct ScanArtifact {
  DynamicScan scan;
  InputFunction input;

  ScanArtifact() : input({0.0, 1.0}, {0.0, 1.0}) {}
};

/// Scan artifact: JSON header + frame-major little-endian f32 volumes +
/// u8 mask + input curve CSV, all in one directory.
void write_scan(const std::string& dir, const DynamicScan& scan,
                const InputFunction& input);
ScanArtifact read_scan(const std::string& dir);

/// V_T map artifact: <name>.json header + <name>.f32 values.
void write_vt_map(const std::string& dir, const std::string& name,
                  const std::vector<double>& values,
                  const std::vector<int>& dims);
std::vector<double> read_vt_map(const std::string& header_path);

/// Region label image as an ASCII portable grey-map (P2).
void write_pgm_labels(const std::string& path, const std::vector<int>& labels,
                      int nx, int ny);
std::vector<int> read_pgm_labels(const std::string& path, int expect_nx,
                                 int expect_ny);

void write_manifest(const std::string& dir, const std::string& command,
                    const std::string& config_hash, std::uint64_t seed,
                    const std::vector<std::string>& outputs);

/// report.csv, mise_runs.csv, pointwise_mse.csv and metadata.json.
void write_experiment_report(const std::string& dir, const ExperimentReport& report);

}  // namespace fpd
