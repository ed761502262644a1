#include "fpdeconv/io.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fpdeconv/errors.hpp"
#include "fpdeconv/version.hpp"

namespace fpd {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void atomic_commit(const fs::path& tmp, const fs::path& path) {
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("atomic write: cannot rename to " + path.string() + ": " +
                  ec.message());
  }
}

fs::path temp_for(const fs::path& path) {
  return path.parent_path() /
         (path.filename().string() + ".tmp" + std::to_string(::getpid()));
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& content) {
  const fs::path target(path);
  const fs::path tmp = temp_for(target);
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  atomic_commit(tmp, target);
}

void atomic_write_bytes(const std::string& path, const void* data,
                        std::size_t size) {
  const fs::path target(path);
  const fs::path tmp = temp_for(target);
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  atomic_commit(tmp, target);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void Csv::save(const std::string& path) const {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw ValidationError("Csv: row width mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += row[c];
    }
    out += '\n';
  }
  atomic_write_text(path, out);
}

Csv Csv::load(const std::string& path) {
  const std::string text = read_text(path);
  Csv csv;
  std::stringstream ss(text);
  std::string line;
  bool first = true;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (first) {
      csv.header = std::move(cells);
      first = false;
    } else {
      csv.rows.push_back(std::move(cells));
    }
  }
  return csv;
}

namespace {

std::vector<double> json_doubles(const json& j) {
  return j.get<std::vector<double>>();
}

}  // namespace

void write_scan(const std::string& dir, const DynamicScan& scan,
                const InputFunction& input) {
  scan.validate();
  fs::create_directories(dir);
  const fs::path base(dir);

  const Eigen::Index n = scan.n_voxels();
  const Eigen::Index p = scan.frames();
  std::vector<float> buf(static_cast<std::size_t>(n) * static_cast<std::size_t>(p));
  // frame-major: one full volume per frame, voxels in row order
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      buf[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) +
          static_cast<std::size_t>(i)] = static_cast<float>(scan.values(i, j));
  atomic_write_bytes((base / "scan.f32").string(), buf.data(),
                     buf.size() * sizeof(float));
  atomic_write_bytes((base / "mask.u8").string(), scan.mask.data(), scan.mask.size());

  Csv incsv;
  incsv.header = {"time_s", "value"};
  for (std::size_t i = 0; i < input.times().size(); ++i)
    incsv.rows.push_back({format_double(input.times()[i]),
                          format_double(input.values()[i])});
  incsv.save((base / "input.csv").string());

  json j;
  j["format"] = "fpdeconv-scan-v1";
  j["ndim"] = scan.lattice.ndim;
  if (scan.lattice.ndim == 0) {
    j["dims"] = {n};
  } else {
    std::array<int, 3> hi{0, 0, 0};
    for (const auto& pos : scan.lattice.pos)
      for (int a = 0; a < 3; ++a)
        hi[static_cast<std::size_t>(a)] = std::max(hi[static_cast<std::size_t>(a)],
                                                   pos[static_cast<std::size_t>(a)] + 1);
    j["dims"] = std::vector<int>(hi.begin(), hi.begin() + scan.lattice.ndim);
  }
  j["spacing_mm"] = scan.lattice.spacing_mm;
  j["frame_start_s"] = scan.grid.frame_start;
  j["frame_mid_s"] = scan.grid.frame_mid;
  j["frame_end_s"] = scan.grid.frame_end;
  j["decay_lambda_per_s"] = scan.decay_lambda;
  j["values_file"] = "scan.f32";
  j["mask_file"] = "mask.u8";
  j["input_file"] = "input.csv";
  atomic_write_text((base / "scan.json").string(), j.dump(2) + "\n");
}

ScanArtifact read_scan(const std::string& dir) {
  const fs::path base = fs::is_directory(dir) ? fs::path(dir) : fs::path(dir).parent_path();
  json j;
  try {
    j = json::parse(read_text((base / "scan.json").string()));
  } catch (const json::parse_error& e) {
    throw IoError(std::string("scan.json: ") + e.what());
  }
  if (j.value("format", "") != "fpdeconv-scan-v1")
    throw ValidationError("read_scan: unknown format");

  ScanArtifact art;
  DynamicScan& scan = art.scan;
  scan.grid.frame_start = json_doubles(j.at("frame_start_s"));
  scan.grid.frame_mid = json_doubles(j.at("frame_mid_s"));
  scan.grid.frame_end = json_doubles(j.at("frame_end_s"));
  scan.decay_lambda = j.at("decay_lambda_per_s").get<double>();
  const int ndim = j.at("ndim").get<int>();
  const std::vector<int> dims = j.at("dims").get<std::vector<int>>();
  Eigen::Index n = 1;
  for (const int d : dims) n *= d;
  const Eigen::Index p = static_cast<Eigen::Index>(scan.grid.frames());

  scan.lattice.ndim = ndim;
  const auto spacing = j.at("spacing_mm").get<std::vector<double>>();
  for (std::size_t a = 0; a < 3 && a < spacing.size(); ++a)
    scan.lattice.spacing_mm[a] = spacing[a];
  if (ndim > 0) {
    scan.lattice.pos.reserve(static_cast<std::size_t>(n));
    const int nx = dims[0];
    const int ny = ndim > 1 ? dims[1] : 1;
    const int nz = ndim > 2 ? dims[2] : 1;
    for (int z = 0; z < nz; ++z)
      for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) scan.lattice.pos.push_back({x, y, z});
  }

  const std::string values = read_text((base / j.at("values_file").get<std::string>()).string());
  if (values.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(p) * sizeof(float))
    throw IoError("read_scan: values file has unexpected size");
  scan.values.resize(n, p);
  const float* f = reinterpret_cast<const float*>(values.data());
  for (Eigen::Index j2 = 0; j2 < p; ++j2)
    for (Eigen::Index i = 0; i < n; ++i)
      scan.values(i, j2) = f[static_cast<std::size_t>(j2) * static_cast<std::size_t>(n) +
                             static_cast<std::size_t>(i)];

  const std::string mask = read_text((base / j.at("mask_file").get<std::string>()).string());
  if (mask.size() != static_cast<std::size_t>(n))
    throw IoError("read_scan: mask file has unexpected size");
  scan.mask.assign(mask.begin(), mask.end());

  const Csv incsv = Csv::load((base / j.at("input_file").get<std::string>()).string());
  std::vector<double> ts, vs;
  for (const auto& row : incsv.rows) {
    ts.push_back(std::strtod(row.at(0).c_str(), nullptr));
    vs.push_back(std::strtod(row.at(1).c_str(), nullptr));
  }
  art.input = InputFunction(std::move(ts), std::move(vs));
  scan.validate();
  return art;
}

void write_vt_map(const std::string& dir, const std::string& name,
                  const std::vector<double>& values,
                  const std::vector<int>& dims) {
  fs::create_directories(dir);
  const fs::path base(dir);
  std::vector<float> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    buf[i] = static_cast<float>(values[i]);
  atomic_write_bytes((base / (name + ".f32")).string(), buf.data(),
                     buf.size() * sizeof(float));
  json j;
  j["format"] = "fpdeconv-vt-v1";
  j["count"] = values.size();
  j["dims"] = dims;
  j["file"] = name + ".f32";
  atomic_write_text((base / (name + ".json")).string(), j.dump(2) + "\n");
}

std::vector<double> read_vt_map(const std::string& header_path) {
  json j;
  try {
    j = json::parse(read_text(header_path));
  } catch (const json::parse_error& e) {
    throw IoError(std::string("vt header: ") + e.what());
  }
  if (j.value("format", "") != "fpdeconv-vt-v1")
    throw ValidationError("read_vt_map: unknown format");
  const std::size_t count = j.at("count").get<std::size_t>();
  const fs::path file = fs::path(header_path).parent_path() /
                        j.at("file").get<std::string>();
  const std::string bytes = read_text(file.string());
  if (bytes.size() != count * sizeof(float))
    throw IoError("read_vt_map: data file has unexpected size");
  const float* f = reinterpret_cast<const float*>(bytes.data());
  return std::vector<double>(f, f + count);
}

void write_pgm_labels(const std::string& path, const std::vector<int>& labels,
                      int nx, int ny) {
  if (static_cast<int>(labels.size()) != nx * ny)
    throw ValidationError("write_pgm_labels: size mismatch");
  std::string out = "P2\n# fpdeconv region labels (0 = outside analysis)\n" +
                    std::to_string(nx) + " " + std::to_string(ny) + "\n255\n";
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      if (x) out += ' ';
      out += std::to_string(labels[static_cast<std::size_t>(y) * nx + x]);
    }
    out += '\n';
  }
  atomic_write_text(path, out);
}

std::vector<int> read_pgm_labels(const std::string& path, int expect_nx,
                                 int expect_ny) {
  std::stringstream ss(read_text(path));
  std::string token;
  auto next = [&]() -> std::string {
    std::string t;
    while (ss >> t) {
      if (t[0] == '#') {
        std::string rest;
        std::getline(ss, rest);
        continue;
      }
      return t;
    }
    throw IoError("read_pgm_labels: truncated file " + path);
  };
  if (next() != "P2") throw ValidationError("read_pgm_labels: expected ASCII PGM (P2)");
  const int nx = std::stoi(next());
  const int ny = std::stoi(next());
  (void)next();  // max value
  if (nx != expect_nx || ny != expect_ny)
    throw ValidationError("read_pgm_labels: expected " + std::to_string(expect_nx) +
                          "x" + std::to_string(expect_ny) + " image");
  std::vector<int> labels(static_cast<std::size_t>(nx) * ny);
  for (auto& v : labels) v = std::stoi(next());
  return labels;
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::string& config_hash, std::uint64_t seed,
                    const std::vector<std::string>& outputs) {
  fs::create_directories(dir);
  json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["version"] = FPD_VERSION_STRING;
  j["outputs"] = outputs;
  atomic_write_text((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
}

void write_experiment_report(const std::string& dir, const ExperimentReport& report) {
  fs::create_directories(dir);
  const fs::path base(dir);

  if (!report.regions.empty()) {
    Csv csv;
    csv.header = {"method", "region", "mse", "se", "runs"};
    for (const auto& mth : report.methods)
      for (const int region : report.regions) {
        const auto cell = report.region_cell(mth, region);
        csv.rows.push_back({mth, std::to_string(region), format_double(cell.mean),
                            format_double(cell.se), std::to_string(cell.runs)});
      }
    csv.save((base / "report.csv").string());

    Csv mean_vt;
    mean_vt.header = {"method", "region", "mean_vt_estimate"};
    for (const auto& mth : report.methods) {
      const auto it = report.region_mean_vt.find(mth);
      if (it == report.region_mean_vt.end()) continue;
      for (std::size_t c = 0; c < report.regions.size(); ++c)
        mean_vt.rows.push_back({mth, std::to_string(report.regions[c]),
                                format_double(it->second[c])});
    }
    mean_vt.save((base / "region_mean_vt.csv").string());
  }

  {
    Csv csv;
    csv.header = {"run", "seed", "method", "mise"};
    for (int r = 0; r < report.runs; ++r)
      for (const auto& mth : report.methods) {
        const auto it = report.mise_runs.find(mth);
        if (it == report.mise_runs.end()) continue;
        csv.rows.push_back({std::to_string(r),
                            std::to_string(report.seeds[static_cast<std::size_t>(r)]),
                            mth,
                            format_double(it->second[static_cast<std::size_t>(r)])});
      }
    csv.save((base / "mise_runs.csv").string());
  }

  if (!report.pointwise_mse.empty()) {
    Csv csv;
    csv.header = {"region", "s"};
    for (const auto& mth : report.methods) csv.header.push_back(mth);
    const int n_regions = report.regions.empty() ? 1 : static_cast<int>(report.regions.size());
    for (int r = 0; r < n_regions; ++r)
      for (std::size_t q = 0; q < report.dense_left.size(); ++q) {
        std::vector<std::string> row{
            std::to_string(report.regions.empty() ? 1 : report.regions[static_cast<std::size_t>(r)]),
            format_double(report.dense_left[q])};
        for (const auto& mth : report.methods) {
          const auto it = report.pointwise_mse.find(mth);
          row.push_back(it == report.pointwise_mse.end()
                            ? "nan"
                            : format_double(it->second(r, static_cast<Eigen::Index>(q))));
        }
        csv.rows.push_back(row);
      }
    csv.save((base / "pointwise_mse.csv").string());
  }

  json meta;
  meta["kind"] = report.kind;
  meta["runs"] = report.runs;
  meta["seeds"] = report.seeds;
  meta["config_hash"] = report.config_hash;
  meta["wall_seconds"] = report.wall_seconds;
  meta["version"] = FPD_VERSION_STRING;
  json fails = json::object();
  for (const auto& [mth, runs] : report.failed_runs) fails[mth] = runs;
  meta["failed_runs"] = fails;
  json fail_msgs = json::object();
  for (const auto& [mth, msgs] : report.failure_messages) fail_msgs[mth] = msgs;
  meta["failure_messages"] = fail_msgs;
  json mise_summary = json::object();
  for (const auto& mth : report.methods) {
    const auto cell = report.mise_cell(mth);
    mise_summary[mth] = {{"mean", cell.mean}, {"se", cell.se}, {"runs", cell.runs}};
  }
  meta["mise"] = mise_summary;
  atomic_write_text((base / "metadata.json").string(), meta.dump(2) + "\n");
}

}  // namespace fpd
