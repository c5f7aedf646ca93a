#include "trifusion/dataio.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "trifusion/png_io.hpp"
#include "trifusion/simulator.hpp"

namespace trifusion {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint32_t file_crc32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for checksum: " + path);
  uLong crc = crc32(0L, Z_NULL, 0);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize n = in.gcount();
    if (n > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::string> case_file_list(int frames) {
  std::vector<std::string> out{"meta.json", "acoustic.csv", "pressure.csv"};
  for (int i = 0; i < frames; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%04d.png", i);
    out.emplace_back(name);
  }
  return out;
}

std::string case_checksum(const std::string& case_dir, int frames) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const std::string& rel : case_file_list(frames)) {
    const std::uint32_t c = file_crc32((fs::path(case_dir) / rel).string());
    unsigned char bytes[4] = {static_cast<unsigned char>(c >> 24),
                              static_cast<unsigned char>(c >> 16),
                              static_cast<unsigned char>(c >> 8),
                              static_cast<unsigned char>(c)};
    crc = crc32(crc, bytes, 4);
  }
  char hex[16];
  std::snprintf(hex, sizeof hex, "%08x", static_cast<std::uint32_t>(crc));
  return hex;
}

namespace {

Eigen::MatrixXd read_csv_matrix(const std::string& path, int skip_lines = 0) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path);
  std::vector<std::vector<Scalar>> rows;
  std::string line;
  for (int i = 0; i < skip_lines && std::getline(in, line); ++i) {
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<Scalar> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError("ragged CSV: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("empty CSV: " + path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows.front().size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

}  // namespace

Dataset Dataset::load(const std::string& root, bool verify_checksums) {
  Dataset ds;
  ds.root_ = root;

  const fs::path manifest_path = fs::path(root) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing manifest: " + manifest_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest: " + std::string(e.what()));
  }

  DatasetManifest& m = ds.manifest_;
  m.format_version = j.value("format_version", 0);
  if (m.format_version != 1)
    throw DataError("unsupported manifest format_version " + std::to_string(m.format_version));
  m.seed = j.value("seed", 0ull);
  m.frames_per_case = j.value("frames_per_case", 0);
  m.image_size = j.value("image_size", 0);
  m.pressure_limit = j.value("pressure_limit", 100.0);
  for (const json& jc : j.at("cases")) {
    ManifestCase mc;
    mc.id = jc.at("id").get<std::string>();
    mc.triplet.p_x = jc.at("p_x").get<Scalar>();
    mc.triplet.p_y = jc.at("p_y").get<Scalar>();
    const std::string dstr = jc.at("d").get<std::string>();
    const auto d = dstr.empty() ? std::nullopt : direction_from_char(dstr[0]);
    if (!d) throw DataError("bad direction in manifest for case " + mc.id);
    mc.triplet.d = *d;
    mc.frames = jc.at("frames").get<int>();
    mc.pressure_available = jc.at("pressure_available").get<bool>();
    mc.checksum = jc.value("checksum", "");
    m.cases.push_back(std::move(mc));
  }
  std::sort(m.cases.begin(), m.cases.end(),
            [](const ManifestCase& a, const ManifestCase& b) { return a.id < b.id; });

  for (const ManifestCase& mc : m.cases) {
    const fs::path case_dir = fs::path(root) / mc.id;
    if (!fs::is_directory(case_dir)) throw DataError("missing case directory: " + mc.id);
    if (verify_checksums) {
      const std::string got = case_checksum(case_dir.string(), mc.frames);
      if (got != mc.checksum)
        throw DataError("checksum mismatch for case " + mc.id + ": manifest " + mc.checksum +
                        ", files " + got);
    }

    CaseData cd;
    cd.info = mc;

    const Eigen::MatrixXd ac = read_csv_matrix((case_dir / "acoustic.csv").string());
    cd.acoustic_series.reserve(static_cast<size_t>(ac.rows()));
    for (Eigen::Index r = 0; r < ac.rows(); ++r)
      cd.acoustic_series.push_back(ac.row(r).transpose());

    std::ifstream metain(case_dir / "meta.json");
    if (!metain) throw DataError("missing meta.json for case " + mc.id);
    json meta;
    try {
      metain >> meta;
    } catch (const json::exception& e) {
      throw DataError("malformed meta.json for case " + mc.id + ": " + e.what());
    }
    // first line is the sensor-index header
    cd.pressure.raw =
        read_csv_matrix((case_dir / "pressure.csv").string(), 1).transpose();
    cd.pressure.still_len = meta.at("still_len").get<int>();
    cd.pressure.sample_rate = meta.at("sample_rate").get<Scalar>();

    cd.images.reserve(static_cast<size_t>(mc.frames));
    for (int fidx = 0; fidx < mc.frames; ++fidx) {
      char name[32];
      std::snprintf(name, sizeof name, "images/%04d.png", fidx);
      const fs::path img_path = case_dir / name;
      if (!fs::exists(img_path)) throw DataError("missing frame: " + img_path.string());
      cd.images.push_back(read_png_rgb(img_path.string()));
    }
    ds.cases_.push_back(std::move(cd));
  }
  return ds;
}

SplitIndex split_frames(const Dataset& ds, int n_train, int n_test, std::uint64_t seed) {
  SplitIndex out;
  for (size_t ci = 0; ci < ds.cases().size(); ++ci) {
    const CaseData& cd = ds.cases()[ci];
    if (cd.info.frames < n_train + n_test)
      throw DataError("case " + cd.info.id + " has " + std::to_string(cd.info.frames) +
                      " frames, need " + std::to_string(n_train + n_test));
    std::vector<int> idx(static_cast<size_t>(cd.info.frames));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(fnv1a(cd.info.id, fnv1a(std::to_string(seed))));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int k = 0; k < n_train; ++k) out.train.emplace_back(static_cast<int>(ci), idx[static_cast<size_t>(k)]);
    for (int k = 0; k < n_test; ++k)
      out.test.emplace_back(static_cast<int>(ci), idx[static_cast<size_t>(n_train + k)]);
  }
  return out;
}

bool pressure_gate(const ManifestCase& info, Scalar limit) {
  return info.pressure_available && info.triplet.p_y <= limit;
}

}  // namespace trifusion
