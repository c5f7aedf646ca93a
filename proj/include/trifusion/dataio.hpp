#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trifusion/core_types.hpp"
#include "trifusion/pressure_pipeline.hpp"

namespace trifusion {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ManifestCase {
  std::string id;
  CaseTriplet triplet;
  int frames = 0;
  bool pressure_available = false;
  std::string checksum;  // hex crc32 over the case's files
};

struct DatasetManifest {
  int format_version = 1;
  std::uint64_t seed = 0;
  int frames_per_case = 0;
  int image_size = 0;
  Scalar pressure_limit = 100.0;
  std::vector<ManifestCase> cases;  // sorted by id
};

/// One case fully materialized in memory.
struct CaseData {
  ManifestCase info;
  std::vector<Image> images;          // [3 x S x S] each
  std::vector<VecX> acoustic_series;  // per time sample, length P
  PressureRecord pressure;
};

class Dataset {
 public:
  /// Reads manifest + every case; throws DataError on missing files,
  /// malformed content, or (when verify_checksums) checksum mismatch.
  static Dataset load(const std::string& root, bool verify_checksums = true);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::vector<CaseData>& cases() const { return cases_; }
  const std::string& root() const { return root_; }

 private:
  DatasetManifest manifest_;
  std::vector<CaseData> cases_;
  std::string root_;
};

/// Frame references as (case index, frame index).
struct SplitIndex {
  std::vector<std::pair<int, int>> train;
  std::vector<std::pair<int, int>> test;
};

/// Per case: frame indices shuffled with a seed derived from the case id,
/// first n_train to train, next n_test to test. Disjoint by construction;
/// throws DataError when a case has fewer than n_train + n_test frames.
SplitIndex split_frames(const Dataset& ds, int n_train, int n_test, std::uint64_t seed);

/// Pressure usable iff the case recorded it and p_y is within the limit.
bool pressure_gate(const ManifestCase& info, Scalar limit);

/// crc32 (zlib polynomial) of a file's bytes.
std::uint32_t file_crc32(const std::string& path);

/// Relative paths participating in a case checksum, in checksum order.
std::vector<std::string> case_file_list(int frames);

/// Hex crc32 over the concatenated per-file crc32 values of the case.
std::string case_checksum(const std::string& case_dir, int frames);

}  // namespace trifusion
