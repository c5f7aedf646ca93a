#pragma once

#include <stdexcept>

#include <Eigen/Core>

#include "trifusion/core_types.hpp"

namespace trifusion {

/// Raw absolute pressure series for one case: rows = 9 sensors.
struct PressureRecord {
  Eigen::MatrixXd raw;      // [9 x L], Pa
  int still_len = 0;        // leading still-water samples
  Scalar sample_rate = 10;  // Hz
};

/// Fixed-length relative-pressure slice fed to the network.
struct PressureWindow {
  Eigen::MatrixXd values;  // [9 x T], Pa relative
  Scalar stride_s = 0.5;   // seconds between columns
};

struct PressureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-sensor mean of the first still_len samples.
VecX still_water_baseline(const PressureRecord& record);

/// Element-wise subtraction of the per-sensor baseline from the full series.
Eigen::MatrixXd relative_pressure(const PressureRecord& record, const VecX& baseline);

/// T samples per sensor, taken every stride seconds starting at start (s).
PressureWindow extract_window(const Eigen::MatrixXd& relative, Scalar sample_rate,
                              Scalar start_s, int T, Scalar stride_s);

}  // namespace trifusion
