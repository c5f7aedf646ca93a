#include "trifusion/pressure_pipeline.hpp"

#include <cmath>

namespace trifusion {

VecX still_water_baseline(const PressureRecord& record) {
  if (record.still_len < 1) throw PressureError("still segment length must be >= 1");
  if (record.raw.cols() < record.still_len)
    throw PressureError("series shorter than still segment");
  return record.raw.leftCols(record.still_len).rowwise().mean();
}

Eigen::MatrixXd relative_pressure(const PressureRecord& record, const VecX& baseline) {
  if (baseline.size() != record.raw.rows())
    throw PressureError("baseline size does not match sensor count");
  return record.raw.colwise() - baseline;
}

PressureWindow extract_window(const Eigen::MatrixXd& relative, Scalar sample_rate,
                              Scalar start_s, int T, Scalar stride_s) {
  if (T < 1) throw PressureError("window length must be >= 1");
  const auto step = static_cast<Eigen::Index>(std::lround(stride_s * sample_rate));
  if (step < 1) throw PressureError("stride shorter than one sample");
  const auto start = static_cast<Eigen::Index>(std::lround(start_s * sample_rate));
  const Eigen::Index last = start + static_cast<Eigen::Index>(T - 1) * step;
  if (start < 0 || last >= relative.cols())
    throw PressureError("window [" + std::to_string(start) + ", " + std::to_string(last) +
                        "] exceeds series length " + std::to_string(relative.cols()));
  PressureWindow w;
  w.stride_s = stride_s;
  w.values.resize(relative.rows(), T);
  for (int t = 0; t < T; ++t) w.values.col(t) = relative.col(start + t * step);
  return w;
}

}  // namespace trifusion
