#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "trifusion/core_types.hpp"

namespace trifusion {

struct LossWeights {
  Scalar lambda_x = 1.0;
  Scalar lambda_y = 1.0;
  Scalar lambda_d = 1.0;
  Scalar beta = 1.0;  // smooth-L1 threshold on normalized values
};

struct MetricsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Piecewise smooth-L1: e^2/(2*beta) below beta, e - beta/2 above.
Scalar smooth_l1(Scalar abs_error, Scalar beta);

/// d(smooth_l1)/d(error) for a signed error.
Scalar smooth_l1_grad(Scalar signed_error, Scalar beta);

/// Weighted sum of per-state mean smooth-L1 losses over a batch.
Scalar total_loss(const std::vector<NormalizedState>& pred,
                  const std::vector<NormalizedState>& truth, const LossWeights& w);

NormalizedState normalize_state(const LeaderState& s);
LeaderState denormalize_state(const NormalizedState& n);

/// Thresholds as printed: L for d <= 0.25, R for d >= 0.75, S otherwise.
Direction classify_direction(Scalar d_hat);

struct DirectionSummary {
  Scalar mean = 0.0;
  Scalar lower_extremum = 0.0;
  Scalar upper_extremum = 0.0;
  int count = 0;
};

struct EvalReport {
  // Per state (x, y, d): RMSE of errors and SD of signed errors, both on
  // normalized values, population convention.
  std::array<Scalar, 3> rmse{};
  std::array<Scalar, 3> sd{};
  std::array<Scalar, 3> mean_error{};  // signed
  // confusion[truth][pred], classes in order L, S, R.
  std::array<std::array<int, 3>, 3> confusion{};
  std::array<DirectionSummary, 3> direction{};  // per true class, raw d_hat
  int sample_count = 0;
  int outliers_dropped = 0;
};

struct OutlierRule {
  bool enabled = false;
  Scalar max_code_distance = 0.4;  // drop when |d_hat - nearest code| exceeds this
};

EvalReport eval_report(const std::vector<NormalizedState>& preds,
                       const std::vector<NormalizedState>& truths,
                       const OutlierRule& outliers = {});

std::array<Scalar, 3> per_class_precision(const EvalReport& r);
std::array<Scalar, 3> per_class_recall(const EvalReport& r);

}  // namespace trifusion
