#include "trifusion/objectives_metrics.hpp"

#include <cmath>
#include <limits>

namespace trifusion {

Scalar smooth_l1(Scalar e, Scalar beta) {
  if (e < beta) return e * e / (2.0 * beta);
  return e - beta / 2.0;
}

Scalar smooth_l1_grad(Scalar err, Scalar beta) {
  if (std::abs(err) < beta) return err / beta;
  return err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0);
}

Scalar total_loss(const std::vector<NormalizedState>& pred,
                  const std::vector<NormalizedState>& truth, const LossWeights& w) {
  if (pred.empty() || pred.size() != truth.size())
    throw MetricsError("total_loss requires nonempty batches of equal size");
  Scalar lx = 0.0, ly = 0.0, ld = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    lx += smooth_l1(std::abs(pred[i].p_xn - truth[i].p_xn), w.beta);
    ly += smooth_l1(std::abs(pred[i].p_yn - truth[i].p_yn), w.beta);
    ld += smooth_l1(std::abs(pred[i].d_n - truth[i].d_n), w.beta);
  }
  const auto n = static_cast<Scalar>(pred.size());
  return w.lambda_x * lx / n + w.lambda_y * ly / n + w.lambda_d * ld / n;
}

namespace {
constexpr Scalar kXMin = 0.0, kXMax = 200.0;
constexpr Scalar kYMin = 0.0, kYMax = 400.0;
}  // namespace

NormalizedState normalize_state(const LeaderState& s) {
  if (s.p_x < kXMin || s.p_x > kXMax || s.p_y < kYMin || s.p_y > kYMax)
    throw MetricsError("state outside normalization range");
  NormalizedState n;
  n.p_xn = (s.p_x - kXMin) / (kXMax - kXMin);
  n.p_yn = (s.p_y - kYMin) / (kYMax - kYMin);
  switch (s.d) {
    case Direction::L: n.d_n = 0.0; break;
    case Direction::S: n.d_n = 0.5; break;
    case Direction::R: n.d_n = 1.0; break;
  }
  return n;
}

LeaderState denormalize_state(const NormalizedState& n) {
  LeaderState s;
  s.p_x = kXMin + n.p_xn * (kXMax - kXMin);
  s.p_y = kYMin + n.p_yn * (kYMax - kYMin);
  s.d = classify_direction(n.d_n);
  return s;
}

Direction classify_direction(Scalar d_hat) {
  if (d_hat <= 0.25) return Direction::L;
  if (d_hat >= 0.75) return Direction::R;
  return Direction::S;
}

EvalReport eval_report(const std::vector<NormalizedState>& preds,
                       const std::vector<NormalizedState>& truths,
                       const OutlierRule& outliers) {
  if (preds.empty() || preds.size() != truths.size())
    throw MetricsError("eval_report requires nonempty aligned batches");
  EvalReport r;
  r.sample_count = static_cast<int>(preds.size());
  const auto n = static_cast<Scalar>(preds.size());

  std::array<Scalar, 3> sum{}, sumsq{};
  for (size_t i = 0; i < preds.size(); ++i) {
    const Scalar err[3] = {preds[i].p_xn - truths[i].p_xn, preds[i].p_yn - truths[i].p_yn,
                           preds[i].d_n - truths[i].d_n};
    for (int k = 0; k < 3; ++k) {
      sum[k] += err[k];
      sumsq[k] += err[k] * err[k];
    }
  }
  for (int k = 0; k < 3; ++k) {
    r.mean_error[k] = sum[k] / n;
    r.rmse[k] = std::sqrt(sumsq[k] / n);
    const Scalar var = sumsq[k] / n - r.mean_error[k] * r.mean_error[k];
    r.sd[k] = std::sqrt(std::max<Scalar>(var, 0.0));
  }

  // Direction statistics; the optional outlier rule only affects these.
  std::array<Scalar, 3> dsum{};
  std::array<Scalar, 3> dlo, dhi;
  dlo.fill(std::numeric_limits<Scalar>::infinity());
  dhi.fill(-std::numeric_limits<Scalar>::infinity());
  std::array<int, 3> dcount{};
  for (size_t i = 0; i < preds.size(); ++i) {
    const Scalar d_hat = preds[i].d_n;
    if (outliers.enabled) {
      const Scalar dist = std::min(
          {std::abs(d_hat - 0.0), std::abs(d_hat - 0.5), std::abs(d_hat - 1.0)});
      if (dist > outliers.max_code_distance) {
        ++r.outliers_dropped;
        continue;
      }
    }
    const int t = static_cast<int>(classify_direction(truths[i].d_n));
    const int p = static_cast<int>(classify_direction(d_hat));
    r.confusion[t][p]++;
    dsum[t] += d_hat;
    dlo[t] = std::min(dlo[t], d_hat);
    dhi[t] = std::max(dhi[t], d_hat);
    dcount[t]++;
  }
  for (int t = 0; t < 3; ++t) {
    r.direction[t].count = dcount[t];
    if (dcount[t] > 0) {
      r.direction[t].mean = dsum[t] / dcount[t];
      r.direction[t].lower_extremum = dlo[t];
      r.direction[t].upper_extremum = dhi[t];
    }
  }
  return r;
}

std::array<Scalar, 3> per_class_precision(const EvalReport& r) {
  std::array<Scalar, 3> p{};
  for (int c = 0; c < 3; ++c) {
    int col = 0;
    for (int t = 0; t < 3; ++t) col += r.confusion[t][c];
    p[c] = col > 0 ? static_cast<Scalar>(r.confusion[c][c]) / col : 0.0;
  }
  return p;
}

std::array<Scalar, 3> per_class_recall(const EvalReport& r) {
  std::array<Scalar, 3> rr{};
  for (int c = 0; c < 3; ++c) {
    int row = 0;
    for (int p = 0; p < 3; ++p) row += r.confusion[c][p];
    rr[c] = row > 0 ? static_cast<Scalar>(r.confusion[c][c]) / row : 0.0;
  }
  return rr;
}

}  // namespace trifusion
