#include <doctest.h>

#include <cmath>
#include <random>

#include "trifusion/objectives_metrics.hpp"

using namespace trifusion;

TEST_CASE("smooth L1 branch values") {
  CHECK(smooth_l1(0.5, 1.0) == 0.125);
  CHECK(smooth_l1(2.0, 1.0) == 1.5);
  CHECK(smooth_l1(0.0, 1.0) == 0.0);
  // beta scales the quadratic zone: e=0.5, beta=0.5 sits on the linear branch
  CHECK(smooth_l1(0.5, 0.5) == 0.25);
}

TEST_CASE("smooth L1 is C1 at the branch point") {
  const Scalar beta = 1.0, eps = 1e-9;
  const Scalar below = smooth_l1(beta - eps, beta);
  const Scalar above = smooth_l1(beta + eps, beta);
  CHECK(std::abs(above - below) < 1e-8);         // continuous
  CHECK(std::abs(below - beta / 2.0) < 1e-8);    // both equal beta/2 at the joint
  // derivative approaches 1 from both sides
  CHECK(std::abs(smooth_l1_grad(beta - eps, beta) - 1.0) < 1e-8);
  CHECK(smooth_l1_grad(beta + eps, beta) == 1.0);
  CHECK(smooth_l1_grad(-(beta + eps), beta) == -1.0);
  CHECK(smooth_l1_grad(0.0, beta) == 0.0);
}

TEST_CASE("smooth_l1_grad is the derivative of smooth_l1") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<Scalar> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Scalar e = u(rng), h = 1e-6, beta = 1.0;
    const Scalar num =
        (smooth_l1(std::abs(e + h), beta) - smooth_l1(std::abs(e - h), beta)) / (2 * h);
    CHECK(std::abs(num - smooth_l1_grad(e, beta)) < 1e-6);
  }
}

TEST_CASE("total loss against a hand-computed batch") {
  // batch of 2; per-sample errors chosen to hit both branches
  const std::vector<NormalizedState> pred{{0.5, 0.2, 1.0}, {0.0, 0.9, 0.5}};
  const std::vector<NormalizedState> truth{{0.3, 0.2, 0.0}, {0.1, 0.4, 0.5}};
  // x: |0.2| -> 0.02 ; |0.1| -> 0.005 ; mean 0.0125
  // y: 0 -> 0       ; |0.5| -> 0.125 ; mean 0.0625
  // d: |1.0| -> 0.5 ; 0 -> 0         ; mean 0.25
  LossWeights w;  // all lambdas 1, beta 1
  CHECK(total_loss(pred, truth, w) == doctest::Approx(0.325).epsilon(1e-15));
  w.lambda_d = 2.0;
  CHECK(total_loss(pred, truth, w) == doctest::Approx(0.575).epsilon(1e-15));
  CHECK_THROWS_AS(total_loss({}, {}, w), MetricsError);
}

TEST_CASE("normalization maps the benchmark grids to the golden values") {
  const Scalar xs[] = {40, 60, 80, 100, 120, 140, 160};
  const Scalar xg[] = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  for (int i = 0; i < 7; ++i)
    CHECK(normalize_state({xs[i], 0.0, Direction::S}).p_xn == xg[i]);
  const Scalar ys[] = {70, 90, 170, 190, 290, 310};
  const Scalar yg[] = {0.175, 0.225, 0.425, 0.475, 0.725, 0.775};
  for (int i = 0; i < 6; ++i)
    CHECK(normalize_state({0.0, ys[i], Direction::S}).p_yn == yg[i]);
  CHECK(normalize_state({0, 0, Direction::L}).d_n == 0.0);
  CHECK(normalize_state({0, 0, Direction::S}).d_n == 0.5);
  CHECK(normalize_state({0, 0, Direction::R}).d_n == 1.0);
}

TEST_CASE("normalize/denormalize round-trip below 1e-9 cm") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<Scalar> ux(0.0, 200.0), uy(0.0, 400.0);
  for (int i = 0; i < 1000; ++i) {
    const LeaderState s{ux(rng), uy(rng), Direction::R};
    const LeaderState back = denormalize_state(normalize_state(s));
    CHECK(std::abs(back.p_x - s.p_x) < 1e-9);
    CHECK(std::abs(back.p_y - s.p_y) < 1e-9);
    CHECK(back.d == s.d);
  }
  CHECK_THROWS_AS(normalize_state({-1.0, 0.0, Direction::S}), MetricsError);
  CHECK_THROWS_AS(normalize_state({0.0, 400.5, Direction::S}), MetricsError);
}

TEST_CASE("direction decision thresholds are inclusive") {
  CHECK(classify_direction(0.25) == Direction::L);
  CHECK(classify_direction(0.2501) == Direction::S);
  CHECK(classify_direction(0.7499) == Direction::S);
  CHECK(classify_direction(0.75) == Direction::R);
  CHECK(classify_direction(-3.0) == Direction::L);
  CHECK(classify_direction(3.0) == Direction::R);
}

TEST_CASE("perfect predictor yields an all-zero report") {
  std::vector<NormalizedState> truth;
  for (int i = 0; i < 30; ++i)
    truth.push_back({i / 30.0, i / 60.0, (i % 3) * 0.5});
  const EvalReport r = eval_report(truth, truth);
  for (int k = 0; k < 3; ++k) {
    CHECK(r.rmse[k] == 0.0);
    CHECK(r.sd[k] == 0.0);
    CHECK(r.mean_error[k] == 0.0);
  }
  CHECK(r.confusion[0][0] == 10);
  CHECK(r.confusion[1][1] == 10);
  CHECK(r.confusion[2][2] == 10);
  CHECK(r.sample_count == 30);
}

TEST_CASE("RMSE, SD and bias satisfy rmse^2 = sd^2 + bias^2") {
  std::mt19937_64 rng(9);
  std::normal_distribution<Scalar> nd(0.02, 0.05);
  std::vector<NormalizedState> pred, truth;
  for (int i = 0; i < 500; ++i) {
    const NormalizedState t{0.5, 0.5, 0.5};
    truth.push_back(t);
    pred.push_back({t.p_xn + nd(rng), t.p_yn + nd(rng), t.d_n + nd(rng)});
  }
  const EvalReport r = eval_report(pred, truth);
  for (int k = 0; k < 3; ++k)
    CHECK(r.rmse[k] * r.rmse[k] ==
          doctest::Approx(r.sd[k] * r.sd[k] + r.mean_error[k] * r.mean_error[k])
              .epsilon(1e-12));
}

TEST_CASE("confusion row sums equal class counts; precision/recall on a known case") {
  // truth: 4 L, 4 S, 4 R; predictions scripted
  std::vector<NormalizedState> truth, pred;
  const Scalar codes[3] = {0.0, 0.5, 1.0};
  const int pred_class[3][4] = {{0, 0, 0, 1},   // L: 3 right, 1 -> S
                                {1, 1, 1, 1},   // S: all right
                                {2, 2, 1, 2}};  // R: 3 right, 1 -> S
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < 4; ++i) {
      truth.push_back({0.5, 0.5, codes[t]});
      pred.push_back({0.5, 0.5, codes[pred_class[t][i]]});
    }
  const EvalReport r = eval_report(pred, truth);
  for (int t = 0; t < 3; ++t)
    CHECK(r.confusion[t][0] + r.confusion[t][1] + r.confusion[t][2] == 4);
  const auto prec = per_class_precision(r);
  const auto rec = per_class_recall(r);
  CHECK(prec[0] == 1.0);
  CHECK(prec[1] == doctest::Approx(4.0 / 6.0));
  CHECK(prec[2] == 1.0);
  CHECK(rec[0] == 0.75);
  CHECK(rec[1] == 1.0);
  CHECK(rec[2] == 0.75);
}

TEST_CASE("outlier rule affects only direction statistics") {
  std::vector<NormalizedState> truth{{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}, {0.5, 0.5, 1.0}};
  std::vector<NormalizedState> pred{{0.6, 0.4, 0.05}, {0.5, 0.5, 0.29}, {0.5, 0.5, 0.97}};
  OutlierRule rule;
  rule.enabled = true;
  rule.max_code_distance = 0.2;  // drops the 0.29 prediction (0.21 from code 0.5)
  const EvalReport with = eval_report(pred, truth, rule);
  const EvalReport without = eval_report(pred, truth);
  CHECK(with.outliers_dropped == 1);
  CHECK(without.outliers_dropped == 0);
  for (int k = 0; k < 3; ++k) CHECK(with.rmse[k] == without.rmse[k]);  // untouched
  CHECK(with.direction[0].count == 1);
  CHECK(without.direction[0].count == 2);
  CHECK(with.direction[0].mean == 0.05);
  CHECK(with.direction[2].lower_extremum == 0.97);
  CHECK(with.direction[2].upper_extremum == 0.97);
}
