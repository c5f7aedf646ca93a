#include <doctest.h>

#include "trifusion/pressure_pipeline.hpp"

using namespace trifusion;

namespace {

PressureRecord small_record() {
  PressureRecord r;
  r.raw.resize(2, 6);
  // sensor 0 still mean = 10, sensor 1 still mean = 100
  r.raw << 9, 10, 11, 14, 16, 18,  //
      99, 100, 101, 105, 90, 100;
  r.still_len = 3;
  r.sample_rate = 10.0;
  return r;
}

}  // namespace

TEST_CASE("still-water baseline is the per-sensor mean of the still segment") {
  const auto r = small_record();
  const VecX b = still_water_baseline(r);
  REQUIRE(b.size() == 2);
  CHECK(b[0] == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(b[1] == doctest::Approx(100.0).epsilon(1e-15));
}

TEST_CASE("relative pressure subtracts the baseline everywhere") {
  const auto r = small_record();
  const auto rel = relative_pressure(r, still_water_baseline(r));
  CHECK(rel(0, 0) == doctest::Approx(-1.0));
  CHECK(rel(0, 5) == doctest::Approx(8.0));
  CHECK(rel(1, 4) == doctest::Approx(-10.0));
  // the still segment's mean relative pressure is zero by construction
  CHECK(rel.leftCols(r.still_len).rowwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  VecX bad(3);
  CHECK_THROWS_AS(relative_pressure(r, bad), PressureError);
}

TEST_CASE("baseline input validation") {
  PressureRecord r = small_record();
  r.still_len = 0;
  CHECK_THROWS_AS(still_water_baseline(r), PressureError);
  r.still_len = 7;  // longer than the series
  CHECK_THROWS_AS(still_water_baseline(r), PressureError);
}

TEST_CASE("window extraction strides through the series") {
  Eigen::MatrixXd rel(1, 100);
  for (int i = 0; i < 100; ++i) rel(0, i) = i;  // value == sample index
  // rate 10 Hz, stride 0.5 s -> every 5th sample
  const PressureWindow w = extract_window(rel, 10.0, 1.0, 4, 0.5);
  REQUIRE(w.values.cols() == 4);
  CHECK(w.values(0, 0) == 10.0);
  CHECK(w.values(0, 1) == 15.0);
  CHECK(w.values(0, 2) == 20.0);
  CHECK(w.values(0, 3) == 25.0);
}

TEST_CASE("window extraction rejects out-of-series requests") {
  Eigen::MatrixXd rel(1, 50);
  rel.setZero();
  // last index = 45 + 3*5 = 60 >= 50
  CHECK_THROWS_AS(extract_window(rel, 10.0, 4.5, 4, 0.5), PressureError);
  CHECK_THROWS_AS(extract_window(rel, 10.0, -0.5, 4, 0.5), PressureError);
  CHECK_THROWS_AS(extract_window(rel, 10.0, 0.0, 0, 0.5), PressureError);
  CHECK_THROWS_AS(extract_window(rel, 10.0, 0.0, 4, 0.01), PressureError);
  // exactly the last admissible start works: 3.4*10=34, 34+3*5=49
  CHECK_NOTHROW(extract_window(rel, 10.0, 3.4, 4, 0.5));
}
