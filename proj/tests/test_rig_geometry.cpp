#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "trifusion/rig_geometry.hpp"

using namespace trifusion;

TEST_CASE("default rig layout") {
  const RigModel rig = default_rig();
  CHECK(rig.num_acoustic() == 4);
  CHECK(rig.num_pressure() == 9);
  CHECK(rig.pressure_window == 64);
  CHECK(rig.pressure_offsets_x.front() == -20.0);
  CHECK(rig.pressure_offsets_x.back() == 20.0);
  // sensors are symmetric about the camera axis
  CHECK(rig.acoustic[0].t_u == -rig.acoustic[3].t_u);
  CHECK(rig.acoustic[1].t_u == -rig.acoustic[2].t_u);
}

TEST_CASE("rig JSON round-trip") {
  const RigModel rig = default_rig();
  const std::string path = "rig_roundtrip.json";
  save_rig(rig, path);
  const RigModel loaded = load_rig(path);
  CHECK(loaded.camera.focal == rig.camera.focal);
  CHECK(loaded.camera.width == rig.camera.width);
  REQUIRE(loaded.num_acoustic() == rig.num_acoustic());
  for (int i = 0; i < rig.num_acoustic(); ++i) {
    CHECK(loaded.acoustic[i].t_u == rig.acoustic[i].t_u);
    CHECK(loaded.acoustic[i].cone_half_angle == rig.acoustic[i].cone_half_angle);
  }
  CHECK(loaded.pressure_offsets_x == rig.pressure_offsets_x);
  std::remove(path.c_str());
}

TEST_CASE("project_cone centered on-axis sensor") {
  CameraModel cam;  // focal 110, center (112,112), 224x224
  AcousticSensorModel s;
  s.t_u = 0.0;
  const Scalar r = 100.0;
  const auto b = project_cone(r, s, cam);
  REQUIRE(b.has_value());
  // half extent = f*tan(15 deg) = 110*0.26795 = 29.474...; fully inside
  const Scalar half = 110.0 * std::tan(s.cone_half_angle);
  CHECK(b->u_l == doctest::Approx(112.0 - half).epsilon(1e-12));
  CHECK(b->u_u == doctest::Approx(112.0 + half).epsilon(1e-12));
  CHECK(b->v_l == doctest::Approx(112.0 - half).epsilon(1e-12));
  CHECK(b->v_u == doctest::Approx(112.0 + half).epsilon(1e-12));
  // the rectangle narrows in u as the lateral offset projects further out
  s.t_u = 15.0;
  const auto b2 = project_cone(r, s, cam);
  REQUIRE(b2.has_value());
  CHECK(b2->u_l == doctest::Approx(112.0 + 110.0 * 15.0 / r - half).epsilon(1e-12));
}

TEST_CASE("project_cone clips to the image and reports empty overlap") {
  CameraModel cam;
  AcousticSensorModel s;
  s.t_u = 150.0;  // projects near/past the right edge depending on range
  // at close range the center u = 112 + 110*150/26 = 745 -> fully outside
  CHECK_FALSE(project_cone(26.0, s, cam).has_value());
  // at longer range it comes back into view, clipped at the right border
  const auto b = project_cone(150.0, s, cam);
  REQUIRE(b.has_value());
  CHECK(b->u_u == 224.0);
  CHECK(b->u_l >= 0.0);
}

TEST_CASE("project_cone rejects out-of-range distances") {
  CameraModel cam;
  AcousticSensorModel s;
  CHECK_THROWS_AS(project_cone(10.0, s, cam), GeometryError);
  CHECK_THROWS_AS(project_cone(500.0, s, cam), GeometryError);
  CHECK_NOTHROW(project_cone(s.min_range, s, cam));
  CHECK_NOTHROW(project_cone(s.max_range, s, cam));
}

TEST_CASE("in_reception_field agrees with a brute-force cone test on 1000 poses") {
  // independent oracle: angle between the boresight (+y) and the sensor-to-
  // target vector via the dot-product formula, plus explicit range test
  const auto oracle = [](const CaseTriplet& c, const AcousticSensorModel& s, Scalar rx,
                         Scalar ry) {
    const Scalar sx = rx + s.t_u;
    const Scalar vx = c.p_x - sx, vy = c.p_y - ry;
    const Scalar dist = std::sqrt(vx * vx + vy * vy);
    if (dist < s.min_range || dist > s.max_range) return false;
    if (vy <= 0.0) return false;
    const Scalar cosang = vy / dist;
    return std::acos(std::min(1.0, std::max(-1.0, cosang))) <= s.cone_half_angle;
  };

  const RigModel rig = default_rig();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<Scalar> ux(0.0, 200.0), uy(0.0, 400.0);
  int received = 0;
  for (int i = 0; i < 1000; ++i) {
    const CaseTriplet c{ux(rng), uy(rng), Direction::S};
    for (const auto& s : rig.acoustic) {
      const bool got = in_reception_field(c, s, 100.0, 0.0);
      CHECK(got == oracle(c, s, 100.0, 0.0));
      received += got ? 1 : 0;
    }
  }
  CHECK(received > 0);  // the grid is not degenerate
}

TEST_CASE("reception boundary is closed") {
  AcousticSensorModel s;
  s.t_u = 0.0;
  // range limits are inclusive
  CHECK(in_reception_field({100.0, s.min_range, Direction::S}, s, 100.0, 0.0));
  CHECK_FALSE(in_reception_field({100.0, s.min_range - 0.01, Direction::S}, s, 100.0, 0.0));
  CHECK(in_reception_field({100.0, s.max_range, Direction::S}, s, 100.0, 0.0));
  CHECK_FALSE(in_reception_field({100.0, s.max_range + 0.01, Direction::S}, s, 100.0, 0.0));
  // cone surface: just inside accepted, clearly outside rejected
  const Scalar dy = 100.0;
  CHECK(in_reception_field({100.0 + dy * std::tan(s.cone_half_angle - 1e-9), dy, Direction::S},
                           s, 100.0, 0.0));
  CHECK_FALSE(in_reception_field(
      {100.0 + dy * std::tan(s.cone_half_angle) + 0.5, dy, Direction::S}, s, 100.0, 0.0));
}
