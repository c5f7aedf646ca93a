#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "trifusion/acoustic_fusion.hpp"

using namespace trifusion;

TEST_CASE("filter_and_stats drops out-of-threshold samples, population sigma") {
  // hand-computed: survivors {30, 50, 40}, mu = 40, population var = 200/3
  const std::vector<Scalar> raw{30.0, 50.0, 40.0, 10.0, 500.0, -1.0};
  const auto s = filter_and_stats(raw, 25.0, 400.0);
  REQUIRE(s.has_value());
  CHECK(s->count == 3);
  CHECK(s->mu == doctest::Approx(40.0).epsilon(1e-15));
  CHECK(s->sigma == doctest::Approx(std::sqrt(200.0 / 3.0)).epsilon(1e-15));
}

TEST_CASE("filter_and_stats with no survivors reports a non-receiving sensor") {
  CHECK_FALSE(filter_and_stats({-1.0, -1.0, 500.0}, 25.0, 400.0).has_value());
  CHECK_THROWS_AS(filter_and_stats({1.0}, 400.0, 25.0), FusionError);
}

TEST_CASE("sample_range is deterministic under a fixed generator and clamps") {
  AcousticSensorModel sensor;
  AcousticStats stats{100.0, 5.0, 10, 0};
  std::mt19937_64 a(7), b(7);
  CHECK(sample_range(stats, sensor, a) == sample_range(stats, sensor, b));
  // zero sigma returns the mean without consuming randomness
  AcousticStats exact{50.0, 0.0, 10, 0};
  std::mt19937_64 c(7);
  CHECK(sample_range(exact, sensor, c) == 50.0);
  CHECK(c == std::mt19937_64(7));
  // extreme mean clamps to the sensor limits
  AcousticStats low{-100.0, 0.0, 3, 0};
  std::mt19937_64 d(7);
  CHECK(sample_range(low, sensor, d) == sensor.min_range);
}

TEST_CASE("heatmap params: midpoint mean, extent-over-gamma sigma") {
  const ImageBounds b{10.0, 50.0, 100.0, 180.0};
  const auto p = heatmap_params(b, ExpansionFactors{4.0, 4.0});
  CHECK(p.mu_u == 30.0);
  CHECK(p.mu_v == 140.0);
  CHECK(p.sigma_u == 10.0);
  CHECK(p.sigma_v == 20.0);
  CHECK_THROWS_AS(heatmap_params(ImageBounds{50.0, 10.0, 0.0, 1.0}, ExpansionFactors{}),
                  FusionError);
  CHECK_THROWS_AS(heatmap_params(b, ExpansionFactors{0.0, 4.0}), FusionError);
}

TEST_CASE("fuse_joint matches an independent oracle on 1e4 random sets") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<Scalar> mu(-50.0, 250.0), sig(0.1, 40.0);
  std::uniform_int_distribution<int> count(1, 8);
  for (int trial = 0; trial < 10000; ++trial) {
    const int J = count(rng);
    std::vector<HeatmapParams> params(J);
    // oracle accumulators, written independently of the implementation
    Scalar mu_u = 0.0, mu_v = 0.0, su = 0.0, sv = 0.0;
    for (auto& p : params) {
      p.mu_u = mu(rng);
      p.mu_v = mu(rng);
      p.sigma_u = sig(rng);
      p.sigma_v = sig(rng);
      mu_u += p.mu_u / J;
      mu_v += p.mu_v / J;
      su += p.sigma_u * p.sigma_u;
      sv += p.sigma_v * p.sigma_v;
    }
    const auto joint = fuse_joint(params);
    CHECK(std::abs(joint.mu_u - mu_u) < 1e-12);
    CHECK(std::abs(joint.mu_v - mu_v) < 1e-12);
    CHECK(std::abs(joint.sigma_u - std::sqrt(su)) < 1e-12);
    CHECK(std::abs(joint.sigma_v - std::sqrt(sv)) < 1e-12);
  }
}

TEST_CASE("fuse_joint is permutation invariant") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<Scalar> mu(0.0, 224.0), sig(0.5, 30.0);
  std::vector<HeatmapParams> params(5);
  for (auto& p : params) {
    p.mu_u = mu(rng);
    p.mu_v = mu(rng);
    p.sigma_u = sig(rng);
    p.sigma_v = sig(rng);
  }
  const auto a = fuse_joint(params);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(params.begin(), params.end(), rng);
    const auto b = fuse_joint(params);
    CHECK(std::abs(a.mu_u - b.mu_u) < 1e-12);
    CHECK(std::abs(a.mu_v - b.mu_v) < 1e-12);
    CHECK(std::abs(a.sigma_u - b.sigma_u) < 1e-12);
    CHECK(std::abs(a.sigma_v - b.sigma_v) < 1e-12);
  }
  CHECK_THROWS_AS(fuse_joint(std::vector<HeatmapParams>{}), FusionError);
}

TEST_CASE("rendered heatmaps peak at exactly 1 with values in [0,1]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<Scalar> mu(-30.0, 250.0), sig(0.5, 60.0);
  for (int trial = 0; trial < 50; ++trial) {
    HeatmapParams p;
    p.mu_u = mu(rng);
    p.mu_v = mu(rng);
    p.sigma_u = sig(rng);
    p.sigma_v = sig(rng);
    const auto hm = render_heatmap(p, 64, 64);
    CHECK(hm.field.data.maxCoeff() == 1.0);
    CHECK(hm.field.data.minCoeff() >= 0.0);
  }
  CHECK_THROWS_AS(render_heatmap(HeatmapParams{10, 10, 0.0, 1.0}, 8, 8), FusionError);
}

TEST_CASE("assemble_rgba passes RGB through bit-exactly") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<Scalar> u(0.0, 1.0);
  Image rgb(3, 16, 16);
  for (Eigen::Index i = 0; i < rgb.data.size(); ++i) rgb.data[i] = u(rng);
  HeatmapParams p{8.0, 8.0, 3.0, 3.0, -1};
  const auto hm = render_heatmap(p, 16, 16);
  const RgbaImage out = assemble_rgba(rgb, hm);
  REQUIRE(out.channels == 4);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) CHECK(out.at(c, y, x) == rgb.at(c, y, x));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(out.at(3, y, x) == hm.field.at(0, y, x));
}

TEST_CASE("alpha blend formula") {
  CHECK(blend_rgba_to_rgb(0.8, 1.0, 0.1) == 0.8);
  CHECK(blend_rgba_to_rgb(0.8, 0.0, 0.1) == 0.1);
  CHECK(blend_rgba_to_rgb(0.5, 0.5, 1.0) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("build_attention skips silent sensors and zeroes with none receiving") {
  const RigModel rig = default_rig();
  SensorFrame frame;
  frame.image = Image(3, 32, 32);
  frame.image.data.setConstant(0.25);
  frame.case_triplet = {100.0, 190.0, Direction::S};

  SUBCASE("all sensors silent -> zero attention channel") {
    frame.acoustic = VecX::Constant(rig.num_acoustic(), kNoEcho);
    const RgbaImage out = build_attention(frame, rig, {});
    const Eigen::Index plane = 32 * 32;
    CHECK((out.data.segment(3 * plane, plane) == 0.0).all());
    CHECK((out.data.segment(0, 3 * plane) == frame.image.data).all());
  }
  SUBCASE("receiving sensors produce a peak-1 channel") {
    frame.acoustic = VecX::Constant(rig.num_acoustic(), 190.0);
    frame.acoustic[0] = kNoEcho;  // one silent sensor must not matter
    const RgbaImage out = build_attention(frame, rig, {});
    const Eigen::Index plane = 32 * 32;
    CHECK(out.data.segment(3 * plane, plane).maxCoeff() == 1.0);
  }
  SUBCASE("out-of-range readings are treated as silent, not fatal") {
    frame.acoustic = VecX::Constant(rig.num_acoustic(), 1000.0);
    const RgbaImage out = build_attention(frame, rig, {});
    const Eigen::Index plane = 32 * 32;
    CHECK((out.data.segment(3 * plane, plane) == 0.0).all());
  }
}
