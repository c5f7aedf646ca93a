#pragma once

#include <array>
#include <optional>
#include <random>
#include <vector>

#include "trifusion/core_types.hpp"
#include "trifusion/rig_geometry.hpp"

namespace trifusion {

/// Mean/stddev of the threshold-filtered range series of one sensor.
struct AcousticStats {
  Scalar mu = 0.0;     // cm
  Scalar sigma = 0.0;  // cm, population convention
  int count = 0;
  int sensor_index = 0;
};

struct HeatmapParams {
  Scalar mu_u = 0.0, mu_v = 0.0;      // px
  Scalar sigma_u = 0.0, sigma_v = 0.0;  // px
  int sensor_index = 0;
};

struct JointHeatmap {
  HeatmapParams params;
  Image field;  // [1 x H x W], values in [0,1], max 1 after normalization
};

/// RGB image plus acoustic attention channel, [4 x H x W].
using RgbaImage = Image;

struct FusionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Expansion factors converting projected bounds into heatmap sigmas.
struct ExpansionFactors {
  Scalar gamma_u = 4.0;
  Scalar gamma_v = 4.0;
};

/// Discards samples outside [lo, hi] and computes mean / population stddev.
/// Returns nullopt when no sample survives (sensor treated as non-receiving).
std::optional<AcousticStats> filter_and_stats(const std::vector<Scalar>& raw, Scalar lo,
                                              Scalar hi, int sensor_index = 0);

/// One draw r_a ~ N(mu, sigma^2), clamped to the sensor's range limits.
Scalar sample_range(const AcousticStats& stats, const AcousticSensorModel& sensor,
                    std::mt19937_64& rng);

/// mu = midpoint of the bounds, sigma = extent / gamma.
HeatmapParams heatmap_params(const ImageBounds& bounds, const ExpansionFactors& gamma,
                             int sensor_index = 0);

/// Joint mean = arithmetic mean of means, joint sigma = root-sum-square,
/// per axis. J = params.size(), J >= 1.
HeatmapParams fuse_joint(const std::vector<HeatmapParams>& params);

/// Evaluates the joint Gaussian on the pixel grid and divides by the grid
/// max, so the field peaks at exactly 1.
JointHeatmap render_heatmap(const HeatmapParams& joint, int height, int width);

/// Channel-wise concatenation; RGB values pass through untouched.
RgbaImage assemble_rgba(const Image& rgb, const JointHeatmap& heatmap);

/// Eq-style alpha blend for visualization: rgb = rgba*a + bg*(1-a).
Scalar blend_rgba_to_rgb(Scalar v_rgba, Scalar v_alpha, Scalar v_bg);
Image blend_rgba_image(const RgbaImage& rgba, const std::array<Scalar, 3>& background);

/// Full data-level fusion for one frame: per receiving sensor cone
/// projection -> heatmap params, joint fusion, render, RGBA assembly.
/// With zero receiving sensors the attention channel is all zeros.
RgbaImage build_attention(const SensorFrame& frame, const RigModel& rig,
                          const ExpansionFactors& gamma);

}  // namespace trifusion
