#include "trifusion/acoustic_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace trifusion {

std::optional<AcousticStats> filter_and_stats(const std::vector<Scalar>& raw, Scalar lo,
                                              Scalar hi, int sensor_index) {
  if (!(lo < hi)) throw FusionError("filter thresholds must satisfy lo < hi");
  Scalar sum = 0.0;
  int n = 0;
  for (Scalar r : raw) {
    if (r >= lo && r <= hi) {
      sum += r;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  const Scalar mu = sum / n;
  Scalar ss = 0.0;
  for (Scalar r : raw) {
    if (r >= lo && r <= hi) ss += (r - mu) * (r - mu);
  }
  AcousticStats stats;
  stats.mu = mu;
  stats.sigma = std::sqrt(ss / n);  // population stddev
  stats.count = n;
  stats.sensor_index = sensor_index;
  return stats;
}

Scalar sample_range(const AcousticStats& stats, const AcousticSensorModel& sensor,
                    std::mt19937_64& rng) {
  Scalar r = stats.mu;
  if (stats.sigma > 0.0) {
    std::normal_distribution<Scalar> dist(stats.mu, stats.sigma);
    r = dist(rng);
  }
  return std::clamp(r, sensor.min_range, sensor.max_range);
}

HeatmapParams heatmap_params(const ImageBounds& b, const ExpansionFactors& gamma,
                             int sensor_index) {
  if (!(b.u_l < b.u_u) || !(b.v_l < b.v_u))
    throw FusionError("degenerate bounds for heatmap params");
  if (!(gamma.gamma_u > 0.0) || !(gamma.gamma_v > 0.0))
    throw FusionError("expansion factors must be positive");
  HeatmapParams p;
  p.mu_u = (b.u_u + b.u_l) / 2.0;
  p.mu_v = (b.v_u + b.v_l) / 2.0;
  p.sigma_u = (b.u_u - b.u_l) / gamma.gamma_u;
  p.sigma_v = (b.v_u - b.v_l) / gamma.gamma_v;
  p.sensor_index = sensor_index;
  return p;
}

HeatmapParams fuse_joint(const std::vector<HeatmapParams>& params) {
  if (params.empty()) throw FusionError("fuse_joint on empty parameter list");
  const auto J = static_cast<Scalar>(params.size());
  HeatmapParams joint;
  Scalar su2 = 0.0, sv2 = 0.0;
  for (const auto& p : params) {
    joint.mu_u += p.mu_u;
    joint.mu_v += p.mu_v;
    su2 += p.sigma_u * p.sigma_u;
    sv2 += p.sigma_v * p.sigma_v;
  }
  joint.mu_u /= J;
  joint.mu_v /= J;
  joint.sigma_u = std::sqrt(su2);
  joint.sigma_v = std::sqrt(sv2);
  joint.sensor_index = -1;
  return joint;
}

JointHeatmap render_heatmap(const HeatmapParams& joint, int height, int width) {
  if (!(joint.sigma_u > 0.0) || !(joint.sigma_v > 0.0))
    throw FusionError("render_heatmap requires positive sigmas");
  JointHeatmap hm;
  hm.params = joint;
  hm.field = Image(1, height, width);
  const Scalar iu = 1.0 / (2.0 * joint.sigma_u * joint.sigma_u);
  const Scalar iv = 1.0 / (2.0 * joint.sigma_v * joint.sigma_v);
  // Grid-max normalization done in log space: exponentiating after the
  // subtraction keeps the peak at exactly 1 even when the raw Gaussian
  // underflows for a far off-image center.
  ArrX expo(static_cast<Eigen::Index>(height) * width);
  Scalar emax = -std::numeric_limits<Scalar>::infinity();
  for (int y = 0; y < height; ++y) {
    const Scalar dv = y - joint.mu_v;
    for (int x = 0; x < width; ++x) {
      const Scalar du = x - joint.mu_u;
      const Scalar e = -(du * du * iu + dv * dv * iv);
      expo[static_cast<Eigen::Index>(y) * width + x] = e;
      emax = std::max(emax, e);
    }
  }
  hm.field.data = (expo - emax).exp();
  return hm;
}

RgbaImage assemble_rgba(const Image& rgb, const JointHeatmap& heatmap) {
  if (rgb.channels != 3 || heatmap.field.height != rgb.height ||
      heatmap.field.width != rgb.width)
    throw FusionError("assemble_rgba size mismatch");
  RgbaImage out(4, rgb.height, rgb.width);
  const Eigen::Index plane = static_cast<Eigen::Index>(rgb.height) * rgb.width;
  out.data.segment(0, 3 * plane) = rgb.data;
  out.data.segment(3 * plane, plane) = heatmap.field.data;
  return out;
}

Scalar blend_rgba_to_rgb(Scalar v_rgba, Scalar v_alpha, Scalar v_bg) {
  return v_rgba * v_alpha + v_bg * (1.0 - v_alpha);
}

Image blend_rgba_image(const RgbaImage& rgba, const std::array<Scalar, 3>& background) {
  if (rgba.channels != 4) throw FusionError("blend_rgba_image expects 4 channels");
  Image out(3, rgba.height, rgba.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < rgba.height; ++y)
      for (int x = 0; x < rgba.width; ++x)
        out.at(c, y, x) =
            blend_rgba_to_rgb(rgba.at(c, y, x), rgba.at(3, y, x), background[c]);
  return out;
}

RgbaImage build_attention(const SensorFrame& frame, const RigModel& rig,
                          const ExpansionFactors& gamma) {
  std::vector<HeatmapParams> per_sensor;
  const int P = std::min<int>(rig.num_acoustic(), static_cast<int>(frame.acoustic.size()));
  for (int j = 0; j < P; ++j) {
    const Scalar r = frame.acoustic[j];
    const auto& sensor = rig.acoustic[j];
    if (r == kNoEcho || r < sensor.min_range || r > sensor.max_range) continue;
    auto bounds = project_cone(r, sensor, rig.camera);
    if (!bounds) continue;
    // Scale bounds from camera pixel coordinates to the frame's resolution.
    const Scalar sx = static_cast<Scalar>(frame.image.width) / rig.camera.width;
    const Scalar sy = static_cast<Scalar>(frame.image.height) / rig.camera.height;
    ImageBounds b{bounds->u_l * sx, bounds->u_u * sx, bounds->v_l * sy, bounds->v_u * sy};
    if (!(b.u_l < b.u_u) || !(b.v_l < b.v_u)) continue;  // degenerate after clip
    per_sensor.push_back(heatmap_params(b, gamma, sensor.index));
  }
  if (per_sensor.empty()) {
    JointHeatmap zero;
    zero.field = Image(1, frame.image.height, frame.image.width);
    return assemble_rgba(frame.image, zero);
  }
  const auto joint = fuse_joint(per_sensor);
  const auto hm = render_heatmap(joint, frame.image.height, frame.image.width);
  return assemble_rgba(frame.image, hm);
}

}  // namespace trifusion
