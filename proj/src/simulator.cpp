#include "trifusion/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "trifusion/dataio.hpp"
#include "trifusion/png_io.hpp"

namespace trifusion {

namespace fs = std::filesystem;
using nlohmann::json;

SceneConfig default_scene() { return SceneConfig{}; }

SceneConfig toy_scene() {
  SceneConfig s;
  s.image_size = 32;
  s.grid_x = {40, 100, 160};
  s.grid_y = {70, 90, 190, 290};
  s.acoustic_samples = 60;
  // heavier pixel noise at desk scale so each modality carries real weight
  s.image_noise = 0.10;
  return s;
}

SceneConfig field_scene() {
  SceneConfig s;
  s.grid_x = {70, 130};
  s.grid_y = {90, 190, 290};
  s.turbidity = 0.012;  // murkier open water
  return s;
}

namespace {

json scene_to_json(const SceneConfig& s) {
  json j;
  j["pool_x"] = s.pool_x;
  j["pool_y"] = s.pool_y;
  j["rig_x"] = s.rig_x;
  j["rig_y"] = s.rig_y;
  j["turbidity"] = s.turbidity;
  j["target_size"] = s.target_size;
  j["image_noise"] = s.image_noise;
  j["acoustic_sigma0"] = s.acoustic_sigma0;
  j["acoustic_kappa"] = s.acoustic_kappa;
  j["pressure_noise"] = s.pressure_noise;
  j["base_pressure"] = s.base_pressure;
  j["image_size"] = s.image_size;
  j["acoustic_samples"] = s.acoustic_samples;
  j["pressure_rate"] = s.pressure_rate;
  j["still_seconds"] = s.still_seconds;
  j["wake_seconds"] = s.wake_seconds;
  j["pressure_limit"] = s.pressure_limit;
  j["grid_x"] = s.grid_x;
  j["grid_y"] = s.grid_y;
  j["seed"] = s.seed;
  json w;
  w["base_amplitude"] = s.wake.base_amplitude;
  w["ref_distance"] = s.wake.ref_distance;
  w["decay_exponent"] = s.wake.decay_exponent;
  w["osc_freq_lo"] = s.wake.osc_freq_lo;
  w["osc_freq_hi"] = s.wake.osc_freq_hi;
  w["propeller_spacing"] = s.wake.propeller_spacing;
  w["activity"] = s.wake.activity;
  j["wake"] = w;
  return j;
}

SceneConfig scene_from_json(const json& j) {
  SceneConfig s;
  s.pool_x = j.value("pool_x", s.pool_x);
  s.pool_y = j.value("pool_y", s.pool_y);
  s.rig_x = j.value("rig_x", s.rig_x);
  s.rig_y = j.value("rig_y", s.rig_y);
  s.turbidity = j.value("turbidity", s.turbidity);
  s.target_size = j.value("target_size", s.target_size);
  s.image_noise = j.value("image_noise", s.image_noise);
  s.acoustic_sigma0 = j.value("acoustic_sigma0", s.acoustic_sigma0);
  s.acoustic_kappa = j.value("acoustic_kappa", s.acoustic_kappa);
  s.pressure_noise = j.value("pressure_noise", s.pressure_noise);
  s.base_pressure = j.value("base_pressure", s.base_pressure);
  s.image_size = j.value("image_size", s.image_size);
  s.acoustic_samples = j.value("acoustic_samples", s.acoustic_samples);
  s.pressure_rate = j.value("pressure_rate", s.pressure_rate);
  s.still_seconds = j.value("still_seconds", s.still_seconds);
  s.wake_seconds = j.value("wake_seconds", s.wake_seconds);
  s.pressure_limit = j.value("pressure_limit", s.pressure_limit);
  if (j.contains("grid_x")) s.grid_x = j.at("grid_x").get<std::vector<Scalar>>();
  if (j.contains("grid_y")) s.grid_y = j.at("grid_y").get<std::vector<Scalar>>();
  s.seed = j.value("seed", s.seed);
  if (j.contains("wake")) {
    const json& w = j.at("wake");
    s.wake.base_amplitude = w.value("base_amplitude", s.wake.base_amplitude);
    s.wake.ref_distance = w.value("ref_distance", s.wake.ref_distance);
    s.wake.decay_exponent = w.value("decay_exponent", s.wake.decay_exponent);
    s.wake.osc_freq_lo = w.value("osc_freq_lo", s.wake.osc_freq_lo);
    s.wake.osc_freq_hi = w.value("osc_freq_hi", s.wake.osc_freq_hi);
    s.wake.propeller_spacing = w.value("propeller_spacing", s.wake.propeller_spacing);
    if (w.contains("activity")) w.at("activity").get_to(s.wake.activity);
  }
  return s;
}

}  // namespace

SceneConfig load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene config: " + path);
  json j;
  in >> j;
  return scene_from_json(j);
}

void save_scene(const SceneConfig& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scene config: " + path);
  out << scene_to_json(scene).dump(2) << "\n";
}

std::vector<CaseTriplet> scene_cases(const SceneConfig& scene) {
  std::vector<CaseTriplet> out;
  for (Scalar y : scene.grid_y)
    for (Scalar x : scene.grid_x)
      for (Direction d : {Direction::L, Direction::S, Direction::R})
        out.push_back({x, y, d});
  return out;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

Scalar yaw_of(Direction d) {
  constexpr Scalar q = std::numbers::pi / 4.0;
  switch (d) {
    case Direction::L: return -q;
    case Direction::S: return 0.0;
    default: return q;
  }
}

}  // namespace

Image render_image(const CaseTriplet& c, const SceneConfig& scene, const RigModel& rig,
                   std::mt19937_64& rng) {
  const int S = scene.image_size;
  const Scalar scale = static_cast<Scalar>(S) / rig.camera.width;
  const Scalar f = rig.camera.focal * scale;
  const Scalar cu = rig.camera.c_u * scale;
  const Scalar cv = rig.camera.c_v * scale;

  const Scalar depth = c.p_y - scene.rig_y;
  const Scalar dist = std::hypot(c.p_x - scene.rig_x, depth);
  const Scalar contrast = std::exp(-scene.turbidity * dist);
  const Scalar yaw = yaw_of(c.d);

  const Scalar u0 = cu + f * (c.p_x - scene.rig_x) / depth;
  const Scalar v0 = cv;
  // yaw foreshortens the apparent width and shifts the two-tone split line,
  // making L/S/R visually distinct (and L/R mirror-asymmetric).
  const Scalar half_w = f * (scene.target_size / 2.0) / depth * (0.75 + 0.25 * std::cos(yaw));
  const Scalar half_h = f * (scene.target_size * 0.2) / depth;
  const Scalar split = std::sin(yaw) * 0.6;  // fraction of half_w

  const Scalar base[3] = {0.18, 0.34, 0.45};
  const Scalar dark[3] = {0.10, 0.10, 0.12};
  const Scalar bright[3] = {0.80, 0.45, 0.10};
  // Navigation lights on the hull ends: port red, starboard green. A turn
  // rotates one end toward the camera, so their relative intensity encodes
  // the heading even when the hull is only a few pixels wide.
  const Scalar left_glow = 0.5 - 0.5 * std::sin(yaw);
  const Scalar right_glow = 0.5 + 0.5 * std::sin(yaw);
  const Scalar light_rad = std::max<Scalar>(1.5, half_w * 0.25);
  const Scalar red[3] = {1.0, 0.15, 0.10};
  const Scalar green[3] = {0.10, 1.0, 0.25};
  // Emissive sources attenuate one-way; reflected target contrast decays
  // round-trip. Lights therefore stay visible well past the hull itself.
  const Scalar light_contrast = std::exp(-0.5 * scene.turbidity * dist);

  std::normal_distribution<Scalar> noise(0.0, scene.image_noise);
  Image img(3, S, S);
  for (int y = 0; y < S; ++y) {
    const Scalar shade = 1.0 - 0.15 * static_cast<Scalar>(y) / S;
    for (int x = 0; x < S; ++x) {
      const Scalar dx = x + 0.5 - u0;
      const Scalar dy = y + 0.5 - v0;
      const bool inside = std::abs(dx) <= half_w && std::abs(dy) <= half_h;
      const Scalar* tone = nullptr;
      if (inside) tone = dx < split * half_w ? dark : bright;
      for (int ch = 0; ch < 3; ++ch) {
        Scalar v = base[ch] * shade;
        if (tone) v += (tone[ch] - v) * contrast;
        const Scalar dl = std::hypot(dx + half_w, dy), dr = std::hypot(dx - half_w, dy);
        if (dl <= light_rad) v += (red[ch] - v) * light_contrast * left_glow;
        if (dr <= light_rad) v += (green[ch] - v) * light_contrast * right_glow;
        v += noise(rng);
        v = std::clamp(v, 0.0, 1.0);
        img.at(ch, y, x) = std::round(v * 255.0) / 255.0;
      }
    }
  }
  return img;
}

VecX simulate_acoustics(const CaseTriplet& c, const SceneConfig& scene, const RigModel& rig,
                        std::mt19937_64& rng) {
  VecX out(rig.num_acoustic());
  for (int i = 0; i < rig.num_acoustic(); ++i) {
    const AcousticSensorModel& sensor = rig.acoustic[static_cast<size_t>(i)];
    if (!in_reception_field(c, sensor, scene.rig_x, scene.rig_y)) {
      out[i] = kNoEcho;
      continue;
    }
    const Scalar truth = std::hypot(c.p_x - (scene.rig_x + sensor.t_u), c.p_y - scene.rig_y);
    std::normal_distribution<Scalar> noise(0.0,
                                           scene.acoustic_sigma0 * (1.0 + scene.acoustic_kappa * truth));
    out[i] = std::clamp(truth + noise(rng), sensor.min_range, sensor.max_range);
  }
  return out;
}

PressureRecord simulate_pressure(const CaseTriplet& c, const SceneConfig& scene,
                                 const RigModel& rig, std::mt19937_64& rng) {
  const int Q = rig.num_pressure();
  const int still_len = static_cast<int>(std::lround(scene.still_seconds * scene.pressure_rate));
  const int wake_len = static_cast<int>(std::lround(scene.wake_seconds * scene.pressure_rate));
  const int L = still_len + wake_len;

  PressureRecord rec;
  rec.still_len = still_len;
  rec.sample_rate = scene.pressure_rate;
  rec.raw.resize(Q, L);

  const WakeModel& w = scene.wake;
  const Scalar yaw = yaw_of(c.d);
  // Target lateral axis in the pool frame; propellers sit on either side.
  const Scalar lat_x = std::cos(yaw), lat_y = std::sin(yaw);
  const Scalar half_sp = w.propeller_spacing / 2.0;
  const Scalar prop_x[2] = {c.p_x - lat_x * half_sp, c.p_x + lat_x * half_sp};
  const Scalar prop_y[2] = {c.p_y - lat_y * half_sp, c.p_y + lat_y * half_sp};
  const std::array<Scalar, 2> act = w.activity_for(c.d);

  std::uniform_real_distribution<Scalar> freq(w.osc_freq_lo, w.osc_freq_hi);
  std::uniform_real_distribution<Scalar> phase(0.0, 2.0 * std::numbers::pi);
  Scalar fq[2], ph[2];
  for (int p = 0; p < 2; ++p) {
    fq[p] = freq(rng);
    ph[p] = phase(rng);
  }

  std::normal_distribution<Scalar> noise(0.0, scene.pressure_noise);
  for (int i = 0; i < Q; ++i) {
    const Scalar sx = scene.rig_x + rig.pressure_offsets_x[static_cast<size_t>(i)];
    Scalar amp[2];
    for (int p = 0; p < 2; ++p) {
      const Scalar d = std::hypot(prop_x[p] - sx, prop_y[p] - scene.rig_y);
      amp[p] = act[static_cast<size_t>(p)] * w.base_amplitude *
               std::pow(w.ref_distance / d, w.decay_exponent);
    }
    for (int k = 0; k < L; ++k) {
      Scalar v = scene.base_pressure + noise(rng);
      if (k >= still_len) {
        const Scalar t = (k - still_len) / scene.pressure_rate;
        for (int p = 0; p < 2; ++p)
          v += amp[p] * std::sin(2.0 * std::numbers::pi * fq[p] * t + ph[p]);
      }
      rec.raw(i, k) = v;
    }
  }
  return rec;
}

namespace {

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m, bool rows_are_samples,
                      const std::string& header = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  if (!header.empty()) out << header << '\n';
  char buf[32];
  const Eigen::Index rows = rows_are_samples ? m.cols() : m.rows();
  const Eigen::Index cols = rows_are_samples ? m.rows() : m.cols();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index cc = 0; cc < cols; ++cc) {
      const Scalar v = rows_are_samples ? m(cc, r) : m(r, cc);
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf;
      if (cc + 1 < cols) out << ',';
    }
    out << '\n';
  }
}

}  // namespace

void generate_dataset(const SceneConfig& scene, const RigModel& rig, int frames_per_case,
                      const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::vector<CaseTriplet> cases = scene_cases(scene);

  json manifest;
  manifest["format_version"] = 1;
  manifest["seed"] = scene.seed;
  manifest["frames_per_case"] = frames_per_case;
  manifest["image_size"] = scene.image_size;
  manifest["pressure_limit"] = scene.pressure_limit;
  manifest["scene"] = scene_to_json(scene);
  json jcases = json::array();

  std::vector<std::pair<std::string, CaseTriplet>> ordered;
  for (const CaseTriplet& c : cases) ordered.emplace_back(make_case_id(c), c);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  for (const auto& [case_id, c] : ordered) {
    const fs::path case_dir = fs::path(out_dir) / case_id;
    fs::create_directories(case_dir / "images");
    std::mt19937_64 rng(fnv1a(case_id, fnv1a(std::to_string(scene.seed))));

    Eigen::MatrixXd acoustic(rig.num_acoustic(), scene.acoustic_samples);
    for (int k = 0; k < scene.acoustic_samples; ++k)
      acoustic.col(k) = simulate_acoustics(c, scene, rig, rng);
    write_csv_matrix((case_dir / "acoustic.csv").string(), acoustic, true);

    const PressureRecord rec = simulate_pressure(c, scene, rig, rng);
    std::string header;
    for (Eigen::Index q = 0; q < rec.raw.rows(); ++q)
      header += (q ? "," : "") + std::to_string(q + 1);
    write_csv_matrix((case_dir / "pressure.csv").string(), rec.raw, true, header);

    for (int fidx = 0; fidx < frames_per_case; ++fidx) {
      const Image img = render_image(c, scene, rig, rng);
      char name[16];
      std::snprintf(name, sizeof name, "%04d.png", fidx);
      write_png_rgb((case_dir / "images" / name).string(), img);
    }

    json meta;
    meta["id"] = case_id;
    meta["p_x"] = c.p_x;
    meta["p_y"] = c.p_y;
    meta["d"] = std::string(1, direction_char(c.d));
    meta["frames"] = frames_per_case;
    meta["still_len"] = rec.still_len;
    meta["sample_rate"] = rec.sample_rate;
    const bool pressure_available = c.p_y <= scene.pressure_limit;
    meta["pressure_available"] = pressure_available;
    {
      std::ofstream out(case_dir / "meta.json");
      out << meta.dump(2) << "\n";
    }

    json jc;
    jc["id"] = case_id;
    jc["p_x"] = c.p_x;
    jc["p_y"] = c.p_y;
    jc["d"] = std::string(1, direction_char(c.d));
    jc["frames"] = frames_per_case;
    jc["pressure_available"] = pressure_available;
    jc["checksum"] = case_checksum(case_dir.string(), frames_per_case);
    jcases.push_back(jc);
  }
  manifest["cases"] = jcases;

  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << manifest.dump(2) << "\n";
}

}  // namespace trifusion
