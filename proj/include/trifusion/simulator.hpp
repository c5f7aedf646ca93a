#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "trifusion/core_types.hpp"
#include "trifusion/pressure_pipeline.hpp"
#include "trifusion/rig_geometry.hpp"

namespace trifusion {

/// Propeller-wake model: amplitude decays as a power of distance, the
/// oscillation is a band-limited tone per propeller, and the action maps
/// to left/right propeller activity scalars.
struct WakeModel {
  Scalar base_amplitude = 1800.0;  // Pa at ref_distance
  Scalar ref_distance = 30.0;      // cm
  Scalar decay_exponent = 3.7;
  Scalar osc_freq_lo = 0.8;  // Hz
  Scalar osc_freq_hi = 2.5;  // Hz
  Scalar propeller_spacing = 20.0;  // cm between the two propellers
  // activity[direction][0]=left propeller, [1]=right; L and R mirror.
  std::array<std::array<Scalar, 2>, 3> activity{{{1.0, 0.5}, {0.85, 0.85}, {0.5, 1.0}}};

  std::array<Scalar, 2> activity_for(Direction d) const {
    return activity[static_cast<size_t>(d)];
  }
};

struct SceneConfig {
  Scalar pool_x = 200.0;  // cm
  Scalar pool_y = 400.0;  // cm
  Scalar rig_x = 100.0;   // cm
  Scalar rig_y = 0.0;     // cm, module sits at the pool end looking +y
  Scalar turbidity = 0.004;     // 1/cm contrast decay
  Scalar target_size = 60.0;    // cm, rendered target width
  Scalar image_noise = 0.02;    // stddev of additive pixel noise
  Scalar acoustic_sigma0 = 0.5; // cm noise floor
  Scalar acoustic_kappa = 0.01; // 1/cm noise growth with distance
  Scalar pressure_noise = 2.0;  // Pa RMS sensor noise
  Scalar base_pressure = 103800.0;  // Pa absolute at sensor depth
  int image_size = 224;
  int acoustic_samples = 200;     // per-case range series length
  Scalar pressure_rate = 10.0;    // Hz
  Scalar still_seconds = 30.0;
  Scalar wake_seconds = 78.0;
  Scalar pressure_limit = 100.0;  // cm; p_y beyond this flags pressure absent
  std::vector<Scalar> grid_x{40, 60, 80, 100, 120, 140, 160};
  std::vector<Scalar> grid_y{70, 90, 170, 190, 290, 310};
  WakeModel wake;
  std::uint64_t seed = 0;
};

/// Lab-scale scene (42 locations).
SceneConfig default_scene();
/// Desk-scale scene: 12 locations, 32x32 images.
SceneConfig toy_scene();
/// Field-test analog: 6 locations.
SceneConfig field_scene();

SceneConfig load_scene(const std::string& path);
void save_scene(const SceneConfig& scene, const std::string& path);

std::vector<CaseTriplet> scene_cases(const SceneConfig& scene);

/// Stable 64-bit FNV-1a, used to derive per-case RNG streams.
std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 14695981039346656037ull);

/// Oriented two-tone target rendered through the pinhole, with
/// turbidity-driven contrast decay and additive pixel noise. Output values
/// lie on the k/255 grid so lossless PNG storage round-trips exactly.
Image render_image(const CaseTriplet& c, const SceneConfig& scene, const RigModel& rig,
                   std::mt19937_64& rng);

/// Range readings for every acoustic sensor: truth + distance-growing
/// Gaussian noise inside the cone, kNoEcho outside.
VecX simulate_acoustics(const CaseTriplet& c, const SceneConfig& scene, const RigModel& rig,
                        std::mt19937_64& rng);

/// Still segment followed by the propeller-wake segment for all 9 sensors.
PressureRecord simulate_pressure(const CaseTriplet& c, const SceneConfig& scene,
                                 const RigModel& rig, std::mt19937_64& rng);

/// Full dataset in the on-disk layout; deterministic under (scene, seed).
void generate_dataset(const SceneConfig& scene, const RigModel& rig, int frames_per_case,
                      const std::string& out_dir);

}  // namespace trifusion
