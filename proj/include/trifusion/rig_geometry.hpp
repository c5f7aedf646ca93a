#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trifusion/core_types.hpp"

namespace trifusion {

/// Pinhole camera, no distortion.
struct CameraModel {
  Scalar focal = 110.0;   // px (wide angle; half-FOV about 45 deg)
  Scalar c_u = 112.0;     // px
  Scalar c_v = 112.0;     // px
  int width = 224;        // px
  int height = 224;       // px
};

/// One ultrasonic ranging sensor: lateral offset from the camera center
/// in camera-aligned axes and a cone-beam reception field.
struct AcousticSensorModel {
  int index = 0;
  Scalar t_u = 0.0;          // cm, offset along image u axis
  Scalar t_v = 0.0;          // cm, offset along image v axis
  Scalar cone_half_angle = 0.2618;  // rad (15 deg)
  Scalar min_range = 25.0;   // cm
  Scalar max_range = 400.0;  // cm
};

/// Full sensing-module description: camera, acoustic layout, pressure layout.
struct RigModel {
  CameraModel camera;
  std::vector<AcousticSensorModel> acoustic;
  // Pressure sensor offsets along the pool x axis relative to the module
  // center (cm); 9 sensors.
  std::vector<Scalar> pressure_offsets_x;
  int pressure_window = 64;  // T

  int num_acoustic() const { return static_cast<int>(acoustic.size()); }
  int num_pressure() const { return static_cast<int>(pressure_offsets_x.size()); }
};

/// Lab defaults: 4 active acoustic sensors, 9 pressure sensors.
RigModel default_rig();

RigModel load_rig(const std::string& path);
void save_rig(const RigModel& rig, const std::string& path);

/// Image-plane rectangle [u_l, u_u] x [v_l, v_u], already clipped.
struct ImageBounds {
  Scalar u_l = 0, u_u = 0, v_l = 0, v_u = 0;
};

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Projects the cone's cross-section disc at depth r_a through the pinhole.
/// Returns nullopt when the clipped rectangle is empty (target outside the
/// image), throws GeometryError when r_a is outside the sensor's range.
std::optional<ImageBounds> project_cone(Scalar r_a, const AcousticSensorModel& sensor,
                                        const CameraModel& cam);

/// True iff the target lies inside the sensor's cone beam (closed boundary).
/// Positions are pool-frame cm; the rig sits at rig_pos looking along +y.
bool in_reception_field(const CaseTriplet& c, const AcousticSensorModel& sensor,
                        Scalar rig_x, Scalar rig_y);

}  // namespace trifusion
