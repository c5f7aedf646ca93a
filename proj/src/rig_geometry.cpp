#include "trifusion/rig_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace trifusion {

using nlohmann::json;

RigModel default_rig() {
  RigModel rig;
  rig.camera = CameraModel{110.0, 112.0, 112.0, 224, 224};
  // Four active ranging sensors spread along the module's u axis.
  const Scalar offsets[] = {-15.0, -5.0, 5.0, 15.0};
  for (int j = 0; j < 4; ++j) {
    AcousticSensorModel s;
    s.index = j;
    s.t_u = offsets[j];
    s.t_v = 0.0;
    s.cone_half_angle = 15.0 * M_PI / 180.0;
    s.min_range = 25.0;
    s.max_range = 400.0;
    rig.acoustic.push_back(s);
  }
  // Nine pressure sensors spaced 5 cm apart across the module face.
  for (int i = 0; i < 9; ++i) rig.pressure_offsets_x.push_back(-20.0 + 5.0 * i);
  rig.pressure_window = 64;
  return rig;
}

RigModel load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rig config: " + path);
  json j;
  in >> j;
  RigModel rig;
  const auto& cam = j.at("camera");
  rig.camera.focal = cam.at("focal_px");
  rig.camera.c_u = cam.at("c_u");
  rig.camera.c_v = cam.at("c_v");
  rig.camera.width = cam.at("width");
  rig.camera.height = cam.at("height");
  for (const auto& sj : j.at("acoustic")) {
    AcousticSensorModel s;
    s.index = sj.at("index");
    s.t_u = sj.at("t_u_cm");
    s.t_v = sj.at("t_v_cm");
    s.cone_half_angle = sj.at("cone_half_angle_rad");
    s.min_range = sj.at("min_range_cm");
    s.max_range = sj.at("max_range_cm");
    rig.acoustic.push_back(s);
  }
  for (const auto& off : j.at("pressure_offsets_x_cm"))
    rig.pressure_offsets_x.push_back(off.get<Scalar>());
  rig.pressure_window = j.value("pressure_window", 64);
  for (size_t a = 0; a < rig.acoustic.size(); ++a)
    for (size_t b = a + 1; b < rig.acoustic.size(); ++b)
      if (rig.acoustic[a].index == rig.acoustic[b].index)
        throw std::runtime_error("duplicate acoustic sensor index in rig config");
  return rig;
}

void save_rig(const RigModel& rig, const std::string& path) {
  json j;
  j["camera"] = {{"focal_px", rig.camera.focal}, {"c_u", rig.camera.c_u},
                 {"c_v", rig.camera.c_v},        {"width", rig.camera.width},
                 {"height", rig.camera.height}};
  j["acoustic"] = json::array();
  for (const auto& s : rig.acoustic) {
    j["acoustic"].push_back({{"index", s.index},
                             {"t_u_cm", s.t_u},
                             {"t_v_cm", s.t_v},
                             {"cone_half_angle_rad", s.cone_half_angle},
                             {"min_range_cm", s.min_range},
                             {"max_range_cm", s.max_range}});
  }
  j["pressure_offsets_x_cm"] = rig.pressure_offsets_x;
  j["pressure_window"] = rig.pressure_window;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write rig config: " + path);
  out << j.dump(2) << "\n";
}

std::optional<ImageBounds> project_cone(Scalar r_a, const AcousticSensorModel& sensor,
                                        const CameraModel& cam) {
  if (r_a < sensor.min_range || r_a > sensor.max_range)
    throw GeometryError("range " + std::to_string(r_a) + " cm outside sensor [" +
                        std::to_string(sensor.min_range) + ", " +
                        std::to_string(sensor.max_range) + "]");
  const Scalar half = cam.focal * std::tan(sensor.cone_half_angle);
  const Scalar u_c = cam.c_u + cam.focal * sensor.t_u / r_a;
  const Scalar v_c = cam.c_v + cam.focal * sensor.t_v / r_a;
  ImageBounds b;
  b.u_l = u_c - half;
  b.u_u = u_c + half;
  b.v_l = v_c - half;
  b.v_u = v_c + half;
  if (b.u_u <= 0.0 || b.u_l >= cam.width || b.v_u <= 0.0 || b.v_l >= cam.height)
    return std::nullopt;
  b.u_l = std::clamp(b.u_l, 0.0, static_cast<Scalar>(cam.width));
  b.u_u = std::clamp(b.u_u, 0.0, static_cast<Scalar>(cam.width));
  b.v_l = std::clamp(b.v_l, 0.0, static_cast<Scalar>(cam.height));
  b.v_u = std::clamp(b.v_u, 0.0, static_cast<Scalar>(cam.height));
  return b;
}

bool in_reception_field(const CaseTriplet& c, const AcousticSensorModel& sensor,
                        Scalar rig_x, Scalar rig_y) {
  // Sensor sits at its lateral offset; boresight points along +y.
  const Scalar dx = c.p_x - (rig_x + sensor.t_u);
  const Scalar dy = c.p_y - rig_y;
  const Scalar dist = std::hypot(dx, dy);
  if (dy <= 0.0) return false;  // behind the module face
  if (dist < sensor.min_range || dist > sensor.max_range) return false;
  const Scalar angle = std::atan2(std::abs(dx), dy);
  return angle <= sensor.cone_half_angle;
}

}  // namespace trifusion
