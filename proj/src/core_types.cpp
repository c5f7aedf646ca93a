#include "trifusion/core_types.hpp"

#include <cmath>
#include <sstream>

#include "trifusion/rig_geometry.hpp"

namespace trifusion {

std::optional<Direction> direction_from_char(char c) {
  switch (c) {
    case 'L': return Direction::L;
    case 'S': return Direction::S;
    case 'R': return Direction::R;
    default: return std::nullopt;
  }
}

namespace {

// Trims trailing zeros so grid coordinates like 40.0 print as "40".
std::string format_cm(Scalar v) {
  std::ostringstream os;
  os << v;
  std::string s = os.str();
  for (char& ch : s) {
    if (ch == '.') ch = 'p';  // filesystem-safe for fractional grids
    if (ch == '-') ch = 'm';
  }
  return s;
}

}  // namespace

std::string make_case_id(const CaseTriplet& c) {
  std::string id = "px" + format_cm(c.p_x) + "_py" + format_cm(c.p_y) + "_";
  id += direction_char(c.d);
  return id;
}

std::optional<CaseTriplet> parse_case_id(const std::string& id) {
  if (id.size() < 8 || id.substr(0, 2) != "px") return std::nullopt;
  auto py_pos = id.find("_py");
  auto dir_pos = id.rfind('_');
  if (py_pos == std::string::npos || dir_pos == std::string::npos || dir_pos <= py_pos)
    return std::nullopt;
  auto parse_num = [](std::string s) -> std::optional<Scalar> {
    for (char& ch : s) {
      if (ch == 'p') ch = '.';
      if (ch == 'm') ch = '-';
    }
    try {
      size_t used = 0;
      Scalar v = std::stod(s, &used);
      if (used != s.size()) return std::nullopt;
      return v;
    } catch (...) {
      return std::nullopt;
    }
  };
  auto x = parse_num(id.substr(2, py_pos - 2));
  auto y = parse_num(id.substr(py_pos + 3, dir_pos - (py_pos + 3)));
  if (!x || !y || dir_pos + 2 != id.size()) return std::nullopt;
  auto d = direction_from_char(id[dir_pos + 1]);
  if (!d) return std::nullopt;
  return CaseTriplet{*x, *y, *d};
}

std::vector<std::string> validate_frame(const SensorFrame& frame, const RigModel& rig) {
  std::vector<std::string> violations;
  const auto& img = frame.image;
  if (img.channels != 3)
    violations.push_back("image channel count " + std::to_string(img.channels) + " != 3");
  if (img.data.size() != static_cast<Eigen::Index>(img.channels) * img.height * img.width)
    violations.push_back("image buffer size mismatch");
  if (img.data.size() > 0) {
    Scalar lo = img.data.minCoeff(), hi = img.data.maxCoeff();
    if (lo < 0.0 || hi > 1.0) violations.push_back("image range");
    if (!img.data.isFinite().all()) violations.push_back("image non-finite values");
  }
  if (frame.acoustic.size() != rig.num_acoustic())
    violations.push_back("acoustic sensor count " + std::to_string(frame.acoustic.size()) +
                         " != " + std::to_string(rig.num_acoustic()));
  for (Eigen::Index i = 0; i < frame.acoustic.size(); ++i) {
    Scalar r = frame.acoustic[i];
    if (!(r > 0.0) && r != kNoEcho)
      violations.push_back("acoustic reading " + std::to_string(i) +
                           " neither positive nor no-echo sentinel");
  }
  if (frame.pressure_present) {
    if (frame.pressure.rows() != rig.num_pressure())
      violations.push_back("pressure channel count " + std::to_string(frame.pressure.rows()) +
                           " != " + std::to_string(rig.num_pressure()));
    if (frame.pressure.cols() != rig.pressure_window)
      violations.push_back("pressure window length " + std::to_string(frame.pressure.cols()) +
                           " != " + std::to_string(rig.pressure_window));
    if (frame.pressure.size() > 0 && !frame.pressure.array().isFinite().all())
      violations.push_back("pressure non-finite values");
  } else if (frame.pressure.size() != 0) {
    violations.push_back("pressure data present but flagged absent");
  }
  const auto& c = frame.case_triplet;
  if (c.p_x < 0.0 || c.p_x > 200.0) violations.push_back("case p_x out of [0,200]");
  if (c.p_y < 0.0 || c.p_y > 400.0) violations.push_back("case p_y out of [0,400]");
  return violations;
}

}  // namespace trifusion
