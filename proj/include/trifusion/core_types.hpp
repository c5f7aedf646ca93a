#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace trifusion {

using Scalar = double;
using VecX = Eigen::VectorXd;
using ArrX = Eigen::ArrayXd;

/// Heading of the leader vehicle: turn left, move straight, turn right.
enum class Direction : std::uint8_t { L, S, R };

inline char direction_char(Direction d) {
  switch (d) {
    case Direction::L: return 'L';
    case Direction::S: return 'S';
    default: return 'R';
  }
}

std::optional<Direction> direction_from_char(char c);

/// Target state in the pool frame: position (cm) plus heading.
struct LeaderState {
  Scalar p_x = 0.0;  // cm, [0, 200]
  Scalar p_y = 0.0;  // cm, [0, 400]
  Direction d = Direction::S;
};

/// State mapped to the unit cube. Ground truth uses d_n in {0, 0.5, 1};
/// raw predictions are stored unclamped.
struct NormalizedState {
  Scalar p_xn = 0.0;
  Scalar p_yn = 0.0;
  Scalar d_n = 0.0;
};

/// One sampled (location, orientation) combination.
struct CaseTriplet {
  Scalar p_x = 0.0;  // cm
  Scalar p_y = 0.0;  // cm
  Direction d = Direction::S;
};

/// Deterministic, filesystem-safe case identifier "px<p_x>_py<p_y>_<d>".
std::string make_case_id(const CaseTriplet& c);

/// Parses an identifier produced by make_case_id.
std::optional<CaseTriplet> parse_case_id(const std::string& id);

/// Acoustic reading meaning "no echo received".
inline constexpr Scalar kNoEcho = -1.0;

/// Planar image tensor, channel-major [C x H x W], row-major within a channel.
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  ArrX data;  // size channels*height*width

  Image() = default;
  Image(int c, int h, int w) : channels(c), height(h), width(w) {
    data = ArrX::Zero(static_cast<Eigen::Index>(c) * h * w);
  }
  Scalar& at(int c, int y, int x) {
    return data[(static_cast<Eigen::Index>(c) * height + y) * width + x];
  }
  Scalar at(int c, int y, int x) const {
    return data[(static_cast<Eigen::Index>(c) * height + y) * width + x];
  }
  Eigen::Index size() const { return data.size(); }
};

/// One synchronized multi-modal sample.
struct SensorFrame {
  Image image;                 // [3 x H x W], values in [0,1]
  VecX acoustic;               // length P, cm; kNoEcho when no echo
  bool pressure_present = false;
  Eigen::MatrixXd pressure;    // [Q x T] relative pressures, Pa (rows = sensors)
  CaseTriplet case_triplet;
  Scalar timestamp = 0.0;      // s
};

struct RigModel;  // rig_geometry.hpp

/// Checks every frame invariant; violations are returned as data.
std::vector<std::string> validate_frame(const SensorFrame& frame, const RigModel& rig);

}  // namespace trifusion
