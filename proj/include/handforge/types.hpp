#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace handforge {

inline constexpr const char* kVersion = "0.1.0";

using Scalar = double;

using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
using Vec4 = Eigen::Matrix<Scalar, 4, 1>;
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// N x 3 point block, one point per row.
using PointCloud = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
/// N x 2 point block, one point per row.
using PointCloud2 = Eigen::Matrix<Scalar, Eigen::Dynamic, 2, Eigen::RowMajor>;
/// F x 3 triangle vertex indices.
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Single dense grid channel; row = y, col = x.
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
/// Binary image/grid, 0 or 1 per cell; row = y, col = x.
using MaskImage = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int kNumKeypoints = 21;
inline constexpr int kNumShape = 10;
inline constexpr int kNumPose = 48;  // 3 global rotation + 45 articulation
inline constexpr int kNumArticulated = 15;
inline constexpr int kNumBones = 16;  // root + 15 articulated
inline constexpr int kPoseFeatureDim = 9 * kNumArticulated;
inline constexpr int kParamDim = kNumShape + kNumPose + 3;  // 61
inline constexpr int kNumBoneEdges = 20;

enum class HandType : std::uint8_t { kLeft = 0, kRight = 1 };

inline HandType other_hand(HandType t) {
  return t == HandType::kLeft ? HandType::kRight : HandType::kLeft;
}

inline const char* hand_type_name(HandType t) {
  return t == HandType::kLeft ? "left" : "right";
}

/// A projected point sits at or behind the camera plane.
class BehindCameraError : public std::runtime_error {
 public:
  BehindCameraError(Eigen::Index point_index, Scalar z)
      : std::runtime_error("point " + std::to_string(point_index) +
                           " is behind the camera (z = " + std::to_string(z) + ")"),
        point_index(point_index) {}
  Eigen::Index point_index;
};

/// A finite-difference probe produced a non-finite loss value.
class GradientError : public std::runtime_error {
 public:
  explicit GradientError(int coordinate)
      : std::runtime_error("non-finite loss while probing coordinate " +
                           std::to_string(coordinate)),
        coordinate(coordinate) {}
  int coordinate;
};

/// The scale-normalizer bone of a hand is degenerate or unobserved.
class DegenerateScaleError : public std::runtime_error {
 public:
  explicit DegenerateScaleError(int hand_index)
      : std::runtime_error("degenerate scale-normalizer bone for hand " +
                           std::to_string(hand_index)),
        hand_index(hand_index) {}
  int hand_index;
};

/// Point sets too degenerate for a similarity alignment.
class AlignmentError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A mesh cannot be rendered inside the requested frustum.
class RenderError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace handforge
