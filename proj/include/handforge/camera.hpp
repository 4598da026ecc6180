#pragma once

#include "handforge/types.hpp"

namespace handforge {

/// Depth below which a point counts as behind the camera.
inline constexpr Scalar kMinDepth = 1e-4;

/// Pinhole intrinsics shared by every hand in a scene. Image origin is the
/// top-left corner, +u right, +v down; the camera looks along +z.
struct CameraIntrinsics {
  Scalar fx = 512.0;
  Scalar fy = 512.0;
  Scalar cx = 256.0;
  Scalar cy = 256.0;
  int width = 512;
  int height = 512;

  /// f = 512 with the principal point at the image center.
  static CameraIntrinsics multi_hand_default(int width = 512, int height = 512) {
    return CameraIntrinsics{512.0, 512.0, width / 2.0, height / 2.0, width, height};
  }

  void validate() const;
};

/// Perspective projection of camera-frame points to pixels. Throws
/// BehindCameraError (with the offending row) if any z <= kMinDepth. Results
/// are not clipped against the image bounds.
PointCloud2 project(const Eigen::Ref<const PointCloud>& points,
                    const CameraIntrinsics& camera);

Vec2 project_point(const Vec3& point, const CameraIntrinsics& camera);

/// Exact right-inverse of project at the given depth.
Vec3 backproject_ray(const Vec2& pixel, Scalar depth, const CameraIntrinsics& camera);

}  // namespace handforge
