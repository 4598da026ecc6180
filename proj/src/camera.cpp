#include "handforge/camera.hpp"

#include <cmath>

namespace handforge {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("camera image dimensions must be positive");
  }
  if (cx < 0.0 || cx > width || cy < 0.0 || cy > height) {
    throw std::invalid_argument("camera principal point outside the image");
  }
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw std::invalid_argument("camera intrinsics must be finite");
  }
}

PointCloud2 project(const Eigen::Ref<const PointCloud>& points,
                    const CameraIntrinsics& camera) {
  PointCloud2 out(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Scalar z = points(i, 2);
    if (!(z > kMinDepth)) throw BehindCameraError(i, z);
    out(i, 0) = camera.fx * points(i, 0) / z + camera.cx;
    out(i, 1) = camera.fy * points(i, 1) / z + camera.cy;
  }
  return out;
}

Vec2 project_point(const Vec3& point, const CameraIntrinsics& camera) {
  const Scalar z = point.z();
  if (!(z > kMinDepth)) throw BehindCameraError(0, z);
  return Vec2(camera.fx * point.x() / z + camera.cx,
              camera.fy * point.y() / z + camera.cy);
}

Vec3 backproject_ray(const Vec2& pixel, Scalar depth, const CameraIntrinsics& camera) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw std::invalid_argument("backproject_ray requires a positive depth");
  }
  return Vec3((pixel.x() - camera.cx) / camera.fx * depth,
              (pixel.y() - camera.cy) / camera.fy * depth, depth);
}

}  // namespace handforge
