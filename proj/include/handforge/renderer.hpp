#pragma once

#include "handforge/camera.hpp"
#include "handforge/image.hpp"
#include "handforge/types.hpp"

namespace handforge {

/// Per-vertex linear-light albedo.
struct Texture {
  PointCloud per_vertex_rgb;  // V x 3 in [0, 1]

  static Texture constant(Eigen::Index vertex_count, const Vec3& rgb);
  void validate() const;
};

/// Second-order spherical-harmonics environment: 9 coefficients per color
/// channel, 27 values total.
struct Lighting {
  Eigen::Matrix<Scalar, 9, 3> sh_coeffs = Eigen::Matrix<Scalar, 9, 3>::Zero();

  /// Constant white light of the given intensity (shade factor == intensity).
  static Lighting ambient(Scalar intensity = 1.0);

  VecX to_vector() const;  // 27, basis-major
  static Lighting from_vector(const Eigen::Ref<const VecX>& v);
  void validate() const;
};

struct RenderOutput {
  ImageRGB rgb;
  MaskImage silhouette;  // 1 exactly where depth is finite
  Grid depth;            // meters, +inf where empty
};

/// Raster coverage of one fixed geometry: face index and perspective-correct
/// barycentric weights per pixel. Enables relighting without re-rasterizing.
struct RasterCoverage {
  Eigen::MatrixXi face_index;  // -1 where empty
  Grid bary0, bary1, bary2;
};

/// Area-weighted vertex normals; vertices with only degenerate incident
/// faces get +z.
PointCloud vertex_normals(const Eigen::Ref<const PointCloud>& vertices,
                          const Triangles& faces);

/// Real SH basis through band 2 evaluated at a unit direction:
/// [1, y, z, x, xy, yz, 3z^2-1, xz, x^2-y^2] with the standard constants.
Eigen::Matrix<Scalar, 9, 1> sh_basis(const Vec3& n);

/// Per-vertex Gouraud shading: albedo * (SH factor), before clamping.
PointCloud shade_vertices_unclamped(const Texture& texture, const Lighting& lighting,
                                    const Eigen::Ref<const PointCloud>& normals);

/// Same, clamped to [0, 1].
PointCloud shade_vertices(const Texture& texture, const Lighting& lighting,
                          const Eigen::Ref<const PointCloud>& normals);

/// Perspective z-buffer rasterization with perspective-correct color
/// interpolation. No back-face culling; triangles touching the camera plane
/// are skipped, so fully off-screen meshes yield an empty output.
RenderOutput rasterize(const Eigen::Ref<const PointCloud>& vertices, const Triangles& faces,
                       const Eigen::Ref<const PointCloud>& colors,
                       const CameraIntrinsics& camera);

/// rasterize plus the coverage buffer.
RenderOutput rasterize_with_coverage(const Eigen::Ref<const PointCloud>& vertices,
                                     const Triangles& faces,
                                     const Eigen::Ref<const PointCloud>& colors,
                                     const CameraIntrinsics& camera,
                                     RasterCoverage* coverage);

/// Mean per-pixel color distance over silhouette * skin_mask; 0 when the
/// effective mask is empty.
Scalar photometric_loss(const RenderOutput& rendered, const ImageRGB& target_rgb,
                        const MaskImage& skin_mask);

/// 10 log10(1 / MSE) over the masked pixels, images in [0, 1]. Identical
/// images (or an empty mask) report +inf.
Scalar psnr(const ImageRGB& a, const ImageRGB& b, const MaskImage& mask);

}  // namespace handforge
