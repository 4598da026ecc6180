#include "handforge/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace handforge {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

// Twice the signed area of (a, b, p).
inline Scalar edge_function(Scalar ax, Scalar ay, Scalar bx, Scalar by, Scalar px,
                            Scalar py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

}  // namespace

Texture Texture::constant(Eigen::Index vertex_count, const Vec3& rgb) {
  Texture t;
  t.per_vertex_rgb.resize(vertex_count, 3);
  t.per_vertex_rgb.rowwise() = rgb.transpose();
  return t;
}

void Texture::validate() const {
  if (per_vertex_rgb.size() == 0) throw std::invalid_argument("texture is empty");
  if (!per_vertex_rgb.allFinite() || per_vertex_rgb.minCoeff() < 0.0 ||
      per_vertex_rgb.maxCoeff() > 1.0) {
    throw std::invalid_argument("texture albedo must lie in [0, 1]");
  }
}

Lighting Lighting::ambient(Scalar intensity) {
  Lighting l;
  l.sh_coeffs.row(0).setConstant(intensity / 0.282095);
  return l;
}

VecX Lighting::to_vector() const {
  VecX v(27);
  for (int k = 0; k < 9; ++k) {
    for (int c = 0; c < 3; ++c) v[3 * k + c] = sh_coeffs(k, c);
  }
  return v;
}

Lighting Lighting::from_vector(const Eigen::Ref<const VecX>& v) {
  if (v.size() != 27) throw std::invalid_argument("lighting vector must have 27 entries");
  Lighting l;
  for (int k = 0; k < 9; ++k) {
    for (int c = 0; c < 3; ++c) l.sh_coeffs(k, c) = v[3 * k + c];
  }
  return l;
}

void Lighting::validate() const {
  if (!sh_coeffs.allFinite()) {
    throw std::invalid_argument("lighting coefficients must be finite");
  }
}

PointCloud vertex_normals(const Eigen::Ref<const PointCloud>& vertices,
                          const Triangles& faces) {
  PointCloud normals = PointCloud::Zero(vertices.rows(), 3);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const Vec3 a = vertices.row(faces(f, 0)).transpose();
    const Vec3 b = vertices.row(faces(f, 1)).transpose();
    const Vec3 c = vertices.row(faces(f, 2)).transpose();
    const Vec3 weighted = (b - a).cross(c - a);  // length = 2 * face area
    normals.row(faces(f, 0)) += weighted.transpose();
    normals.row(faces(f, 1)) += weighted.transpose();
    normals.row(faces(f, 2)) += weighted.transpose();
  }
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const Scalar len = normals.row(i).norm();
    if (len < 1e-14) {
      normals.row(i) = Vec3(0, 0, 1).transpose();
    } else {
      normals.row(i) /= len;
    }
  }
  return normals;
}

Eigen::Matrix<Scalar, 9, 1> sh_basis(const Vec3& n) {
  Eigen::Matrix<Scalar, 9, 1> h;
  const Scalar x = n.x(), y = n.y(), z = n.z();
  h[0] = 0.282095;
  h[1] = 0.488603 * y;
  h[2] = 0.488603 * z;
  h[3] = 0.488603 * x;
  h[4] = 1.092548 * x * y;
  h[5] = 1.092548 * y * z;
  h[6] = 0.315392 * (3.0 * z * z - 1.0);
  h[7] = 1.092548 * x * z;
  h[8] = 0.546274 * (x * x - y * y);
  return h;
}

PointCloud shade_vertices_unclamped(const Texture& texture, const Lighting& lighting,
                                    const Eigen::Ref<const PointCloud>& normals) {
  if (texture.per_vertex_rgb.rows() != normals.rows()) {
    throw std::invalid_argument("texture/normal count mismatch");
  }
  PointCloud colors(normals.rows(), 3);
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const Eigen::Matrix<Scalar, 9, 1> h = sh_basis(normals.row(i).transpose());
    for (int c = 0; c < 3; ++c) {
      colors(i, c) = texture.per_vertex_rgb(i, c) * lighting.sh_coeffs.col(c).dot(h);
    }
  }
  return colors;
}

PointCloud shade_vertices(const Texture& texture, const Lighting& lighting,
                          const Eigen::Ref<const PointCloud>& normals) {
  PointCloud colors = shade_vertices_unclamped(texture, lighting, normals);
  return colors.cwiseMax(0.0).cwiseMin(1.0);
}

RenderOutput rasterize_with_coverage(const Eigen::Ref<const PointCloud>& vertices,
                                     const Triangles& faces,
                                     const Eigen::Ref<const PointCloud>& colors,
                                     const CameraIntrinsics& camera,
                                     RasterCoverage* coverage) {
  camera.validate();
  if (colors.rows() != vertices.rows()) {
    throw std::invalid_argument("color/vertex count mismatch");
  }
  const int w = camera.width, h = camera.height;

  RenderOutput out;
  out.rgb = ImageRGB::zeros(w, h);
  out.silhouette = MaskImage::Zero(h, w);
  out.depth = Grid::Constant(h, w, kInf);
  if (coverage) {
    coverage->face_index = Eigen::MatrixXi::Constant(h, w, -1);
    coverage->bary0 = Grid::Zero(h, w);
    coverage->bary1 = Grid::Zero(h, w);
    coverage->bary2 = Grid::Zero(h, w);
  }

  const Eigen::Index v_count = vertices.rows();
  PointCloud2 uv(v_count, 2);
  std::vector<char> in_front(v_count);
  for (Eigen::Index i = 0; i < v_count; ++i) {
    const Scalar z = vertices(i, 2);
    in_front[i] = z > kMinDepth;
    if (in_front[i]) {
      uv(i, 0) = camera.fx * vertices(i, 0) / z + camera.cx;
      uv(i, 1) = camera.fy * vertices(i, 1) / z + camera.cy;
    }
  }

  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const int i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
    if (!in_front[i0] || !in_front[i1] || !in_front[i2]) continue;
    const Scalar x0 = uv(i0, 0), y0 = uv(i0, 1);
    const Scalar x1 = uv(i1, 0), y1 = uv(i1, 1);
    const Scalar x2 = uv(i2, 0), y2 = uv(i2, 1);

    const Scalar area = edge_function(x0, y0, x1, y1, x2, y2);
    if (area == 0.0) continue;

    const int px0 = std::max(0, static_cast<int>(std::floor(std::min({x0, x1, x2}) - 0.5)));
    const int px1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({x0, x1, x2}))));
    const int py0 = std::max(0, static_cast<int>(std::floor(std::min({y0, y1, y2}) - 0.5)));
    const int py1 = std::min(h - 1, static_cast<int>(std::ceil(std::max({y0, y1, y2}))));
    if (px0 > px1 || py0 > py1) continue;

    const Scalar z0 = vertices(i0, 2), z1 = vertices(i1, 2), z2 = vertices(i2, 2);
    for (int py = py0; py <= py1; ++py) {
      const Scalar sy = py + 0.5;
      for (int px = px0; px <= px1; ++px) {
        const Scalar sx = px + 0.5;
        const Scalar w0 = edge_function(x1, y1, x2, y2, sx, sy);
        const Scalar w1 = edge_function(x2, y2, x0, y0, sx, sy);
        const Scalar w2 = edge_function(x0, y0, x1, y1, sx, sy);
        const bool inside = (w0 >= 0 && w1 >= 0 && w2 >= 0) ||
                            (w0 <= 0 && w1 <= 0 && w2 <= 0);
        if (!inside) continue;

        const Scalar l0 = w0 / area, l1 = w1 / area, l2 = w2 / area;
        const Scalar inv_z = l0 / z0 + l1 / z1 + l2 / z2;
        const Scalar z = 1.0 / inv_z;
        if (!(z < out.depth(py, px))) continue;

        const Scalar b0 = (l0 / z0) / inv_z;
        const Scalar b1 = (l1 / z1) / inv_z;
        const Scalar b2 = (l2 / z2) / inv_z;
        out.depth(py, px) = z;
        out.silhouette(py, px) = 1;
        out.rgb.r(py, px) = b0 * colors(i0, 0) + b1 * colors(i1, 0) + b2 * colors(i2, 0);
        out.rgb.g(py, px) = b0 * colors(i0, 1) + b1 * colors(i1, 1) + b2 * colors(i2, 1);
        out.rgb.b(py, px) = b0 * colors(i0, 2) + b1 * colors(i1, 2) + b2 * colors(i2, 2);
        if (coverage) {
          coverage->face_index(py, px) = static_cast<int>(f);
          coverage->bary0(py, px) = b0;
          coverage->bary1(py, px) = b1;
          coverage->bary2(py, px) = b2;
        }
      }
    }
  }
  return out;
}

RenderOutput rasterize(const Eigen::Ref<const PointCloud>& vertices, const Triangles& faces,
                       const Eigen::Ref<const PointCloud>& colors,
                       const CameraIntrinsics& camera) {
  return rasterize_with_coverage(vertices, faces, colors, camera, nullptr);
}

Scalar photometric_loss(const RenderOutput& rendered, const ImageRGB& target_rgb,
                        const MaskImage& skin_mask) {
  const int w = rendered.rgb.width(), h = rendered.rgb.height();
  if (target_rgb.width() != w || target_rgb.height() != h ||
      skin_mask.cols() != w || skin_mask.rows() != h) {
    throw std::invalid_argument("photometric loss image shape mismatch");
  }
  Scalar sum = 0.0;
  long count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!rendered.silhouette(y, x) || !skin_mask(y, x)) continue;
      const Scalar dr = rendered.rgb.r(y, x) - target_rgb.r(y, x);
      const Scalar dg = rendered.rgb.g(y, x) - target_rgb.g(y, x);
      const Scalar db = rendered.rgb.b(y, x) - target_rgb.b(y, x);
      sum += std::sqrt(dr * dr + dg * dg + db * db);
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

Scalar psnr(const ImageRGB& a, const ImageRGB& b, const MaskImage& mask) {
  const int w = a.width(), h = a.height();
  if (b.width() != w || b.height() != h || mask.cols() != w || mask.rows() != h) {
    throw std::invalid_argument("psnr image shape mismatch");
  }
  Scalar sum_sq = 0.0;
  long count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      const Scalar dr = a.r(y, x) - b.r(y, x);
      const Scalar dg = a.g(y, x) - b.g(y, x);
      const Scalar db = a.b(y, x) - b.b(y, x);
      sum_sq += dr * dr + dg * dg + db * db;
      ++count;
    }
  }
  if (count == 0) return kInf;
  const Scalar mse = sum_sq / (3.0 * count);
  if (mse == 0.0) return kInf;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace handforge
