#include "handforge/losses.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace handforge {

namespace {
constexpr Scalar kNan = std::numeric_limits<Scalar>::quiet_NaN();
constexpr Scalar kMinEdgeLen = 1e-6;
}  // namespace

Keypoints2D Keypoints2D::all_visible(const Eigen::Ref<const PointCloud2>& points) {
  if (points.rows() != kNumKeypoints) {
    throw std::invalid_argument("keypoint sets carry 21 points");
  }
  Keypoints2D kp;
  kp.px = points;
  kp.visible.fill(true);
  return kp;
}

void Keypoints2D::set_invisible(int j) {
  visible[j] = false;
  px(j, 0) = kNan;
  px(j, 1) = kNan;
}

int Keypoints2D::count_visible() const {
  return static_cast<int>(std::count(visible.begin(), visible.end(), true));
}

BoneTopology BoneTopology::hand21() {
  BoneTopology topo;
  int e = 0;
  for (int f = 0; f < 5; ++f) {
    topo.edges[e++] = {0, 1 + 4 * f};
    topo.edges[e++] = {1 + 4 * f, 2 + 4 * f};
    topo.edges[e++] = {2 + 4 * f, 3 + 4 * f};
    topo.edges[e++] = {3 + 4 * f, 4 + 4 * f};
  }
  return topo;
}

void BoneTopology::validate() const {
  std::array<int, kNumKeypoints> degree{};
  for (const auto& e : edges) {
    if (e[0] < 0 || e[0] >= kNumKeypoints || e[1] < 0 || e[1] >= kNumKeypoints ||
        e[0] == e[1]) {
      throw std::invalid_argument("bone topology edge out of range");
    }
    ++degree[e[0]];
    ++degree[e[1]];
  }
  // 20 edges over 21 keypoints form a tree iff every keypoint is touched.
  for (int j = 0; j < kNumKeypoints; ++j) {
    if (degree[j] == 0) {
      throw std::invalid_argument("bone topology leaves keypoint " +
                                  std::to_string(j) + " unconnected");
    }
  }
}

EdgeVectors bone_edges(const Keypoints2D& kp, const BoneTopology& topo) {
  topo.validate();
  EdgeVectors out;
  for (int e = 0; e < kNumBoneEdges; ++e) {
    const int parent = topo.edges[e][0];
    const int child = topo.edges[e][1];
    if (!kp.visible[parent] || !kp.visible[child]) {
      out.valid[e] = false;
      out.dir.row(e) = Vec2(kNan, kNan).transpose();
      continue;
    }
    const Vec2 d = (kp.px.row(child) - kp.px.row(parent)).transpose();
    const Scalar len = d.norm();
    if (len < kMinEdgeLen) {
      out.valid[e] = false;
      out.dir.row(e) = Vec2(kNan, kNan).transpose();
      continue;
    }
    out.valid[e] = true;
    out.dir.row(e) = (d / len).transpose();
  }
  return out;
}

Scalar reprojection_loss(const std::vector<Keypoints2D>& pred,
                         const std::vector<Keypoints2D>& gt,
                         const BoneTopology& topo, LossAudit* audit) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("reprojection loss hand count mismatch");
  }
  if (pred.empty()) return 0.0;

  Scalar joint_sum = 0.0, edge_sum = 0.0;
  long joint_count = 0, edge_count = 0;
  for (size_t n = 0; n < pred.size(); ++n) {
    if (!gt[n].visible[kMiddleMcp] || !gt[n].visible[kMiddlePip]) {
      throw DegenerateScaleError(static_cast<int>(n));
    }
    const Scalar scale = (gt[n].px.row(kMiddlePip) - gt[n].px.row(kMiddleMcp)).norm();
    if (scale <= 1e-3) throw DegenerateScaleError(static_cast<int>(n));

    for (int j = 0; j < kNumKeypoints; ++j) {
      if (!pred[n].visible[j] || !gt[n].visible[j]) continue;
      joint_sum += (pred[n].px.row(j) - gt[n].px.row(j)).norm() / scale;
      ++joint_count;
      if (audit) audit->joint_terms.push_back({static_cast<int>(n), j});
    }

    const EdgeVectors pe = bone_edges(pred[n], topo);
    const EdgeVectors ge = bone_edges(gt[n], topo);
    for (int e = 0; e < kNumBoneEdges; ++e) {
      if (!pe.valid[e] || !ge.valid[e]) continue;
      edge_sum += (pe.dir.row(e) - ge.dir.row(e)).norm();
      ++edge_count;
      if (audit) audit->edge_terms.push_back({static_cast<int>(n), e});
    }
  }
  const Scalar joint_term = joint_count > 0 ? joint_sum / joint_count : 0.0;
  const Scalar edge_term = edge_count > 0 ? edge_sum / edge_count : 0.0;
  return joint_term + edge_term;
}

AngleLimits AngleLimits::defaults() {
  AngleLimits limits;
  for (int j = 0; j < kNumArticulated; ++j) {
    limits.bounds(3 * j + 0, 0) = -0.3;  // flexion
    limits.bounds(3 * j + 0, 1) = 1.6;
    limits.bounds(3 * j + 1, 0) = -0.5;  // twist
    limits.bounds(3 * j + 1, 1) = 0.5;
    limits.bounds(3 * j + 2, 0) = -0.5;  // abduction
    limits.bounds(3 * j + 2, 1) = 0.5;
  }
  return limits;
}

void AngleLimits::validate() const {
  if (!bounds.allFinite()) {
    throw std::invalid_argument("angle limits must be finite");
  }
  for (int d = 0; d < 45; ++d) {
    if (bounds(d, 0) > bounds(d, 1)) {
      throw std::invalid_argument("angle limit interval " + std::to_string(d) +
                                  " is inverted");
    }
  }
}

Scalar regularization_loss(const HandParams& params, const AngleLimits& limits,
                           Scalar w_pose, Scalar w_shape) {
  params.validate();
  limits.validate();
  Scalar excess = 0.0;
  for (int d = 0; d < 45; ++d) {
    const Scalar theta = params.pose[3 + d];
    excess += std::max(0.0, theta - limits.bounds(d, 1));
    excess += std::max(0.0, limits.bounds(d, 0) - theta);
  }
  return w_pose * excess + w_shape * params.shape.norm();
}

Scalar consistency_loss(const std::vector<Keypoints2D>& local_kp,
                        const std::vector<Keypoints2D>& reprojected_kp,
                        LossAudit* audit) {
  if (local_kp.size() != reprojected_kp.size()) {
    throw std::invalid_argument("consistency loss hand count mismatch");
  }
  if (local_kp.empty()) return 0.0;
  Scalar sum = 0.0;
  long count = 0;
  for (size_t n = 0; n < local_kp.size(); ++n) {
    for (int j = 0; j < kNumKeypoints; ++j) {
      if (!local_kp[n].visible[j] || !reprojected_kp[n].visible[j]) continue;
      sum += (local_kp[n].px.row(j) - reprojected_kp[n].px.row(j)).norm();
      ++count;
      if (audit) audit->joint_terms.push_back({static_cast<int>(n), j});
    }
  }
  return count > 0 ? sum / count : 0.0;
}

Scalar joint3d_loss(const Eigen::Ref<const PointCloud>& pred,
                    const Eigen::Ref<const PointCloud>& gt) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) {
    throw std::invalid_argument("joint count mismatch");
  }
  return (pred - gt).rowwise().norm().mean();
}

PointCloud SimilarityTransform::apply(const Eigen::Ref<const PointCloud>& points) const {
  PointCloud out = scale * (points * rotation.transpose());
  out.rowwise() += translation.transpose();
  return out;
}

SimilarityTransform procrustes_fit(const Eigen::Ref<const PointCloud>& from,
                                   const Eigen::Ref<const PointCloud>& to) {
  if (from.rows() != to.rows() || from.rows() < 3) {
    throw AlignmentError("procrustes needs at least 3 matched points");
  }
  const Vec3 mu_from = from.colwise().mean().transpose();
  const Vec3 mu_to = to.colwise().mean().transpose();
  PointCloud a = from;
  a.rowwise() -= mu_from.transpose();
  PointCloud b = to;
  b.rowwise() -= mu_to.transpose();

  const Scalar var_from = a.squaredNorm();
  if (var_from < 1e-18) {
    throw AlignmentError("procrustes source points are coincident");
  }

  const Mat3 cov = b.transpose() * a;
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()[1] < 1e-15 * std::max(svd.singularValues()[0], Scalar(1))) {
    throw AlignmentError("procrustes target configuration is rank deficient");
  }
  Vec3 d = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d[2] = -1.0;

  SimilarityTransform t;
  t.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  t.scale = svd.singularValues().dot(d) / var_from;
  t.translation = mu_to - t.scale * t.rotation * mu_from;
  return t;
}

PointCloud procrustes_align(const Eigen::Ref<const PointCloud>& pred,
                            const Eigen::Ref<const PointCloud>& gt) {
  return procrustes_fit(pred, gt).apply(pred);
}

VecX pck_threshold_grid() {
  VecX grid(kPckThresholds);
  for (int i = 0; i < kPckThresholds; ++i) {
    grid[i] = kPckMaxCm * i / (kPckThresholds - 1);
  }
  return grid;
}

namespace {

// PCK curve and its mean over the threshold grid.
std::pair<VecX, Scalar> pck_curve(const VecX& errors_cm) {
  const VecX grid = pck_threshold_grid();
  VecX pck(kPckThresholds);
  for (int i = 0; i < kPckThresholds; ++i) {
    pck[i] = (errors_cm.array() <= grid[i]).cast<Scalar>().mean();
  }
  return {pck, pck.mean()};
}

// Correspondence-free F-score of aligned vertex sets at a mm threshold.
Scalar f_score(const PointCloud& pred, const PointCloud& gt, Scalar threshold_mm) {
  const Scalar tau = threshold_mm * 1e-3;  // meters
  auto fraction_within = [tau](const PointCloud& a, const PointCloud& b) {
    long hits = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index j = 0; j < b.rows(); ++j) {
        best = std::min(best, (a.row(i) - b.row(j)).squaredNorm());
      }
      if (std::sqrt(best) <= tau) ++hits;
    }
    return static_cast<Scalar>(hits) / a.rows();
  };
  const Scalar precision = fraction_within(pred, gt);
  const Scalar recall = fraction_within(gt, pred);
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

PointCloud align_for_mode(const Eigen::Ref<const PointCloud>& pred,
                          const Eigen::Ref<const PointCloud>& gt, AlignMode mode,
                          const Vec3& pred_root, const Vec3& gt_root) {
  switch (mode) {
    case AlignMode::kProcrustes:
      return procrustes_align(pred, gt);
    case AlignMode::kRootAligned: {
      PointCloud out = pred;
      out.rowwise() += (gt_root - pred_root).transpose();
      return out;
    }
    case AlignMode::kNone:
      return pred;
  }
  throw std::invalid_argument("unknown alignment mode");
}

}  // namespace

MetricReport metrics(const Eigen::Ref<const PointCloud>& pred_vertices,
                     const Eigen::Ref<const PointCloud>& pred_joints,
                     const Eigen::Ref<const PointCloud>& gt_vertices,
                     const Eigen::Ref<const PointCloud>& gt_joints, AlignMode mode,
                     const Keypoints2D* pred_2d, const Keypoints2D* gt_2d) {
  if (pred_joints.rows() != gt_joints.rows() || pred_joints.rows() == 0 ||
      pred_vertices.rows() != gt_vertices.rows()) {
    throw std::invalid_argument("metric input dimension mismatch");
  }

  const Vec3 pred_root = pred_joints.row(0).transpose();
  const Vec3 gt_root = gt_joints.row(0).transpose();

  MetricReport report;
  const PointCloud joints = align_for_mode(pred_joints, gt_joints, mode, pred_root, gt_root);
  const VecX joint_err_cm = (joints - gt_joints).rowwise().norm() * 100.0;
  report.mpjpe_cm = joint_err_cm.mean();
  std::tie(report.pck_joints, report.auc_j) = pck_curve(joint_err_cm);

  if (pred_vertices.rows() > 0) {
    const PointCloud verts =
        align_for_mode(pred_vertices, gt_vertices, mode, pred_root, gt_root);
    const VecX vert_err_cm = (verts - gt_vertices).rowwise().norm() * 100.0;
    report.mpvpe_cm = vert_err_cm.mean();
    std::tie(report.pck_vertices, report.auc_v) = pck_curve(vert_err_cm);
    report.f_at_5mm = f_score(verts, gt_vertices, kFScoreNearMm);
    report.f_at_15mm = f_score(verts, gt_vertices, kFScoreFarMm);
  }

  // EPE: root joint alignment by definition, independent of the mode.
  PointCloud root_aligned = pred_joints;
  root_aligned.rowwise() += (gt_root - pred_root).transpose();
  report.epe_cm = (root_aligned - gt_joints).rowwise().norm().mean() * 100.0;

  if (pred_2d != nullptr && gt_2d != nullptr) {
    Scalar sum = 0.0;
    int count = 0;
    for (int j = 0; j < kNumKeypoints; ++j) {
      if (!pred_2d->visible[j] || !gt_2d->visible[j]) continue;
      sum += (pred_2d->px.row(j) - gt_2d->px.row(j)).norm();
      ++count;
    }
    if (count > 0) report.mpjpe2d_px = sum / count;
  }
  return report;
}

}  // namespace handforge
