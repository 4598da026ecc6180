#pragma once

#include <array>
#include <optional>
#include <vector>

#include "handforge/hand_model.hpp"
#include "handforge/types.hpp"

namespace handforge {

/// One hand's 2D keypoints with visibility. Invisible entries hold NaN and
/// are excluded from every sum.
struct Keypoints2D {
  PointCloud2 px = PointCloud2::Zero(kNumKeypoints, 2);
  std::array<bool, kNumKeypoints> visible{};

  static Keypoints2D all_visible(const Eigen::Ref<const PointCloud2>& points);

  void set_invisible(int j);
  int count_visible() const;
};

/// 20 ordered (parent, child) keypoint pairs spanning the 21 keypoints.
struct BoneTopology {
  std::array<std::array<int, 2>, kNumBoneEdges> edges{};

  /// Wrist to each mcp, then mcp->pip->dip->tip per finger.
  static BoneTopology hand21();
  void validate() const;
};

/// Keypoint indices of the scale-normalizer bone (middle-finger proximal).
inline constexpr int kMiddleMcp = 9;
inline constexpr int kMiddlePip = 10;

struct EdgeVectors {
  PointCloud2 dir = PointCloud2::Zero(kNumBoneEdges, 2);
  std::array<bool, kNumBoneEdges> valid{};
};

/// Unit bone direction vectors; an edge is invalid if either endpoint is
/// invisible or the bone is shorter than 1e-6 px.
EdgeVectors bone_edges(const Keypoints2D& kp, const BoneTopology& topo);

/// Records which (hand, keypoint) / (hand, edge) terms entered a loss sum.
struct LossAudit {
  std::vector<std::array<int, 2>> joint_terms;
  std::vector<std::array<int, 2>> edge_terms;
};

/// Scale-normalized joint distance plus bone-direction distance, averaged
/// over the visible terms. Per-hand scale is the ground-truth middle-finger
/// proximal bone length in pixels.
Scalar reprojection_loss(const std::vector<Keypoints2D>& pred,
                         const std::vector<Keypoints2D>& gt,
                         const BoneTopology& topo, LossAudit* audit = nullptr);

/// Per-axis articulation angle intervals, 45 rows of [min, max].
struct AngleLimits {
  Eigen::Matrix<Scalar, 45, 2> bounds;

  /// Flexion (x axis) in [-0.3, 1.6] rad, twist/abduction in [-0.5, 0.5].
  static AngleLimits defaults();
  void validate() const;
};

/// w_pose * L1 of the out-of-interval excess over the 45 articulation angles
/// plus w_shape * ||shape||_2. Global rotation and translation are free.
Scalar regularization_loss(const HandParams& params, const AngleLimits& limits,
                           Scalar w_pose, Scalar w_shape);

/// Mean distance between matched keypoint sets over mutually visible points.
Scalar consistency_loss(const std::vector<Keypoints2D>& local_kp,
                        const std::vector<Keypoints2D>& reprojected_kp,
                        LossAudit* audit = nullptr);

/// Mean Euclidean distance over the 21 joints, meters.
Scalar joint3d_loss(const Eigen::Ref<const PointCloud>& pred,
                    const Eigen::Ref<const PointCloud>& gt);

struct SimilarityTransform {
  Scalar scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  PointCloud apply(const Eigen::Ref<const PointCloud>& points) const;
};

/// Least-squares similarity transform mapping `from` onto `to` (SVD solution
/// with reflection guard). Throws AlignmentError on degenerate input.
SimilarityTransform procrustes_fit(const Eigen::Ref<const PointCloud>& from,
                                   const Eigen::Ref<const PointCloud>& to);

/// procrustes_fit applied to pred.
PointCloud procrustes_align(const Eigen::Ref<const PointCloud>& pred,
                            const Eigen::Ref<const PointCloud>& gt);

enum class AlignMode { kProcrustes, kRootAligned, kNone };

inline constexpr int kPckThresholds = 100;
inline constexpr Scalar kPckMaxCm = 5.0;
inline constexpr Scalar kFScoreNearMm = 5.0;
inline constexpr Scalar kFScoreFarMm = 15.0;

struct MetricReport {
  Scalar mpjpe_cm = 0.0;
  Scalar mpvpe_cm = 0.0;
  Scalar auc_j = 0.0;
  Scalar auc_v = 0.0;
  Scalar f_at_5mm = 0.0;
  Scalar f_at_15mm = 0.0;
  Scalar epe_cm = 0.0;          // always root-aligned
  Scalar mpjpe2d_px = std::numeric_limits<Scalar>::quiet_NaN();
  VecX pck_joints = VecX::Zero(kPckThresholds);
  VecX pck_vertices = VecX::Zero(kPckThresholds);
};

/// PCK thresholds in cm: 100 equally spaced samples of [0, 5].
VecX pck_threshold_grid();

/// 3D pose/mesh metrics. Joints and vertices are aligned independently under
/// the requested mode before the error computation; EPE stays root-aligned
/// regardless. 2D error is reported when both 2D sets are given.
MetricReport metrics(const Eigen::Ref<const PointCloud>& pred_vertices,
                     const Eigen::Ref<const PointCloud>& pred_joints,
                     const Eigen::Ref<const PointCloud>& gt_vertices,
                     const Eigen::Ref<const PointCloud>& gt_joints, AlignMode mode,
                     const Keypoints2D* pred_2d = nullptr,
                     const Keypoints2D* gt_2d = nullptr);

}  // namespace handforge
