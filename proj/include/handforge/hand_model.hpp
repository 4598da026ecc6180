#pragma once

#include <array>

#include "handforge/types.hpp"

namespace handforge {

/// Parametric hand rig: template mesh, blend-shape bases, joint regressor,
/// skinning weights and the kinematic tree.
///
/// Conventions (fixed across all rigs handled by this library):
///  - 778 vertices for MANO-compatible rigs (the library itself only requires
///    dimensional consistency between the fields),
///  - 16 bones: bone 0 is the root (wrist), bones 1+3f+p are phalanx p of
///    finger f (0 = proximal, 1 = middle, 2 = distal),
///  - 21 regressed keypoints: 0 is the wrist, keypoints 1+4f..4+4f are the
///    mcp/pip/dip/tip chain of finger f,
///  - units are meters; a right-hand rig rests with fingers along +y and the
///    palm facing +z, so positive x-rotation of a finger joint is flexion.
struct HandRig {
  PointCloud template_vertices;   // V x 3
  Triangles faces;                // F x 3, outward winding
  MatX shape_basis;               // 3V x 10, column n = row-major flattened S_n
  MatX pose_basis;                // 3V x 135, column per pose feature
  MatX joint_regressor;           // 21 x V, row-stochastic, non-negative
  MatX skinning_weights;          // V x 16, rows sum to 1
  Eigen::VectorXi kinematic_tree; // parent per bone, root = -1
  VecX mean_pose;                 // 48
  HandType hand_type = HandType::kRight;

  Eigen::Index vertex_count() const { return template_vertices.rows(); }
  Eigen::Index face_count() const { return faces.rows(); }
  Eigen::Index bone_count() const { return kinematic_tree.size(); }

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

/// 61-dim hand state: 10 shape coefficients, 48 axis-angle pose values
/// (3 global rotation + 45 articulation) and a 3-vector camera-frame
/// translation in meters.
struct HandParams {
  VecX shape = VecX::Zero(kNumShape);
  VecX pose = VecX::Zero(kNumPose);
  Vec3 translation = Vec3::Zero();

  VecX to_vector() const;
  static HandParams from_vector(const Eigen::Ref<const VecX>& v);

  /// Throws std::invalid_argument on wrong dimensions or non-finite entries.
  void validate() const;
};

/// Keypoint index that bone k pivots at (root -> wrist, phalanges -> their
/// proximal joint).
int bone_keypoint_index(int bone);

/// Axis-angle to rotation matrix. The zero vector maps to identity.
Mat3 rodrigues(const Vec3& axis_angle);

/// Flattened (R_j - I) features of the 15 articulation joints, 135 values,
/// row-major 3x3 blocks in joint order.
VecX pose_features(const Eigen::Ref<const VecX>& pose);

/// Rest-pose vertices: template + shape displacements + pose-feature
/// displacements relative to the mean pose.
PointCloud blend_shape(const HandRig& rig, const HandParams& params);

struct LbsOutput {
  PointCloud vertices;  // V x 3, camera frame
  PointCloud joints;    // 21 x 3, camera frame
};

/// Full forward model: blend shapes, linear blend skinning through the
/// kinematic chain, then the global rotation (about the origin) and
/// translation. Output joints are regressed from the posed vertices.
LbsOutput lbs_forward(const HandRig& rig, const HandParams& params);

/// Reflection of the rig across the x = 0 plane: template and basis x
/// components negate, pose-feature columns pick up the reflection sign,
/// face winding flips, the mean pose mirrors and the hand type toggles.
HandRig mirror_rig(const HandRig& rig);

/// Per-joint axis-angle map matching mirror_rig: (ax, ay, az) -> (ax, -ay, -az).
VecX mirror_pose(const Eigen::Ref<const VecX>& pose);

/// Mirrors pose and negates the x translation; shape is chirality-free.
HandParams mirror_params(const HandParams& params);

/// Procedurally generated MANO-shaped test rig (V = 778, 16 bones,
/// 21 regressed keypoints). Deterministic; carries no licensed data.
HandRig make_test_rig(HandType hand_type = HandType::kRight);

}  // namespace handforge
