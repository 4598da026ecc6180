#include "handforge/hand_model.hpp"

#include <cmath>
#include <vector>

namespace handforge {

namespace {

void check_rig_dims(const HandRig& rig) {
  const Eigen::Index v = rig.vertex_count();
  if (rig.shape_basis.rows() != 3 * v || rig.shape_basis.cols() != kNumShape) {
    throw std::invalid_argument("shape_basis must be 3V x 10");
  }
  if (rig.pose_basis.rows() != 3 * v || rig.pose_basis.cols() != kPoseFeatureDim) {
    throw std::invalid_argument("pose_basis must be 3V x 135");
  }
  if (rig.joint_regressor.rows() != kNumKeypoints || rig.joint_regressor.cols() != v) {
    throw std::invalid_argument("joint_regressor must be 21 x V");
  }
  if (rig.skinning_weights.rows() != v || rig.skinning_weights.cols() != kNumBones) {
    throw std::invalid_argument("skinning_weights must be V x 16");
  }
  if (rig.kinematic_tree.size() != kNumBones) {
    throw std::invalid_argument("kinematic_tree must have 16 bones");
  }
  if (rig.mean_pose.size() != kNumPose) {
    throw std::invalid_argument("mean_pose must have 48 entries");
  }
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

void HandRig::validate() const {
  check_rig_dims(*this);
  const Eigen::Index v = vertex_count();
  for (Eigen::Index r = 0; r < joint_regressor.rows(); ++r) {
    if (joint_regressor.row(r).minCoeff() < 0.0) {
      throw std::invalid_argument("joint_regressor row " + std::to_string(r) +
                                  " has negative entries");
    }
    if (std::abs(joint_regressor.row(r).sum() - 1.0) > 1e-6) {
      throw std::invalid_argument("joint_regressor row " + std::to_string(r) +
                                  " does not sum to 1");
    }
  }
  for (Eigen::Index r = 0; r < skinning_weights.rows(); ++r) {
    if (std::abs(skinning_weights.row(r).sum() - 1.0) > 1e-6) {
      throw std::invalid_argument("skinning_weights row " + std::to_string(r) +
                                  " does not sum to 1");
    }
  }
  int roots = 0;
  for (Eigen::Index k = 0; k < kinematic_tree.size(); ++k) {
    if (kinematic_tree[k] < 0) {
      ++roots;
      continue;
    }
    if (kinematic_tree[k] >= kinematic_tree.size()) {
      throw std::invalid_argument("kinematic_tree parent index out of range");
    }
    // cycle check: walking parents must reach the root
    int cursor = static_cast<int>(k);
    int steps = 0;
    while (kinematic_tree[cursor] >= 0) {
      cursor = kinematic_tree[cursor];
      if (++steps > kinematic_tree.size()) {
        throw std::invalid_argument("kinematic_tree contains a cycle");
      }
    }
  }
  if (roots != 1) {
    throw std::invalid_argument("kinematic_tree must have exactly one root");
  }
  if (faces.size() > 0 && (faces.minCoeff() < 0 || faces.maxCoeff() >= v)) {
    throw std::invalid_argument("face indices out of range");
  }
  if (!template_vertices.allFinite() || !shape_basis.allFinite() ||
      !pose_basis.allFinite() || !mean_pose.allFinite()) {
    throw std::invalid_argument("rig contains non-finite values");
  }
}

VecX HandParams::to_vector() const {
  VecX v(kParamDim);
  v.head<kNumShape>() = shape;
  v.segment<kNumPose>(kNumShape) = pose;
  v.tail<3>() = translation;
  return v;
}

HandParams HandParams::from_vector(const Eigen::Ref<const VecX>& v) {
  if (v.size() != kParamDim) {
    throw std::invalid_argument("parameter vector must have 61 entries");
  }
  HandParams p;
  p.shape = v.head<kNumShape>();
  p.pose = v.segment<kNumPose>(kNumShape);
  p.translation = v.tail<3>();
  return p;
}

void HandParams::validate() const {
  if (shape.size() != kNumShape || pose.size() != kNumPose) {
    throw std::invalid_argument("hand parameters have wrong dimensions");
  }
  if (!shape.allFinite() || !pose.allFinite() || !translation.allFinite()) {
    throw std::invalid_argument("hand parameters must be finite");
  }
}

int bone_keypoint_index(int bone) {
  if (bone < 0 || bone >= kNumBones) {
    throw std::invalid_argument("bone index out of range");
  }
  if (bone == 0) return 0;
  const int finger = (bone - 1) / 3;
  const int phalanx = (bone - 1) % 3;
  return 1 + 4 * finger + phalanx;
}

Mat3 rodrigues(const Vec3& axis_angle) {
  if (!axis_angle.allFinite()) {
    throw std::invalid_argument("rodrigues: non-finite axis-angle input");
  }
  const Scalar angle = axis_angle.norm();
  if (angle < 1e-12) {
    // first-order expansion, exact at zero and smooth for finite differencing
    return Mat3::Identity() + skew(axis_angle);
  }
  return Eigen::AngleAxis<Scalar>(angle, axis_angle / angle).toRotationMatrix();
}

VecX pose_features(const Eigen::Ref<const VecX>& pose) {
  if (pose.size() != kNumPose) {
    throw std::invalid_argument("pose vector must have 48 entries");
  }
  VecX feat(kPoseFeatureDim);
  for (int j = 0; j < kNumArticulated; ++j) {
    const Mat3 r = rodrigues(pose.segment<3>(3 * (j + 1))) - Mat3::Identity();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        feat[9 * j + 3 * a + b] = r(a, b);
      }
    }
  }
  return feat;
}

PointCloud blend_shape(const HandRig& rig, const HandParams& params) {
  check_rig_dims(rig);
  params.validate();
  PointCloud v = rig.template_vertices;
  Eigen::Map<VecX> flat(v.data(), 3 * rig.vertex_count());
  flat += rig.shape_basis * params.shape;
  flat += rig.pose_basis * (pose_features(params.pose) - pose_features(rig.mean_pose));
  return v;
}

LbsOutput lbs_forward(const HandRig& rig, const HandParams& params) {
  check_rig_dims(rig);
  params.validate();
  const Eigen::Index v_count = rig.vertex_count();

  // The skeleton follows the shape-blended mesh only; pose correctives do
  // not move the joints.
  PointCloud v_shaped = rig.template_vertices;
  Eigen::Map<VecX>(v_shaped.data(), 3 * v_count) += rig.shape_basis * params.shape;

  Eigen::Matrix<Scalar, kNumBones, 3> rest_joints;
  for (int k = 0; k < kNumBones; ++k) {
    rest_joints.row(k) = rig.joint_regressor.row(bone_keypoint_index(k)) * v_shaped;
  }

  PointCloud v_rest = v_shaped;
  Eigen::Map<VecX>(v_rest.data(), 3 * v_count) +=
      rig.pose_basis * (pose_features(params.pose) - pose_features(rig.mean_pose));

  // Articulation chain. The root link carries no rotation here; the global
  // rotation acts about the origin afterwards.
  std::array<Mat3, kNumBones> world_rot;
  std::array<Vec3, kNumBones> world_pos;
  world_rot[0] = Mat3::Identity();
  world_pos[0] = rest_joints.row(0).transpose();
  for (int k = 1; k < kNumBones; ++k) {
    const int parent = rig.kinematic_tree[k];
    const Mat3 local = rodrigues(params.pose.segment<3>(3 * k));
    world_rot[k] = world_rot[parent] * local;
    world_pos[k] = world_rot[parent] * (rest_joints.row(k) - rest_joints.row(parent)).transpose() +
                   world_pos[parent];
  }

  PointCloud skinned = PointCloud::Zero(v_count, 3);
  PointCloud moved(v_count, 3);
  for (int k = 0; k < kNumBones; ++k) {
    const Vec3 shift = world_pos[k] - world_rot[k] * rest_joints.row(k).transpose();
    moved.noalias() = v_rest * world_rot[k].transpose();
    moved.rowwise() += shift.transpose();
    skinned += rig.skinning_weights.col(k).asDiagonal() * moved;
  }

  const Mat3 global = rodrigues(params.pose.head<3>());
  LbsOutput out;
  out.vertices.noalias() = skinned * global.transpose();
  out.vertices.rowwise() += params.translation.transpose();
  out.joints.noalias() = rig.joint_regressor * out.vertices;
  return out;
}

VecX mirror_pose(const Eigen::Ref<const VecX>& pose) {
  if (pose.size() != kNumPose) {
    throw std::invalid_argument("pose vector must have 48 entries");
  }
  VecX out = pose;
  for (int j = 0; j < kNumPose / 3; ++j) {
    out[3 * j + 1] = -out[3 * j + 1];
    out[3 * j + 2] = -out[3 * j + 2];
  }
  return out;
}

HandParams mirror_params(const HandParams& params) {
  HandParams out = params;
  out.pose = mirror_pose(params.pose);
  out.translation.x() = -out.translation.x();
  return out;
}

HandRig mirror_rig(const HandRig& rig) {
  check_rig_dims(rig);
  HandRig out = rig;
  out.template_vertices.col(0) = -rig.template_vertices.col(0);
  for (Eigen::Index f = 0; f < out.faces.rows(); ++f) {
    std::swap(out.faces(f, 1), out.faces(f, 2));
  }
  for (Eigen::Index i = 0; i < rig.vertex_count(); ++i) {
    out.shape_basis.row(3 * i) = -out.shape_basis.row(3 * i);
    out.pose_basis.row(3 * i) = -out.pose_basis.row(3 * i);
  }
  // A pose feature (R - I)(a, b) changes sign under reflection iff exactly
  // one of a, b is the x axis.
  for (int m = 0; m < kPoseFeatureDim; ++m) {
    const int a = (m % 9) / 3;
    const int b = m % 3;
    if ((a == 0) != (b == 0)) out.pose_basis.col(m) = -out.pose_basis.col(m);
  }
  out.mean_pose = mirror_pose(rig.mean_pose);
  out.hand_type = other_hand(rig.hand_type);
  return out;
}

// ---------------------------------------------------------------------------
// Procedural test rig
// ---------------------------------------------------------------------------

namespace {

struct FingerSpec {
  Vec3 mcp;
  Vec3 dir;
  std::array<Scalar, 3> lengths;
  Scalar radius;
};

constexpr int kPalmRings = 22;
constexpr int kPalmSegments = 13;
constexpr int kFingerRings = 12;
constexpr int kFingerSegments = 8;
constexpr int kPalmVerts = kPalmRings * kPalmSegments + 2;           // 288
constexpr int kFingerVerts = kFingerRings * kFingerSegments + 2;     // 98

std::array<FingerSpec, 5> finger_table() {
  auto norm = [](Scalar x, Scalar y, Scalar z) { return Vec3(x, y, z).normalized(); };
  return {{
      {Vec3(0.040, 0.028, 0.002), norm(0.80, 0.60, 0.0), {0.035, 0.029, 0.023}, 0.0095},
      {Vec3(0.028, 0.090, 0.000), norm(0.0, 1.0, 0.0), {0.040, 0.024, 0.020}, 0.0080},
      {Vec3(0.009, 0.094, 0.000), norm(0.0, 1.0, 0.0), {0.044, 0.027, 0.022}, 0.0082},
      {Vec3(-0.010, 0.090, 0.000), norm(0.0, 1.0, 0.0), {0.040, 0.025, 0.021}, 0.0078},
      {Vec3(-0.028, 0.084, 0.000), norm(0.0, 1.0, 0.0), {0.032, 0.020, 0.017}, 0.0068},
  }};
}

// Orthonormal frame (u, v, dir) with u x v = dir, so rings wind outward.
void ring_frame(const Vec3& dir, Vec3* u, Vec3* v) {
  Vec3 ref = std::abs(dir.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
  *u = dir.cross(ref).normalized();
  *v = dir.cross(*u);
  if (u->cross(*v).dot(dir) < 0) *v = -*v;
}

void add_tube_faces(std::vector<std::array<int, 3>>& faces, int first, int rings,
                    int segments, int base_cap, int tip_cap) {
  for (int j = 0; j + 1 < rings; ++j) {
    for (int s = 0; s < segments; ++s) {
      const int a = first + j * segments + s;
      const int b = first + j * segments + (s + 1) % segments;
      const int c = first + (j + 1) * segments + (s + 1) % segments;
      const int d = first + (j + 1) * segments + s;
      faces.push_back({a, b, c});
      faces.push_back({a, c, d});
    }
  }
  for (int s = 0; s < segments; ++s) {
    const int a = first + s;
    const int b = first + (s + 1) % segments;
    faces.push_back({base_cap, b, a});
    const int ta = first + (rings - 1) * segments + s;
    const int tb = first + (rings - 1) * segments + (s + 1) % segments;
    faces.push_back({tip_cap, ta, tb});
  }
}

HandRig make_right_test_rig() {
  HandRig rig;
  const auto fingers = finger_table();

  const int total_verts = kPalmVerts + 5 * kFingerVerts;  // 778
  rig.template_vertices.resize(total_verts, 3);
  rig.skinning_weights = MatX::Zero(total_verts, kNumBones);
  rig.joint_regressor = MatX::Zero(kNumKeypoints, total_verts);

  std::vector<std::array<int, 3>> faces;

  // Palm: elliptical tube along +y, wrist near the origin.
  const Scalar palm_y0 = -0.012, palm_y1 = 0.092;
  int cursor = 0;
  const int palm_first = cursor;
  for (int j = 0; j < kPalmRings; ++j) {
    const Scalar t = static_cast<Scalar>(j) / (kPalmRings - 1);
    const Scalar y = palm_y0 + t * (palm_y1 - palm_y0);
    const Scalar rx = 0.032 + 0.008 * t;
    const Scalar rz = 0.013;
    for (int s = 0; s < kPalmSegments; ++s) {
      const Scalar phi = 2.0 * M_PI * s / kPalmSegments;
      rig.template_vertices.row(cursor) =
          Vec3(rx * std::cos(phi), y, -rz * std::sin(phi)).transpose();
      rig.skinning_weights(cursor, 0) = 1.0;
      ++cursor;
    }
  }
  const int palm_base_cap = cursor;
  rig.template_vertices.row(cursor) = Vec3(0.0, palm_y0 - 0.005, 0.0).transpose();
  rig.skinning_weights(cursor, 0) = 1.0;
  ++cursor;
  const int palm_tip_cap = cursor;
  rig.template_vertices.row(cursor) = Vec3(0.0, palm_y1 + 0.003, 0.0).transpose();
  rig.skinning_weights(cursor, 0) = 1.0;
  ++cursor;
  add_tube_faces(faces, palm_first, kPalmRings, kPalmSegments, palm_base_cap, palm_tip_cap);

  // Wrist keypoint: average of the two palm rings bracketing y = 0.
  for (int j = 2; j <= 3; ++j) {
    for (int s = 0; s < kPalmSegments; ++s) {
      rig.joint_regressor(0, palm_first + j * kPalmSegments + s) = 1.0 / (2 * kPalmSegments);
    }
  }

  // Fingers: tubes with rings aligned to the joints.
  for (int f = 0; f < 5; ++f) {
    const FingerSpec& spec = fingers[f];
    Vec3 u, v;
    ring_frame(spec.dir, &u, &v);
    const Scalar total_len = spec.lengths[0] + spec.lengths[1] + spec.lengths[2];

    // Arc positions of the 12 rings, measured from the mcp.
    const Scalar l0 = spec.lengths[0], l1 = spec.lengths[1], l2 = spec.lengths[2];
    const std::array<Scalar, kFingerRings> arc = {
        0.0,           l0 * 0.25,      l0 * 0.5,           l0 * 0.75,
        l0,            l0 + l1 / 3.0,  l0 + 2.0 * l1 / 3.0, l0 + l1,
        l0 + l1 + l2 / 3.0, l0 + l1 + 2.0 * l2 / 3.0, total_len, total_len + 0.003};

    const int prox = 1 + 3 * f, mid = 2 + 3 * f, dist = 3 + 3 * f;
    const int first = cursor;
    for (int j = 0; j < kFingerRings; ++j) {
      Scalar radius = spec.radius * (1.0 - 0.30 * std::min(arc[j] / total_len, 1.0));
      if (j == kFingerRings - 1) radius *= 0.55;
      const Vec3 center = spec.mcp + arc[j] * spec.dir;
      for (int s = 0; s < kFingerSegments; ++s) {
        const Scalar phi = 2.0 * M_PI * s / kFingerSegments;
        rig.template_vertices.row(cursor) =
            (center + radius * (std::cos(phi) * u + std::sin(phi) * v)).transpose();
        if (j == 0) {
          rig.skinning_weights(cursor, 0) = 0.5;
          rig.skinning_weights(cursor, prox) = 0.5;
        } else if (j <= 3) {
          rig.skinning_weights(cursor, prox) = 1.0;
        } else if (j == 4) {
          rig.skinning_weights(cursor, prox) = 0.5;
          rig.skinning_weights(cursor, mid) = 0.5;
        } else if (j <= 6) {
          rig.skinning_weights(cursor, mid) = 1.0;
        } else if (j == 7) {
          rig.skinning_weights(cursor, mid) = 0.5;
          rig.skinning_weights(cursor, dist) = 0.5;
        } else {
          rig.skinning_weights(cursor, dist) = 1.0;
        }
        ++cursor;
      }
    }
    const int base_cap = cursor;
    rig.template_vertices.row(cursor) = (spec.mcp - 0.004 * spec.dir).transpose();
    rig.skinning_weights(cursor, 0) = 0.5;
    rig.skinning_weights(cursor, prox) = 0.5;
    ++cursor;
    const int tip_cap = cursor;
    rig.template_vertices.row(cursor) = (spec.mcp + (total_len + 0.005) * spec.dir).transpose();
    rig.skinning_weights(cursor, dist) = 1.0;
    ++cursor;
    add_tube_faces(faces, first, kFingerRings, kFingerSegments, base_cap, tip_cap);

    // Keypoints: mcp/pip/dip from their aligned rings, tip from the cap apex.
    const std::array<int, 3> joint_rings = {0, 4, 7};
    for (int p = 0; p < 3; ++p) {
      const int kp = 1 + 4 * f + p;
      for (int s = 0; s < kFingerSegments; ++s) {
        rig.joint_regressor(kp, first + joint_rings[p] * kFingerSegments + s) =
            1.0 / kFingerSegments;
      }
    }
    rig.joint_regressor(4 + 4 * f, tip_cap) = 1.0;
  }

  rig.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) {
    rig.faces(static_cast<Eigen::Index>(i), 0) = faces[i][0];
    rig.faces(static_cast<Eigen::Index>(i), 1) = faces[i][1];
    rig.faces(static_cast<Eigen::Index>(i), 2) = faces[i][2];
  }

  rig.kinematic_tree.resize(kNumBones);
  rig.kinematic_tree[0] = -1;
  for (int f = 0; f < 5; ++f) {
    rig.kinematic_tree[1 + 3 * f] = 0;
    rig.kinematic_tree[2 + 3 * f] = 1 + 3 * f;
    rig.kinematic_tree[3 + 3 * f] = 2 + 3 * f;
  }

  // Shape basis: scale, finger length, girth, palm stretch, then smooth
  // low-frequency fields.
  rig.shape_basis = MatX::Zero(3 * total_verts, kNumShape);
  struct Wave {
    int axis;
    Vec3 freq;
    Scalar phase;
  };
  const std::array<Wave, 6> waves = {{{0, Vec3(30, 40, 0), 0.0},
                                      {1, Vec3(0, 35, 45), 1.0},
                                      {2, Vec3(25, 0, 50), 2.0},
                                      {0, Vec3(60, 20, 10), 3.0},
                                      {1, Vec3(15, 55, 25), 4.0},
                                      {2, Vec3(45, 30, 35), 5.0}}};
  for (int i = 0; i < total_verts; ++i) {
    const Vec3 p = rig.template_vertices.row(i).transpose();
    rig.shape_basis.block<3, 1>(3 * i, 0) = 0.06 * p;
    rig.shape_basis(3 * i + 1, 1) = 0.06 * std::max(0.0, p.y() - 0.06);
    rig.shape_basis(3 * i + 0, 2) = 0.04 * p.x();
    rig.shape_basis(3 * i + 2, 2) = 0.10 * p.z();
    rig.shape_basis(3 * i + 1, 3) = 0.05 * std::min(p.y(), 0.085);
    for (size_t w = 0; w < waves.size(); ++w) {
      rig.shape_basis(3 * i + waves[w].axis, 4 + static_cast<int>(w)) =
          0.004 * std::sin(waves[w].freq.dot(p) + waves[w].phase);
    }
  }

  // Pose basis: small corrective fields localized by the skinning weight of
  // the joint each feature belongs to.
  rig.pose_basis = MatX::Zero(3 * total_verts, kPoseFeatureDim);
  for (int m = 0; m < kPoseFeatureDim; ++m) {
    const int bone = 1 + m / 9;
    const int axis = m % 3;
    const Vec3 freq(12.0 + 5.0 * (m % 7), 18.0 + 4.0 * (m % 5), 24.0 + 3.0 * (m % 4));
    const Scalar phase = 0.7 * m;
    for (int i = 0; i < total_verts; ++i) {
      const Scalar w = rig.skinning_weights(i, bone);
      if (w == 0.0) continue;
      const Vec3 p = rig.template_vertices.row(i).transpose();
      rig.pose_basis(3 * i + axis, m) = 0.0015 * w * std::sin(freq.dot(p) + phase);
    }
  }

  rig.mean_pose = VecX::Zero(kNumPose);
  rig.hand_type = HandType::kRight;
  return rig;
}

}  // namespace

HandRig make_test_rig(HandType hand_type) {
  HandRig rig = make_right_test_rig();
  if (hand_type == HandType::kLeft) rig = mirror_rig(rig);
  rig.validate();
  return rig;
}

}  // namespace handforge
