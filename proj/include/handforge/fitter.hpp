#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "handforge/camera.hpp"
#include "handforge/hand_model.hpp"
#include "handforge/heatmap.hpp"
#include "handforge/losses.hpp"
#include "handforge/renderer.hpp"
#include "handforge/scene_synth.hpp"

namespace handforge {

struct FitConfig {
  // Loss weights.
  Scalar lambda_rep = 1.0;
  Scalar lambda_reg = 1.0;
  Scalar lambda_con = 1.0;
  Scalar lambda_pho = 1.0;
  Scalar lambda_3d = 1.0;
  Scalar w_pose = 1.0;
  Scalar w_shape = 0.1;
  AngleLimits limits = AngleLimits::defaults();

  // Stage schedule.
  int stage1_iters = 160;
  int stage2_iters = 400;
  Scalar lr_init = 0.02;
  Scalar lr_decay = 0.1;
  std::vector<int> lr_milestones = {120, 148};
  Scalar stage2_lr = 0.05;

  Scalar fd_step = 1e-5;
  Scalar init_depth = 0.6;
  Scalar divergence_threshold = 1e6;

  // Detection decoding (fit_scene).
  Scalar decode_threshold = 0.3;
  int max_detections = 16;
  Scalar min_iou = kDefaultMinIou;

  std::uint64_t seed = 0;
  bool audit_visibility = false;

  void validate() const;
};

/// Everything observed about one hand: 2D keypoints at minimum, optionally a
/// skin mask + target image (enables the photometric stage) and ground-truth
/// 3D joints (enables the 3D term).
struct Observation {
  Keypoints2D keypoints;
  std::optional<MaskImage> skin_mask;
  std::optional<ImageRGB> image;
  std::optional<PointCloud> gt_joints;
  CameraIntrinsics camera;
};

struct LossBreakdown {
  Scalar total = 0.0;
  Scalar reprojection = 0.0;
  Scalar regularization = 0.0;
  Scalar consistency = 0.0;
  Scalar photometric = 0.0;
  Scalar joint3d = 0.0;
};

struct FitResult {
  HandParams params;
  Texture texture;
  Lighting lighting;
  std::vector<LossBreakdown> trace;
  bool converged = false;
  bool diverged = false;
  int audit_violations = 0;
  std::optional<MetricReport> report;
};

/// Neutral start: zero shape, mean articulation, palm toward the camera,
/// translation on the detection's backprojected ray at init_depth.
HandParams init_params(const Detection& det, const CameraIntrinsics& camera,
                       const FitConfig& cfg);

/// Weighted total of the active loss terms at the given state. The
/// photometric term participates only when the observation carries both an
/// image and a skin mask; the 3D term only when ground-truth joints exist.
LossBreakdown loss_total(const HandParams& params, const Texture& texture,
                         const Lighting& lighting, const HandRig& rig,
                         const Observation& obs, const Keypoints2D* local_kp,
                         const FitConfig& cfg);

/// Central finite differences over the 61 packed parameters. Throws
/// GradientError naming the coordinate if a probe is non-finite.
VecX fd_gradient(const std::function<Scalar(const HandParams&)>& loss,
                 const HandParams& at, Scalar fd_step);

/// Two-stage fit: stage 1 optimizes geometry against the keypoint losses
/// with Adam-style moments, a step-halving fallback and the milestone decay
/// schedule; stage 2 freezes geometry and fits texture + lighting against
/// the photometric loss with analytic gradients under fixed coverage.
FitResult fit_hand(const Observation& obs, const Detection& det, const HandRig& rig,
                   const FitConfig& cfg);

/// Decodes detections from the scene's encoded targets, pairs each with the
/// nearest labeled instance, and fits every hand under the shared camera.
/// Results follow detection-confidence order.
std::vector<FitResult> fit_scene(const Scene& scene, const HandRig& right_rig,
                                 const HandRig& left_rig, const FitConfig& cfg);

}  // namespace handforge
