#pragma once

#include <optional>
#include <string>
#include <vector>

#include "handforge/camera.hpp"
#include "handforge/hand_model.hpp"
#include "handforge/heatmap.hpp"
#include "handforge/image.hpp"
#include "handforge/losses.hpp"
#include "handforge/renderer.hpp"
#include "handforge/rng.hpp"

namespace handforge {

enum class CenterDef { kMeanVisibleKeypoints, kBoxCenter };

/// Generating state of a self-rendered sample: everything needed to
/// reproduce its pixels and labels exactly.
struct SourceParams {
  HandParams params;
  Texture texture;
  Lighting lighting;
  CameraIntrinsics patch_camera;
  PointCloud joints3d;  // 21 x 3, patch camera frame
};

/// Square single-hand patch with labels.
struct HandSample {
  ImageRGB rgb;
  MaskImage mask;
  Keypoints2D keypoints;  // patch coordinates
  Vec4 bbox;              // x0, y0, x1, y1 patch pixels
  HandType hand_type = HandType::kRight;
  std::optional<SourceParams> source;
  std::string source_id;
};

/// One placed hand inside a composed scene, labels in canvas coordinates.
struct SceneInstance {
  Vec2 center = Vec2::Zero();
  HandType hand_type = HandType::kRight;
  Keypoints2D keypoints;
  Vec4 bbox = Vec4::Zero();
  MaskImage mask;  // canvas-sized, post-occlusion
  Scalar affine_scale = 1.0;
  Vec2 affine_offset = Vec2::Zero();
  std::optional<SourceParams> source;
  std::string source_id;
};

struct Scene {
  ImageRGB canvas;
  MaskImage skin_mask;
  std::vector<SceneInstance> instances;
  CameraIntrinsics camera;
  std::uint64_t seed = 0;
  int dropped_instances = 0;  // placed but fully occluded
};

struct SynthConfig {
  int canvas_size = 512;
  int patch_size = 224;       // extras
  int base_patch_size = 448;  // base sample
  int min_scale = 96;         // extras resized into [min_scale, max_scale]
  int max_scale = 320;
  int min_side = 96;          // shelf-packing stopping size
  int max_samples = 10;
  int extras_min = 2;
  int extras_max = 5;
  Scalar flip_prob = 0.3;
  CenterDef center_def = CenterDef::kMeanVisibleKeypoints;
  Vec3 background = Vec3(0.5, 0.5, 0.5);
  Scalar min_iou = kDefaultMinIou;
  Scalar depth_min = 0.55;       // extras
  Scalar depth_max = 0.75;
  Scalar base_depth_min = 0.38;  // base hand fills more of its patch
  Scalar base_depth_max = 0.48;
  Scalar pose_flexion_max = 1.0;
  Scalar pose_lateral_max = 0.2;
  Scalar global_rot_noise = 0.3;
  Scalar shape_range = 0.5;

  void validate() const;
};

/// Renders one hand onto a square patch and captures exact labels. Throws
/// RenderError if the mesh leaves the patch frustum.
HandSample render_sample(const HandRig& rig, const HandParams& params,
                         const Texture& texture, const Lighting& lighting,
                         const CameraIntrinsics& patch_camera,
                         const Vec3& background);

/// Horizontal mirror: x' = w - 1 - x for keypoints, image/mask columns
/// reversed, hand type toggled, source parameters mirrored.
HandSample flip_sample(const HandSample& sample);

/// Greedy shelf composition: the base fills the canvas, extras stack
/// right-to-left in layers from the bottom-right corner, each rescaled to a
/// random side within [min_scale, max_scale]. Later placements occlude
/// earlier pixels and keypoints.
Scene compose_scene(const HandSample& base, const std::vector<HandSample>& extras,
                    Rng& rng, const SynthConfig& cfg);

/// Ground-truth localization targets of a composed scene.
CenterMap scene_targets(const Scene& scene, Scalar min_iou = kDefaultMinIou);

Detection instance_to_detection(const SceneInstance& instance);

/// Random legal hand state for self-rendered samples: articulation within
/// the default limits, the whole mesh verified inside the patch frustum.
HandParams sample_hand_params(Rng& rng, const SynthConfig& cfg, const HandRig& rig,
                              const CameraIntrinsics& patch_camera,
                              Scalar depth_min, Scalar depth_max);
Texture sample_texture(Rng& rng, const HandRig& rig);
Lighting sample_lighting(Rng& rng);

/// Renders base + extras from the rigs and composes a full scene.
Scene generate_scene(Rng& rng, const HandRig& right_rig, const HandRig& left_rig,
                     const SynthConfig& cfg);

}  // namespace handforge
