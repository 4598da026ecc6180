#include "handforge/scene_synth.hpp"

#include <algorithm>
#include <cmath>

namespace handforge {

void SynthConfig::validate() const {
  if (canvas_size <= 0 || patch_size <= 0 || base_patch_size <= 0) {
    throw std::invalid_argument("synth config sizes must be positive");
  }
  if (min_scale <= 0 || max_scale < min_scale || min_side <= 0) {
    throw std::invalid_argument("synth config scale range is invalid");
  }
  if (max_samples < 1 || extras_min < 0 || extras_max < extras_min ||
      extras_max > max_samples - 1) {
    throw std::invalid_argument("synth config sample counts are invalid");
  }
  if (flip_prob < 0.0 || flip_prob > 1.0) {
    throw std::invalid_argument("synth config flip probability must lie in [0, 1]");
  }
  if (!(depth_min > 0.0) || depth_max < depth_min || !(base_depth_min > 0.0) ||
      base_depth_max < base_depth_min) {
    throw std::invalid_argument("synth config depth ranges are invalid");
  }
}

HandSample render_sample(const HandRig& rig, const HandParams& params,
                         const Texture& texture, const Lighting& lighting,
                         const CameraIntrinsics& patch_camera,
                         const Vec3& background) {
  patch_camera.validate();
  if (patch_camera.width != patch_camera.height) {
    throw std::invalid_argument("sample patches must be square");
  }
  texture.validate();
  lighting.validate();

  const LbsOutput posed = lbs_forward(rig, params);
  for (Eigen::Index i = 0; i < posed.vertices.rows(); ++i) {
    if (!(posed.vertices(i, 2) > kMinDepth)) {
      throw RenderError("hand mesh reaches behind the patch camera");
    }
  }
  const PointCloud2 vertex_px = project(posed.vertices, patch_camera);
  if (vertex_px.col(0).minCoeff() < 0.0 || vertex_px.col(1).minCoeff() < 0.0 ||
      vertex_px.col(0).maxCoeff() >= patch_camera.width ||
      vertex_px.col(1).maxCoeff() >= patch_camera.height) {
    throw RenderError("hand mesh leaves the patch frustum");
  }

  const PointCloud normals = vertex_normals(posed.vertices, rig.faces);
  const PointCloud colors = shade_vertices(texture, lighting, normals);
  const RenderOutput render = rasterize(posed.vertices, rig.faces, colors, patch_camera);

  HandSample sample;
  sample.rgb = ImageRGB::constant(patch_camera.width, patch_camera.height, background);
  for (int y = 0; y < patch_camera.height; ++y) {
    for (int x = 0; x < patch_camera.width; ++x) {
      if (render.silhouette(y, x)) {
        sample.rgb.r(y, x) = render.rgb.r(y, x);
        sample.rgb.g(y, x) = render.rgb.g(y, x);
        sample.rgb.b(y, x) = render.rgb.b(y, x);
      }
    }
  }
  sample.mask = render.silhouette;
  sample.keypoints = Keypoints2D::all_visible(project(posed.joints, patch_camera));
  sample.hand_type = rig.hand_type;

  // Tight mask box.
  int x0 = patch_camera.width, x1 = -1, y0 = patch_camera.height, y1 = -1;
  for (int y = 0; y < patch_camera.height; ++y) {
    for (int x = 0; x < patch_camera.width; ++x) {
      if (!sample.mask(y, x)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw RenderError("rendered hand produced an empty mask");
  sample.bbox = Vec4(x0, y0, x1 + 1, y1 + 1);

  SourceParams source;
  source.params = params;
  source.texture = texture;
  source.lighting = lighting;
  source.patch_camera = patch_camera;
  source.joints3d = posed.joints;
  sample.source = source;
  return sample;
}

HandSample flip_sample(const HandSample& sample) {
  HandSample out;
  out.rgb = flip_horizontal(sample.rgb);
  out.mask = flip_horizontal(sample.mask);
  const Scalar w = static_cast<Scalar>(sample.rgb.width());
  out.keypoints = sample.keypoints;
  for (int j = 0; j < kNumKeypoints; ++j) {
    if (sample.keypoints.visible[j]) {
      out.keypoints.px(j, 0) = w - 1.0 - sample.keypoints.px(j, 0);
    }
  }
  out.bbox = Vec4(w - 1.0 - sample.bbox[2], sample.bbox[1], w - 1.0 - sample.bbox[0],
                  sample.bbox[3]);
  out.hand_type = other_hand(sample.hand_type);
  out.source_id = sample.source_id;
  if (sample.source) {
    SourceParams src = *sample.source;
    src.params = mirror_params(sample.source->params);
    // Mirrored principal point keeps the stored parameters consistent with
    // the flipped keypoint labels.
    src.patch_camera.cx = (w - 1.0) - sample.source->patch_camera.cx;
    src.joints3d.col(0) = -sample.source->joints3d.col(0);
    // SH basis functions odd in x flip sign under the reflection.
    for (int k : {3, 4, 7}) {
      src.lighting.sh_coeffs.row(k) = -sample.source->lighting.sh_coeffs.row(k);
    }
    out.source = src;
  }
  return out;
}

namespace {

struct Placement {
  const HandSample* sample;
  int side_w;
  int side_h;
  int x0;
  int y0;
  bool paint_whole;  // base image keeps its background pixels
};

void map_labels(const Placement& p, Scalar scale_x, Scalar scale_y,
                SceneInstance& inst) {
  inst.affine_scale = scale_x;
  inst.affine_offset = Vec2(p.x0, p.y0);
  inst.keypoints = p.sample->keypoints;
  for (int j = 0; j < kNumKeypoints; ++j) {
    if (!p.sample->keypoints.visible[j]) continue;
    inst.keypoints.px(j, 0) = scale_x * p.sample->keypoints.px(j, 0) + p.x0;
    inst.keypoints.px(j, 1) = scale_y * p.sample->keypoints.px(j, 1) + p.y0;
  }
  inst.bbox = Vec4(scale_x * p.sample->bbox[0] + p.x0, scale_y * p.sample->bbox[1] + p.y0,
                   scale_x * p.sample->bbox[2] + p.x0, scale_y * p.sample->bbox[3] + p.y0);
  inst.hand_type = p.sample->hand_type;
  inst.source = p.sample->source;
  inst.source_id = p.sample->source_id;
}

}  // namespace

Scene compose_scene(const HandSample& base, const std::vector<HandSample>& extras,
                    Rng& rng, const SynthConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(extras.size()) > cfg.max_samples - 1) {
    throw std::invalid_argument("too many extra samples for this configuration");
  }
  const int canvas = cfg.canvas_size;

  Scene scene;
  scene.camera = CameraIntrinsics::multi_hand_default(canvas, canvas);
  scene.canvas = ImageRGB::constant(canvas, canvas, cfg.background);

  std::vector<Placement> placements;
  placements.push_back({&base, canvas, canvas, 0, 0, true});

  // Greedy shelf packing: right-to-left rows stacked from the bottom.
  int x_right = canvas;
  int y_bottom = canvas;
  int layer_height = 0;
  int unplaced = 0;
  for (const HandSample& extra : extras) {
    if (x_right < cfg.min_side) {
      y_bottom -= layer_height;
      x_right = canvas;
      layer_height = 0;
    }
    if (y_bottom < cfg.min_side) {
      ++unplaced;
      continue;
    }
    const int side_cap = std::min({cfg.max_scale, x_right, y_bottom});
    if (side_cap < cfg.min_scale) {
      ++unplaced;
      continue;
    }
    const int side = rng.uniform_int(cfg.min_scale, side_cap);
    placements.push_back({&extra, side, side, x_right - side, y_bottom - side, false});
    x_right -= side;
    layer_height = std::max(layer_height, side);
  }
  scene.dropped_instances = 0;

  // Composite in placement order; later pixels win.
  std::vector<MaskImage> masks(placements.size());
  std::vector<SceneInstance> instances(placements.size());
  for (size_t i = 0; i < placements.size(); ++i) {
    const Placement& p = placements[i];
    const ImageRGB resized = resize_bilinear(p.sample->rgb, p.side_w, p.side_h);
    const MaskImage resized_mask = resize_mask(p.sample->mask, p.side_w, p.side_h);
    masks[i] = MaskImage::Zero(canvas, canvas);
    for (int y = 0; y < p.side_h; ++y) {
      for (int x = 0; x < p.side_w; ++x) {
        const int cy = p.y0 + y, cx = p.x0 + x;
        if (cy < 0 || cx < 0 || cy >= canvas || cx >= canvas) continue;
        const bool on_hand = resized_mask(y, x) != 0;
        if (p.paint_whole || on_hand) {
          scene.canvas.r(cy, cx) = resized.r(y, x);
          scene.canvas.g(cy, cx) = resized.g(y, x);
          scene.canvas.b(cy, cx) = resized.b(y, x);
        }
        if (on_hand) masks[i](cy, cx) = 1;
      }
    }
    map_labels(p, static_cast<Scalar>(p.side_w) / p.sample->rgb.width(),
               static_cast<Scalar>(p.side_h) / p.sample->rgb.height(), instances[i]);
  }

  // Occlusion: later layers cover earlier masks and keypoints.
  for (size_t i = 0; i < placements.size(); ++i) {
    for (size_t j = i + 1; j < placements.size(); ++j) {
      for (int y = 0; y < canvas; ++y) {
        for (int x = 0; x < canvas; ++x) {
          if (masks[j](y, x)) masks[i](y, x) = 0;
        }
      }
    }
    instances[i].mask = masks[i];
    for (int k = 0; k < kNumKeypoints; ++k) {
      if (!instances[i].keypoints.visible[k]) continue;
      const Scalar u = instances[i].keypoints.px(k, 0);
      const Scalar v = instances[i].keypoints.px(k, 1);
      if (u < 0.0 || v < 0.0 || u >= canvas || v >= canvas) {
        instances[i].keypoints.set_invisible(k);
        continue;
      }
      const int px = std::min(static_cast<int>(u), canvas - 1);
      const int py = std::min(static_cast<int>(v), canvas - 1);
      for (size_t j = i + 1; j < placements.size(); ++j) {
        if (masks[j](py, px)) {
          instances[i].keypoints.set_invisible(k);
          break;
        }
      }
    }
  }

  scene.skin_mask = MaskImage::Zero(canvas, canvas);
  for (SceneInstance& inst : instances) {
    if (inst.keypoints.count_visible() == 0) {
      ++scene.dropped_instances;
      continue;
    }
    if (cfg.center_def == CenterDef::kMeanVisibleKeypoints) {
      Vec2 sum = Vec2::Zero();
      int n = 0;
      for (int k = 0; k < kNumKeypoints; ++k) {
        if (!inst.keypoints.visible[k]) continue;
        sum += inst.keypoints.px.row(k).transpose();
        ++n;
      }
      inst.center = sum / n;
    } else {
      inst.center = Vec2(0.5 * (inst.bbox[0] + inst.bbox[2]),
                         0.5 * (inst.bbox[1] + inst.bbox[3]));
    }
    for (int y = 0; y < canvas; ++y) {
      for (int x = 0; x < canvas; ++x) {
        if (inst.mask(y, x)) scene.skin_mask(y, x) = 1;
      }
    }
    scene.instances.push_back(std::move(inst));
  }
  (void)unplaced;
  return scene;
}

Detection instance_to_detection(const SceneInstance& instance) {
  Detection det;
  det.center = instance.center;
  det.confidence = 1.0;
  det.hand_type = instance.hand_type;
  det.type_score = 1.0;
  for (int j = 0; j < kNumKeypoints; ++j) {
    if (instance.keypoints.visible[j]) {
      det.keypoints.row(j) = instance.keypoints.px.row(j);
      det.keypoint_confidence[j] = 1.0;
    } else {
      det.keypoints.row(j) = instance.center.transpose();
      det.keypoint_confidence[j] = 0.0;
    }
  }
  det.bbox = instance.bbox;
  return det;
}

CenterMap scene_targets(const Scene& scene, Scalar min_iou) {
  std::vector<Detection> gt;
  gt.reserve(scene.instances.size());
  for (const SceneInstance& inst : scene.instances) {
    gt.push_back(instance_to_detection(inst));
  }
  return encode_targets(gt, scene.camera.width, scene.camera.height, min_iou);
}

HandParams sample_hand_params(Rng& rng, const SynthConfig& cfg, const HandRig& rig,
                              const CameraIntrinsics& patch_camera,
                              Scalar depth_min, Scalar depth_max) {
  const AngleLimits limits = AngleLimits::defaults();
  for (int attempt = 0; attempt < 50; ++attempt) {
    HandParams params;
    for (int s = 0; s < kNumShape; ++s) {
      params.shape[s] = rng.uniform(-cfg.shape_range, cfg.shape_range);
    }
    for (int j = 0; j < kNumArticulated; ++j) {
      params.pose[3 + 3 * j + 0] = rng.uniform(0.0, cfg.pose_flexion_max);
      params.pose[3 + 3 * j + 1] = rng.uniform(-cfg.pose_lateral_max, cfg.pose_lateral_max);
      params.pose[3 + 3 * j + 2] = rng.uniform(-cfg.pose_lateral_max, cfg.pose_lateral_max);
    }
    // Palm toward the camera plus a small random tilt.
    const Vec3 noise(rng.uniform(-cfg.global_rot_noise, cfg.global_rot_noise),
                     rng.uniform(-cfg.global_rot_noise, cfg.global_rot_noise),
                     rng.uniform(-cfg.global_rot_noise, cfg.global_rot_noise));
    const Mat3 global = rodrigues(noise) * rodrigues(Vec3(M_PI, 0, 0));
    const Eigen::AngleAxis<Scalar> aa(global);
    params.pose.head<3>() = aa.angle() * aa.axis();

    const Scalar depth = rng.uniform(depth_min, depth_max);
    const Vec2 root_px(patch_camera.width * rng.uniform(0.42, 0.58),
                       patch_camera.height * rng.uniform(0.72, 0.85));
    params.translation = backproject_ray(root_px, depth, patch_camera);

    // Keep articulation inside the default limits.
    bool legal = true;
    for (int d = 0; d < 45 && legal; ++d) {
      legal = params.pose[3 + d] >= limits.bounds(d, 0) &&
              params.pose[3 + d] <= limits.bounds(d, 1);
    }
    if (!legal) continue;

    const LbsOutput posed = lbs_forward(rig, params);
    bool inside = true;
    for (Eigen::Index i = 0; i < posed.vertices.rows() && inside; ++i) {
      inside = posed.vertices(i, 2) > kMinDepth;
    }
    if (!inside) continue;
    const PointCloud2 px = project(posed.vertices, patch_camera);
    const Scalar margin = 2.0;
    if (px.col(0).minCoeff() < margin || px.col(1).minCoeff() < margin ||
        px.col(0).maxCoeff() >= patch_camera.width - margin ||
        px.col(1).maxCoeff() >= patch_camera.height - margin) {
      continue;
    }
    return params;
  }
  throw RenderError("could not sample an in-frustum hand configuration");
}

Texture sample_texture(Rng& rng, const HandRig& rig) {
  Texture tex;
  tex.per_vertex_rgb.resize(rig.vertex_count(), 3);
  const Vec3 base(0.72 + rng.uniform(-0.08, 0.08), 0.52 + rng.uniform(-0.08, 0.08),
                  0.42 + rng.uniform(-0.08, 0.08));
  const Vec3 freq(rng.uniform(15.0, 45.0), rng.uniform(15.0, 45.0), rng.uniform(15.0, 45.0));
  const Scalar phase = rng.uniform(0.0, 2.0 * M_PI);
  for (Eigen::Index i = 0; i < rig.vertex_count(); ++i) {
    const Vec3 p = rig.template_vertices.row(i).transpose();
    const Scalar wobble = 0.12 * std::sin(freq.dot(p) + phase);
    for (int c = 0; c < 3; ++c) {
      tex.per_vertex_rgb(i, c) = std::clamp(base[c] + wobble, 0.05, 0.95);
    }
  }
  return tex;
}

Lighting sample_lighting(Rng& rng) {
  Lighting light = Lighting::ambient(rng.uniform(0.75, 1.0));
  for (int c = 0; c < 3; ++c) {
    for (int k = 1; k < 4; ++k) {
      light.sh_coeffs(k, c) += rng.uniform(-0.45, 0.45);
    }
    for (int k = 4; k < 9; ++k) {
      light.sh_coeffs(k, c) += rng.uniform(-0.20, 0.20);
    }
  }
  return light;
}

Scene generate_scene(Rng& rng, const HandRig& right_rig, const HandRig& left_rig,
                     const SynthConfig& cfg) {
  cfg.validate();
  (void)left_rig;  // left hands come from the horizontal-flip path

  const CameraIntrinsics base_camera =
      CameraIntrinsics::multi_hand_default(cfg.base_patch_size, cfg.base_patch_size);
  HandParams base_params = sample_hand_params(rng, cfg, right_rig, base_camera,
                                              cfg.base_depth_min, cfg.base_depth_max);
  HandSample base = render_sample(right_rig, base_params, sample_texture(rng, right_rig),
                                  sample_lighting(rng), base_camera, cfg.background);
  base.source_id = "base";
  if (rng.uniform() < cfg.flip_prob) base = flip_sample(base);

  const int n_extras = rng.uniform_int(cfg.extras_min, cfg.extras_max);
  const CameraIntrinsics patch_camera =
      CameraIntrinsics::multi_hand_default(cfg.patch_size, cfg.patch_size);
  std::vector<HandSample> extras;
  extras.reserve(n_extras);
  for (int i = 0; i < n_extras; ++i) {
    HandParams params = sample_hand_params(rng, cfg, right_rig, patch_camera,
                                           cfg.depth_min, cfg.depth_max);
    HandSample sample =
        render_sample(right_rig, params, sample_texture(rng, right_rig),
                      sample_lighting(rng), patch_camera, cfg.background);
    sample.source_id = "extra_" + std::to_string(i);
    if (rng.uniform() < cfg.flip_prob) sample = flip_sample(sample);
    extras.push_back(std::move(sample));
  }
  return compose_scene(base, extras, rng, cfg);
}

}  // namespace handforge
