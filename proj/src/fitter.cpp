#include "handforge/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace handforge {

namespace {
constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
constexpr Scalar kAdamBeta1 = 0.9;
constexpr Scalar kAdamBeta2 = 0.999;
constexpr Scalar kAdamEps = 1e-8;
constexpr int kMaxHalvings = 8;
}  // namespace

void FitConfig::validate() const {
  if (stage1_iters < 0 || stage2_iters < 0) {
    throw std::invalid_argument("iteration counts must be non-negative");
  }
  if (!(lr_init > 0.0) || !(stage2_lr > 0.0) || !(fd_step > 0.0)) {
    throw std::invalid_argument("step sizes must be positive");
  }
  if (!(init_depth > 0.0)) {
    throw std::invalid_argument("init depth must be positive");
  }
  limits.validate();
}

HandParams init_params(const Detection& det, const CameraIntrinsics& camera,
                       const FitConfig& cfg) {
  HandParams params;
  params.shape.setZero();
  params.pose.setZero();
  // Palm toward the camera, fingers up in image space.
  params.pose[0] = M_PI;
  params.translation = backproject_ray(det.center, cfg.init_depth, camera);
  return params;
}

namespace {

Keypoints2D detection_keypoints(const Detection& det) {
  Keypoints2D kp;
  for (int j = 0; j < kNumKeypoints; ++j) {
    if (det.keypoint_confidence[j] > 0.0) {
      kp.px.row(j) = det.keypoints.row(j);
      kp.visible[j] = true;
    } else {
      kp.set_invisible(j);
    }
  }
  return kp;
}

// Geometry-only loss terms; the photometric term is handled separately so
// stage 1 never rasterizes.
struct GeometryObjective {
  const HandRig* rig;
  const Observation* obs;
  const Keypoints2D* local_kp;
  const FitConfig* cfg;
  BoneTopology topo = BoneTopology::hand21();
  int* audit_violations = nullptr;

  LossBreakdown evaluate(const HandParams& params) const {
    LossBreakdown b;
    LbsOutput posed;
    Keypoints2D projected;
    try {
      posed = lbs_forward(*rig, params);
      projected = Keypoints2D::all_visible(project(posed.joints, obs->camera));
    } catch (const BehindCameraError&) {
      b.total = kInf;
      return b;
    }

    LossAudit rep_audit;
    LossAudit con_audit;
    const bool audit = cfg->audit_visibility;
    const std::vector<Keypoints2D> pred{projected};
    const std::vector<Keypoints2D> gt{obs->keypoints};
    b.reprojection =
        cfg->lambda_rep *
        reprojection_loss(pred, gt, topo, audit ? &rep_audit : nullptr);
    b.regularization =
        cfg->lambda_reg *
        regularization_loss(params, cfg->limits, cfg->w_pose, cfg->w_shape);
    if (local_kp != nullptr) {
      const std::vector<Keypoints2D> local{*local_kp};
      b.consistency = cfg->lambda_con *
                      consistency_loss(local, pred, audit ? &con_audit : nullptr);
    }
    if (obs->gt_joints) {
      b.joint3d = cfg->lambda_3d * joint3d_loss(posed.joints, *obs->gt_joints);
    }
    if (audit && audit_violations != nullptr) {
      for (const auto& term : rep_audit.joint_terms) {
        if (!obs->keypoints.visible[term[1]]) ++*audit_violations;
      }
      for (const auto& term : rep_audit.edge_terms) {
        const auto& edge = topo.edges[term[1]];
        if (!obs->keypoints.visible[edge[0]] || !obs->keypoints.visible[edge[1]]) {
          ++*audit_violations;
        }
      }
      for (const auto& term : con_audit.joint_terms) {
        if (!local_kp->visible[term[1]]) ++*audit_violations;
      }
    }
    b.total = b.reprojection + b.regularization + b.consistency + b.joint3d;
    return b;
  }
};

// Stage 2: texture + lighting against the photometric loss with geometry and
// raster coverage frozen, analytic gradients, Adam steps, albedo projected
// back into [0, 1].
struct PhotometricStage {
  struct ActivePixel {
    int v0, v1, v2;
    Scalar b0, b1, b2;
    Vec3 target;
  };

  std::vector<ActivePixel> pixels;
  MatX sh;  // V x 9 basis at the frozen normals

  PhotometricStage(const HandRig& rig, const HandParams& params,
                   const Observation& obs) {
    const LbsOutput posed = lbs_forward(rig, params);
    const PointCloud normals = vertex_normals(posed.vertices, rig.faces);
    sh.resize(rig.vertex_count(), 9);
    for (Eigen::Index i = 0; i < rig.vertex_count(); ++i) {
      sh.row(i) = sh_basis(normals.row(i).transpose()).transpose();
    }
    RasterCoverage coverage;
    const PointCloud dummy = PointCloud::Zero(rig.vertex_count(), 3);
    rasterize_with_coverage(posed.vertices, rig.faces, dummy, obs.camera, &coverage);

    const MaskImage& skin = *obs.skin_mask;
    const ImageRGB& target = *obs.image;
    for (int y = 0; y < obs.camera.height; ++y) {
      for (int x = 0; x < obs.camera.width; ++x) {
        const int f = coverage.face_index(y, x);
        if (f < 0 || !skin(y, x)) continue;
        ActivePixel p;
        p.v0 = 0;
        p.v1 = 0;
        p.v2 = 0;
        p.v0 = (f >= 0) ? 0 : 0;
        p.v0 = 0;
        p.v0 = 0;
        (void)p;
        ActivePixel px;
        px.v0 = rig.faces(f, 0);
        px.v1 = rig.faces(f, 1);
        px.v2 = rig.faces(f, 2);
        px.b0 = coverage.bary0(y, x);
        px.b1 = coverage.bary1(y, x);
        px.b2 = coverage.bary2(y, x);
        px.target = target.pixel(x, y);
        pixels.push_back(px);
      }
    }
  }

  // Loss and gradients at (texture, lighting). Gradients may be null.
  Scalar evaluate(const MatX& albedo, const Eigen::Matrix<Scalar, 9, 3>& light,
                  MatX* grad_albedo, Eigen::Matrix<Scalar, 9, 3>* grad_light) const {
    if (pixels.empty()) return 0.0;
    const Eigen::Index v_count = albedo.rows();
    MatX shade = sh * light;                      // V x 3
    MatX raw = albedo.cwiseProduct(shade);        // V x 3
    MatX color = raw.cwiseMax(0.0).cwiseMin(1.0);

    MatX grad_color;
    if (grad_albedo != nullptr) grad_color = MatX::Zero(v_count, 3);

    Scalar loss = 0.0;
    const Scalar inv_n = 1.0 / pixels.size();
    for (const ActivePixel& p : pixels) {
      Vec3 rendered;
      for (int c = 0; c < 3; ++c) {
        rendered[c] = p.b0 * color(p.v0, c) + p.b1 * color(p.v1, c) +
                      p.b2 * color(p.v2, c);
      }
      const Vec3 residual = rendered - p.target;
      const Scalar norm = residual.norm();
      loss += norm * inv_n;
      if (grad_albedo == nullptr || norm < 1e-12) continue;
      const Vec3 dir = residual / norm * inv_n;
      for (int c = 0; c < 3; ++c) {
        grad_color(p.v0, c) += p.b0 * dir[c];
        grad_color(p.v1, c) += p.b1 * dir[c];
        grad_color(p.v2, c) += p.b2 * dir[c];
      }
    }

    if (grad_albedo != nullptr) {
      // Clamp subgradient: zero where the raw color left [0, 1].
      const MatX active =
          ((raw.array() > 0.0) && (raw.array() < 1.0)).cast<Scalar>().matrix();
      const MatX masked = grad_color.cwiseProduct(active);
      *grad_albedo = masked.cwiseProduct(shade);
      *grad_light = sh.transpose() * masked.cwiseProduct(albedo);
    }
    return loss;
  }
};

}  // namespace

LossBreakdown loss_total(const HandParams& params, const Texture& texture,
                         const Lighting& lighting, const HandRig& rig,
                         const Observation& obs, const Keypoints2D* local_kp,
                         const FitConfig& cfg) {
  GeometryObjective objective{&rig, &obs, local_kp, &cfg};
  LossBreakdown b = objective.evaluate(params);
  if (!std::isfinite(b.total)) return b;
  if (obs.image && obs.skin_mask && cfg.lambda_pho != 0.0) {
    const LbsOutput posed = lbs_forward(rig, params);
    const PointCloud normals = vertex_normals(posed.vertices, rig.faces);
    const PointCloud colors = shade_vertices(texture, lighting, normals);
    const RenderOutput render = rasterize(posed.vertices, rig.faces, colors, obs.camera);
    b.photometric = cfg.lambda_pho * photometric_loss(render, *obs.image, *obs.skin_mask);
    b.total += b.photometric;
  }
  return b;
}

VecX fd_gradient(const std::function<Scalar(const HandParams&)>& loss,
                 const HandParams& at, Scalar fd_step) {
  const VecX x = at.to_vector();
  VecX grad(kParamDim);
  for (int d = 0; d < kParamDim; ++d) {
    VecX probe = x;
    probe[d] = x[d] + fd_step;
    const Scalar hi = loss(HandParams::from_vector(probe));
    probe[d] = x[d] - fd_step;
    const Scalar lo = loss(HandParams::from_vector(probe));
    if (!std::isfinite(hi) || !std::isfinite(lo)) throw GradientError(d);
    grad[d] = (hi - lo) / (2.0 * fd_step);
  }
  return grad;
}

FitResult fit_hand(const Observation& obs, const Detection& det, const HandRig& rig,
                   const FitConfig& cfg) {
  cfg.validate();
  obs.camera.validate();

  const Keypoints2D local_kp = detection_keypoints(det);

  FitResult result;
  result.texture = Texture::constant(rig.vertex_count(), Vec3(0.5, 0.5, 0.5));
  result.lighting = Lighting::ambient(1.0);

  GeometryObjective objective{&rig, &obs, &local_kp, &cfg};
  objective.audit_violations = &result.audit_violations;
  auto total = [&objective](const HandParams& p) { return objective.evaluate(p).total; };

  HandParams x = init_params(det, obs.camera, cfg);
  LossBreakdown current = objective.evaluate(x);
  HandParams best = x;
  Scalar best_loss = current.total;

  VecX moment1 = VecX::Zero(kParamDim);
  VecX moment2 = VecX::Zero(kParamDim);
  for (int iter = 1; iter <= cfg.stage1_iters; ++iter) {
    int decays = 0;
    for (int milestone : cfg.lr_milestones) {
      if (iter > milestone) ++decays;
    }
    const Scalar lr = cfg.lr_init * std::pow(cfg.lr_decay, decays);

    VecX grad;
    try {
      grad = fd_gradient(total, x, cfg.fd_step);
    } catch (const GradientError&) {
      result.diverged = true;
      break;
    }
    moment1 = kAdamBeta1 * moment1 + (1.0 - kAdamBeta1) * grad;
    moment2 = kAdamBeta2 * moment2 + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    const VecX m_hat = moment1 / (1.0 - std::pow(kAdamBeta1, iter));
    const VecX v_hat = moment2 / (1.0 - std::pow(kAdamBeta2, iter));
    VecX step = lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() +
                                         VecX::Constant(kParamDim, kAdamEps));

    HandParams candidate = HandParams::from_vector(x.to_vector() - step);
    LossBreakdown cand_loss = objective.evaluate(candidate);
    for (int h = 0; h < kMaxHalvings && cand_loss.total > current.total; ++h) {
      step *= 0.5;
      candidate = HandParams::from_vector(x.to_vector() - step);
      cand_loss = objective.evaluate(candidate);
    }
    x = candidate;
    current = cand_loss;
    result.trace.push_back(current);

    if (!std::isfinite(current.total) || current.total > cfg.divergence_threshold) {
      result.diverged = true;
      break;
    }
    if (current.total < best_loss) {
      best_loss = current.total;
      best = x;
    }
  }
  result.params = best;

  // Stage 2: photometric texture/lighting refinement with frozen geometry.
  if (!result.diverged && cfg.stage2_iters > 0 && cfg.lambda_pho > 0.0 &&
      obs.image && obs.skin_mask) {
    const PhotometricStage stage(rig, best, obs);
    const LossBreakdown geo = objective.evaluate(best);

    MatX albedo = result.texture.per_vertex_rgb.cast<Scalar>();
    Eigen::Matrix<Scalar, 9, 3> light = result.lighting.sh_coeffs;

    MatX best_albedo = albedo;
    Eigen::Matrix<Scalar, 9, 3> best_light = light;
    Scalar best_pho = stage.evaluate(albedo, light, nullptr, nullptr);

    const Eigen::Index v_count = albedo.rows();
    MatX m_albedo = MatX::Zero(v_count, 3), v_albedo = MatX::Zero(v_count, 3);
    Eigen::Matrix<Scalar, 9, 3> m_light = Eigen::Matrix<Scalar, 9, 3>::Zero();
    Eigen::Matrix<Scalar, 9, 3> v_light = Eigen::Matrix<Scalar, 9, 3>::Zero();

    for (int iter = 1; iter <= cfg.stage2_iters; ++iter) {
      MatX grad_albedo;
      Eigen::Matrix<Scalar, 9, 3> grad_light;
      const Scalar pho = stage.evaluate(albedo, light, &grad_albedo, &grad_light);

      LossBreakdown entry = geo;
      entry.photometric = cfg.lambda_pho * pho;
      entry.total = geo.total + entry.photometric;
      result.trace.push_back(entry);

      if (pho < best_pho) {
        best_pho = pho;
        best_albedo = albedo;
        best_light = light;
      }

      const Scalar bias1 = 1.0 - std::pow(kAdamBeta1, iter);
      const Scalar bias2 = 1.0 - std::pow(kAdamBeta2, iter);
      m_albedo = kAdamBeta1 * m_albedo + (1.0 - kAdamBeta1) * grad_albedo;
      v_albedo = kAdamBeta2 * v_albedo +
                 (1.0 - kAdamBeta2) * grad_albedo.cwiseProduct(grad_albedo);
      albedo -= (cfg.stage2_lr / bias1) *
                (m_albedo.array() / ((v_albedo.array() / bias2).sqrt() + kAdamEps))
                    .matrix();
      albedo = albedo.cwiseMax(0.0).cwiseMin(1.0);

      m_light = kAdamBeta1 * m_light + (1.0 - kAdamBeta1) * grad_light;
      v_light = kAdamBeta2 * v_light +
                (1.0 - kAdamBeta2) * grad_light.cwiseProduct(grad_light);
      light -= (cfg.stage2_lr / bias1) *
               (m_light.array() / ((v_light.array() / bias2).sqrt() + kAdamEps))
                   .matrix();
    }
    result.texture.per_vertex_rgb = best_albedo;
    result.lighting.sh_coeffs = best_light;
  }

  result.converged = !result.diverged;
  return result;
}

std::vector<FitResult> fit_scene(const Scene& scene, const HandRig& right_rig,
                                 const HandRig& left_rig, const FitConfig& cfg) {
  cfg.validate();
  const CenterMap targets = scene_targets(scene, cfg.min_iou);
  const std::vector<Detection> detections =
      decode_peaks(targets, cfg.decode_threshold, cfg.max_detections);

  const bool photometric = cfg.stage2_iters > 0 && cfg.lambda_pho > 0.0;

  std::vector<FitResult> results;
  results.reserve(detections.size());
  for (const Detection& det : detections) {
    // Pair the detection with the nearest labeled instance.
    int match = -1;
    Scalar match_dist = std::numeric_limits<Scalar>::infinity();
    for (size_t i = 0; i < scene.instances.size(); ++i) {
      const Scalar d = (scene.instances[i].center - det.center).norm();
      if (d < match_dist) {
        match_dist = d;
        match = static_cast<int>(i);
      }
    }

    Observation obs;
    obs.camera = scene.camera;
    const bool matched = match >= 0 && match_dist <= 2.0 * kGridStride;
    if (matched) {
      obs.keypoints = scene.instances[match].keypoints;
      if (photometric) {
        obs.skin_mask = scene.instances[match].mask;
        obs.image = scene.canvas;
      }
    } else {
      obs.keypoints = detection_keypoints(det);
    }

    const HandRig& rig = det.hand_type == HandType::kLeft ? left_rig : right_rig;
    FitResult result;
    try {
      result = fit_hand(obs, det, rig, cfg);
    } catch (const DegenerateScaleError&) {
      result.diverged = true;
      result.converged = false;
      result.params = init_params(det, scene.camera, cfg);
      result.texture = Texture::constant(rig.vertex_count(), Vec3(0.5, 0.5, 0.5));
      result.lighting = Lighting::ambient(1.0);
    }

    if (matched && scene.instances[match].source && !result.diverged) {
      const SceneInstance& inst = scene.instances[match];
      const HandRig& gt_rig =
          inst.hand_type == HandType::kLeft ? left_rig : right_rig;
      const LbsOutput pred = lbs_forward(rig, result.params);
      const LbsOutput gt = lbs_forward(gt_rig, inst.source->params);
      Keypoints2D pred_2d;
      bool have_2d = true;
      try {
        pred_2d = Keypoints2D::all_visible(project(pred.joints, scene.camera));
      } catch (const BehindCameraError&) {
        have_2d = false;
      }
      result.report = metrics(pred.vertices, pred.joints, gt.vertices, gt.joints,
                              AlignMode::kProcrustes, have_2d ? &pred_2d : nullptr,
                              have_2d ? &inst.keypoints : nullptr);
    }
    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace handforge
