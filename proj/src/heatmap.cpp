#include "handforge/heatmap.hpp"

#include <algorithm>
#include <cmath>

namespace handforge {

namespace {

void splat_max(Grid& channel, int peak_x, int peak_y, Scalar sigma) {
  for (Eigen::Index y = 0; y < channel.rows(); ++y) {
    for (Eigen::Index x = 0; x < channel.cols(); ++x) {
      const Scalar dx = static_cast<Scalar>(x) - peak_x;
      const Scalar dy = static_cast<Scalar>(y) - peak_y;
      const Scalar v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      if (v > channel(y, x)) channel(y, x) = v;
    }
  }
}

bool is_local_peak(const Grid& g, Eigen::Index y, Eigen::Index x) {
  const Scalar v = g(y, x);
  for (Eigen::Index dy = -1; dy <= 1; ++dy) {
    for (Eigen::Index dx = -1; dx <= 1; ++dx) {
      const Eigen::Index ny = y + dy, nx = x + dx;
      if (ny < 0 || nx < 0 || ny >= g.rows() || nx >= g.cols()) continue;
      if (g(ny, nx) > v) return false;
    }
  }
  return true;
}

struct Peak {
  Scalar value;
  int y;
  int x;
};

std::vector<Peak> find_peaks(const Grid& g, Scalar threshold, int max_k) {
  std::vector<Peak> peaks;
  for (Eigen::Index y = 0; y < g.rows(); ++y) {
    for (Eigen::Index x = 0; x < g.cols(); ++x) {
      if (g(y, x) >= threshold && is_local_peak(g, y, x)) {
        peaks.push_back({g(y, x), static_cast<int>(y), static_cast<int>(x)});
      }
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (static_cast<int>(peaks.size()) > max_k) peaks.resize(max_k);
  return peaks;
}

Vec2 cell_to_pixel(int x, int y) {
  return Vec2((x + 0.5) * kGridStride, (y + 0.5) * kGridStride);
}

}  // namespace

CenterMap CenterMap::zeros(int image_w, int image_h) {
  if (image_w <= 0 || image_h <= 0) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  CenterMap map;
  map.grid_w = (image_w + kGridStride - 1) / kGridStride;
  map.grid_h = (image_h + kGridStride - 1) / kGridStride;
  map.center = Grid::Zero(map.grid_h, map.grid_w);
  for (auto& g : map.hand_type) g = Grid::Zero(map.grid_h, map.grid_w);
  for (auto& g : map.keypoints) g = Grid::Zero(map.grid_h, map.grid_w);
  return map;
}

void CenterMap::validate() const {
  auto check = [&](const Grid& g, const char* name) {
    if (g.rows() != grid_h || g.cols() != grid_w) {
      throw std::invalid_argument(std::string(name) + " channel has wrong dims");
    }
    if (g.size() > 0 && (g.minCoeff() < 0.0 || g.maxCoeff() > 1.0)) {
      throw std::invalid_argument(std::string(name) + " channel leaves [0, 1]");
    }
  };
  check(center, "center");
  check(hand_type[0], "hand_type");
  check(hand_type[1], "hand_type");
  for (const auto& g : keypoints) check(g, "keypoint");
}

Scalar gaussian_radius(Scalar box_w_px, Scalar box_h_px, Scalar min_iou) {
  if (!(min_iou > 0.0 && min_iou < 1.0)) {
    throw std::invalid_argument("min_iou must lie strictly between 0 and 1");
  }
  if (!(box_w_px > 0.0) || !(box_h_px > 0.0)) {
    throw std::invalid_argument("box dimensions must be positive");
  }
  const Scalar w = box_w_px / kGridStride;
  const Scalar h = box_h_px / kGridStride;
  const Scalar sum = w + h;
  const Scalar area = w * h;

  // Box shifted diagonally by r: IoU = (w-r)(h-r) / (2wh - (w-r)(h-r)).
  const Scalar c1 = area * (1.0 - min_iou) / (1.0 + min_iou);
  const Scalar r_shift = (sum - std::sqrt(sum * sum - 4.0 * c1)) / 2.0;
  // Box shrunk by r on every side: IoU = (w-2r)(h-2r) / wh.
  const Scalar r_shrink =
      (sum - std::sqrt(sum * sum - 4.0 * (1.0 - min_iou) * area)) / 4.0;
  // Box grown by r on every side: IoU = wh / (w+2r)(h+2r).
  const Scalar r_grow =
      (-sum + std::sqrt(sum * sum + 4.0 * (1.0 - min_iou) / min_iou * area)) / 4.0;

  return std::max(1.0, std::min({r_shift, r_shrink, r_grow}));
}

CenterMap encode_targets(const std::vector<Detection>& instances, int image_w,
                         int image_h, Scalar min_iou) {
  CenterMap map = CenterMap::zeros(image_w, image_h);
  for (const Detection& inst : instances) {
    if (inst.center.x() < 0.0 || inst.center.x() >= image_w ||
        inst.center.y() < 0.0 || inst.center.y() >= image_h) {
      throw std::invalid_argument("instance center outside the image bounds");
    }
    const Scalar bw = std::max(inst.bbox[2] - inst.bbox[0], 1.0);
    const Scalar bh = std::max(inst.bbox[3] - inst.bbox[1], 1.0);
    const Scalar radius = gaussian_radius(bw, bh, min_iou);
    const Scalar sigma = radius / 3.0;

    const int px = std::min(static_cast<int>(inst.center.x()) / kGridStride, map.grid_w - 1);
    const int py = std::min(static_cast<int>(inst.center.y()) / kGridStride, map.grid_h - 1);
    splat_max(map.center, px, py, sigma);
    splat_max(map.hand_type[static_cast<int>(inst.hand_type)], px, py, sigma);

    for (int j = 0; j < kNumKeypoints; ++j) {
      if (inst.keypoint_confidence[j] <= 0.0) continue;
      const Scalar u = inst.keypoints(j, 0), v = inst.keypoints(j, 1);
      if (u < 0.0 || u >= image_w || v < 0.0 || v >= image_h) continue;
      const int kx = std::min(static_cast<int>(u) / kGridStride, map.grid_w - 1);
      const int ky = std::min(static_cast<int>(v) / kGridStride, map.grid_h - 1);
      splat_max(map.keypoints[j], kx, ky, sigma);
    }
  }
  return map;
}

std::vector<Detection> decode_peaks(const CenterMap& map, Scalar threshold,
                                    int max_k) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("decode threshold must lie in [0, 1]");
  }
  const auto center_peaks = find_peaks(map.center, threshold, max_k);

  std::vector<Detection> detections;
  detections.reserve(center_peaks.size());
  for (const Peak& p : center_peaks) {
    Detection det;
    det.center = cell_to_pixel(p.x, p.y);
    det.confidence = p.value;
    const Scalar left = map.hand_type[0](p.y, p.x);
    const Scalar right = map.hand_type[1](p.y, p.x);
    det.hand_type = right > left ? HandType::kRight : HandType::kLeft;
    det.type_score = std::max(left, right);
    det.keypoints.rowwise() = det.center.transpose();
    detections.push_back(det);
  }
  if (detections.empty()) return detections;

  // Keypoint channel peaks, each assigned to the nearest detection center.
  for (int j = 0; j < kNumKeypoints; ++j) {
    const auto kp_peaks = find_peaks(map.keypoints[j], threshold, max_k);
    for (const Peak& p : kp_peaks) {
      const Vec2 px = cell_to_pixel(p.x, p.y);
      int best = 0;
      Scalar best_dist = std::numeric_limits<Scalar>::infinity();
      for (size_t d = 0; d < detections.size(); ++d) {
        const Scalar dist = (detections[d].center - px).norm();
        if (dist < best_dist ||
            (dist == best_dist &&
             detections[d].confidence > detections[best].confidence)) {
          best_dist = dist;
          best = static_cast<int>(d);
        }
      }
      Detection& det = detections[best];
      if (p.value > det.keypoint_confidence[j] ||
          (p.value == det.keypoint_confidence[j] &&
           (px - det.center).norm() < (det.keypoints.row(j).transpose() - det.center).norm())) {
        det.keypoints.row(j) = px.transpose();
        det.keypoint_confidence[j] = p.value;
      }
    }
  }

  // Bounding boxes from the gathered keypoints; fall back to one cell.
  for (Detection& det : detections) {
    Scalar x0 = det.center.x() - kGridStride, x1 = det.center.x() + kGridStride;
    Scalar y0 = det.center.y() - kGridStride, y1 = det.center.y() + kGridStride;
    for (int j = 0; j < kNumKeypoints; ++j) {
      if (det.keypoint_confidence[j] <= 0.0) continue;
      x0 = std::min(x0, det.keypoints(j, 0) - 0.5 * kGridStride);
      x1 = std::max(x1, det.keypoints(j, 0) + 0.5 * kGridStride);
      y0 = std::min(y0, det.keypoints(j, 1) - 0.5 * kGridStride);
      y1 = std::max(y1, det.keypoints(j, 1) + 0.5 * kGridStride);
    }
    det.bbox = Vec4(x0, y0, x1, y1);
  }
  return detections;
}

Scalar focal_loss_center(const Grid& pred, const Grid& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("focal loss channel shape mismatch");
  }
  int positives = 0;
  Scalar loss = 0.0;
  for (Eigen::Index y = 0; y < pred.rows(); ++y) {
    for (Eigen::Index x = 0; x < pred.cols(); ++x) {
      const Scalar p = std::clamp(pred(y, x), kFocalEps, 1.0 - kFocalEps);
      const Scalar t = target(y, x);
      if (t == 1.0) {
        ++positives;
        loss -= std::pow(1.0 - p, kFocalGamma) * std::log(p);
      } else {
        loss -= std::pow(1.0 - t, kFocalPenaltyExponent) *
                std::pow(p, kFocalGamma) * std::log(1.0 - p);
      }
    }
  }
  return loss / std::max(positives, 1);
}

Scalar localization_loss(const CenterMap& pred, const CenterMap& gt,
                         const LocalizationWeights& weights) {
  if (pred.grid_w != gt.grid_w || pred.grid_h != gt.grid_h) {
    throw std::invalid_argument("localization loss grid shape mismatch");
  }
  Scalar loss_cp = focal_loss_center(pred.center, gt.center);
  Scalar loss_lr = 0.0;
  for (int t = 0; t < 2; ++t) {
    loss_lr += focal_loss_center(pred.hand_type[t], gt.hand_type[t]);
  }
  Scalar loss_kp = 0.0;
  for (int j = 0; j < kNumKeypoints; ++j) {
    loss_kp += focal_loss_center(pred.keypoints[j], gt.keypoints[j]);
  }
  return weights.cp * loss_cp + weights.lr * loss_lr + weights.kp * loss_kp;
}

}  // namespace handforge
