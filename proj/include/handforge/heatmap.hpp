#pragma once

#include <array>
#include <vector>

#include "handforge/types.hpp"

namespace handforge {

/// Cell size of the localization grid relative to the input image.
inline constexpr int kGridStride = 8;
inline constexpr Scalar kFocalGamma = 2.0;
inline constexpr Scalar kFocalPenaltyExponent = 4.0;
inline constexpr Scalar kFocalEps = 1e-7;
inline constexpr Scalar kDefaultMinIou = 0.7;

/// Multi-channel localization grid of shape ceil(H/8) x ceil(W/8):
/// one hand-center channel, two hand-type channels (0 = left, 1 = right)
/// and 21 keypoint channels. All values live in [0, 1].
struct CenterMap {
  int grid_w = 0;
  int grid_h = 0;
  Grid center;
  std::array<Grid, 2> hand_type;
  std::array<Grid, kNumKeypoints> keypoints;

  static CenterMap zeros(int image_w, int image_h);

  void validate() const;
};

/// One localized hand, either ground truth or decoded from a CenterMap.
/// Keypoint confidence doubles as a visibility flag for ground truth
/// (1 = visible, 0 = not encoded / not decoded).
struct Detection {
  Vec2 center = Vec2::Zero();          // full-image pixels
  Scalar confidence = 1.0;
  HandType hand_type = HandType::kRight;
  Scalar type_score = 1.0;
  PointCloud2 keypoints = PointCloud2::Zero(kNumKeypoints, 2);
  VecX keypoint_confidence = VecX::Zero(kNumKeypoints);
  Vec4 bbox = Vec4::Zero();            // x0, y0, x1, y1 pixels
};

/// Gaussian splat radius in grid cells for a box of the given pixel size:
/// the minimum of the shrunk-box, shifted-box and enclosing-box quadratic
/// roots that keep IoU >= min_iou, clamped to at least one cell.
Scalar gaussian_radius(Scalar box_w_px, Scalar box_h_px, Scalar min_iou);

/// Encodes ground-truth instances into Gaussian targets. Peak cells are
/// exactly 1; overlapping splats combine by pointwise max. Hand-type and
/// keypoint channels receive the same per-instance splat.
CenterMap encode_targets(const std::vector<Detection>& instances, int image_w,
                         int image_h, Scalar min_iou = kDefaultMinIou);

/// Peak decoding: a cell is a peak iff it equals the max of its 3x3
/// neighborhood and clears the threshold. Keypoint channel peaks are
/// assigned to the nearest detection center; distance ties go to the
/// higher-confidence detection.
std::vector<Detection> decode_peaks(const CenterMap& map, Scalar threshold,
                                    int max_k);

/// Penalty-reduced pixel-wise focal loss (gamma = 2) of one channel,
/// normalized by the number of positive cells. Non-positive cells are
/// down-weighted by (1 - target)^4.
Scalar focal_loss_center(const Grid& pred, const Grid& target);

struct LocalizationWeights {
  Scalar cp = 1.0;
  Scalar lr = 1.0;
  Scalar kp = 1.0;
};

/// Weighted sum of the per-channel focal losses of all 24 channels.
Scalar localization_loss(const CenterMap& pred, const CenterMap& gt,
                         const LocalizationWeights& weights);

}  // namespace handforge
