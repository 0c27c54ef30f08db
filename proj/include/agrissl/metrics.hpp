#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "agrissl/image.hpp"

namespace agrissl::metrics {

enum ClassId : std::uint8_t { kSoil = 0, kCrop = 1, kWeed = 2 };
inline constexpr int kNumClasses = 3;

/// Per-pixel class ids in {0, 1, 2}.
class LabelMap {
 public:
  explicit LabelMap(Plane<std::uint8_t> labels);
  LabelMap(int width, int height, std::uint8_t fill = kSoil);

  int width() const noexcept { return labels_.width(); }
  int height() const noexcept { return labels_.height(); }
  const Plane<std::uint8_t>& plane() const noexcept { return labels_; }
  std::uint8_t at(int x, int y) const noexcept { return labels_.at(x, y); }
  void set(int x, int y, std::uint8_t id);

 private:
  Plane<std::uint8_t> labels_;
};

/// Entry (i, j): pixels with ground truth i predicted as j.
using ConfusionMatrix = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;

ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& gt);
void accumulate(ConfusionMatrix& into, const ConfusionMatrix& cm);

/// TP / (TP + FP + FN); nullopt for classes absent from both maps.
std::array<std::optional<double>, kNumClasses> per_class_iou(const ConfusionMatrix& cm);

/// Mean IoU over present classes. Throws ParameterError when the matrix is empty.
double miou(const ConfusionMatrix& cm);

/// Means over present classes; a present class that is never predicted has
/// precision 0, one absent from the ground truth has recall 0.
double mean_precision(const ConfusionMatrix& cm);
double mean_recall(const ConfusionMatrix& cm);

struct Instance {
  Plane<std::uint8_t> mask;  // nonzero = inside
  std::optional<double> score;
};

using InstanceSet = std::vector<Instance>;

double mask_iou(const Plane<std::uint8_t>& a, const Plane<std::uint8_t>& b);

struct InstanceScores {
  double ap = 0.0;
  double ar = 0.0;
  std::size_t matched = 0;
};

/// Order in which predictions are matched: descending score (stable), with
/// unscored predictions after scored ones in input order.
std::vector<std::size_t> match_order(const InstanceSet& pred);

/// Greedy single-threshold matching. Each prediction in match_order takes
/// the unmatched ground-truth mask of highest IoU >= threshold (ties: lowest
/// index). AP = matched / |pred|, AR = matched / |gt|; both 1 when both sets
/// are empty, both 0 when exactly one of them is.
InstanceScores instance_ap_ar(const InstanceSet& pred, const InstanceSet& gt,
                              double iou_threshold = 0.5);

std::int64_t abs_dic(std::int64_t pred_count, std::int64_t gt_count);

/// Mean |DiC| over (pred, gt) count pairs.
double mean_abs_dic(const std::vector<std::pair<std::int64_t, std::int64_t>>& counts);

}  // namespace agrissl::metrics
