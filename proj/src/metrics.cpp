#include "agrissl/metrics.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

namespace agrissl::metrics {

LabelMap::LabelMap(Plane<std::uint8_t> labels) : labels_(std::move(labels)) {
  for (const auto v : labels_.data()) {
    if (v >= kNumClasses) {
      throw ParameterError("label map contains class id " + std::to_string(v) + " outside {0,1,2}");
    }
  }
}

LabelMap::LabelMap(int width, int height, std::uint8_t fill) : labels_(width, height, fill) {
  if (fill >= kNumClasses) throw ParameterError("label fill outside {0,1,2}");
}

void LabelMap::set(int x, int y, std::uint8_t id) {
  if (id >= kNumClasses) throw ParameterError("class id outside {0,1,2}");
  labels_.at(x, y) = id;
}

ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& gt) {
  if (!same_shape(pred, gt)) throw ShapeError("confusion_matrix: label maps differ in size");
  ConfusionMatrix cm{};
  const auto p = pred.plane().data();
  const auto g = gt.plane().data();
  for (std::size_t i = 0; i < p.size(); ++i) ++cm[g[i]][p[i]];
  return cm;
}

void accumulate(ConfusionMatrix& into, const ConfusionMatrix& cm) {
  for (int i = 0; i < kNumClasses; ++i) {
    for (int j = 0; j < kNumClasses; ++j) into[i][j] += cm[i][j];
  }
}

namespace {

struct ClassCounts {
  std::int64_t tp = 0, fp = 0, fn = 0;
  bool present() const { return tp + fp + fn > 0; }
};

ClassCounts counts(const ConfusionMatrix& cm, int c) {
  ClassCounts k;
  k.tp = cm[c][c];
  for (int o = 0; o < kNumClasses; ++o) {
    if (o == c) continue;
    k.fp += cm[o][c];
    k.fn += cm[c][o];
  }
  return k;
}

template <typename Fn>
double mean_over_present(const ConfusionMatrix& cm, Fn&& per_class) {
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassCounts k = counts(cm, c);
    if (!k.present()) continue;
    sum += per_class(k);
    ++present;
  }
  if (present == 0) throw ParameterError("metric undefined: no class present in prediction or ground truth");
  return sum / present;
}

}  // namespace

std::array<std::optional<double>, kNumClasses> per_class_iou(const ConfusionMatrix& cm) {
  std::array<std::optional<double>, kNumClasses> out;
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassCounts k = counts(cm, c);
    if (k.present()) out[c] = static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp + k.fn);
  }
  return out;
}

double miou(const ConfusionMatrix& cm) {
  return mean_over_present(cm, [](const ClassCounts& k) {
    return static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp + k.fn);
  });
}

double mean_precision(const ConfusionMatrix& cm) {
  return mean_over_present(cm, [](const ClassCounts& k) {
    return k.tp + k.fp == 0 ? 0.0 : static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp);
  });
}

double mean_recall(const ConfusionMatrix& cm) {
  return mean_over_present(cm, [](const ClassCounts& k) {
    return k.tp + k.fn == 0 ? 0.0 : static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn);
  });
}

double mask_iou(const Plane<std::uint8_t>& a, const Plane<std::uint8_t>& b) {
  if (!same_shape(a, b)) throw ShapeError("mask_iou: masks differ in size");
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const bool x = da[i] != 0;
    const bool y = db[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::size_t> match_order(const InstanceSet& pred) {
  std::vector<std::size_t> order(pred.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = pred[a].score;
    const auto& sb = pred[b].score;
    if (sa && sb) return *sa > *sb;
    return sa.has_value() && !sb.has_value();
  });
  return order;
}

InstanceScores instance_ap_ar(const InstanceSet& pred, const InstanceSet& gt, double iou_threshold) {
  InstanceScores s;
  if (pred.empty() && gt.empty()) {
    s.ap = s.ar = 1.0;
    return s;
  }
  if (pred.empty() || gt.empty()) return s;

  std::vector<bool> taken(gt.size(), false);
  for (const std::size_t p : match_order(pred)) {
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      const double iou = mask_iou(pred[p].mask, gt[g].mask);
      if (iou >= iou_threshold && iou > best_iou) {
        best = g;
        best_iou = iou;
      }
    }
    if (best) {
      taken[*best] = true;
      ++s.matched;
    }
  }
  s.ap = static_cast<double>(s.matched) / static_cast<double>(pred.size());
  s.ar = static_cast<double>(s.matched) / static_cast<double>(gt.size());
  return s;
}

std::int64_t abs_dic(std::int64_t pred_count, std::int64_t gt_count) {
  if (pred_count < 0 || gt_count < 0) throw ParameterError("abs_dic: counts must be >= 0");
  return std::llabs(pred_count - gt_count);
}

double mean_abs_dic(const std::vector<std::pair<std::int64_t, std::int64_t>>& counts) {
  if (counts.empty()) return 0.0;
  std::int64_t total = 0;
  for (const auto& [p, g] : counts) total += abs_dic(p, g);
  return static_cast<double>(total) / static_cast<double>(counts.size());
}

}  // namespace agrissl::metrics
