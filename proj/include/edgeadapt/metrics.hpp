#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "edgeadapt/errors.hpp"

namespace edgeadapt {

// A dense grid of class labels, row-major.
struct LabelGrid {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
};

// Square count matrix; entry (g, p) counts pixels with ground truth g
// predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return num_classes_; }
  std::int64_t at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred];
  }
  std::int64_t& at(int gt, int pred) {
    return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred];
  }
  std::int64_t total() const;

 private:
  int num_classes_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion_matrix(const LabelGrid& pred, const LabelGrid& gt,
                                 int num_classes);

// Per-class intersection over union. Classes absent from both prediction and
// ground truth have no defined IoU and come back as nullopt.
std::vector<std::optional<double>> class_iou(const ConfusionMatrix& m);

// Unweighted mean of present-class IoUs. Throws UndefinedMetricError when no
// class is present at all.
double mean_iou(const ConfusionMatrix& m);

// Fraction of pixels predicted correctly. Kept alongside mean_iou because the
// two disagree in general: mIoU weights pixels by their class size.
double pixel_accuracy(const ConfusionMatrix& m);

}  // namespace edgeadapt
