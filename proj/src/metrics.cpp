#include "edgeadapt/metrics.hpp"

#include <string>

namespace edgeadapt {

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
  if (num_classes <= 0) {
    throw ParameterError("confusion matrix needs at least one class");
  }
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (std::int64_t c : counts_) t += c;
  return t;
}

ConfusionMatrix confusion_matrix(const LabelGrid& pred, const LabelGrid& gt,
                                 int num_classes) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw ParameterError("label grid dimensions differ");
  }
  const std::size_t n = static_cast<std::size_t>(gt.width) * gt.height;
  if (pred.labels.size() != n || gt.labels.size() != n) {
    throw ParameterError("label grid size does not match width*height");
  }
  ConfusionMatrix m(num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    const int g = gt.labels[i];
    const int p = pred.labels[i];
    if (g < 0 || g >= num_classes || p < 0 || p >= num_classes) {
      throw ParameterError("label " + std::to_string(g < 0 || g >= num_classes ? g : p) +
                           " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++m.at(g, p);
  }
  return m;
}

std::vector<std::optional<double>> class_iou(const ConfusionMatrix& m) {
  const int C = m.num_classes();
  std::vector<std::optional<double>> out(C);
  for (int c = 0; c < C; ++c) {
    std::int64_t row = 0, col = 0;
    for (int k = 0; k < C; ++k) {
      row += m.at(c, k);
      col += m.at(k, c);
    }
    const std::int64_t uni = row + col - m.at(c, c);
    if (uni == 0) continue;  // absent from both pred and gt
    out[c] = static_cast<double>(m.at(c, c)) / static_cast<double>(uni);
  }
  return out;
}

double mean_iou(const ConfusionMatrix& m) {
  const auto ious = class_iou(m);
  double sum = 0.0;
  int present = 0;
  for (const auto& iou : ious) {
    if (iou) {
      sum += *iou;
      ++present;
    }
  }
  if (present == 0) {
    throw UndefinedMetricError("mean IoU undefined: no class present");
  }
  return sum / present;
}

double pixel_accuracy(const ConfusionMatrix& m) {
  const std::int64_t t = m.total();
  if (t == 0) {
    throw UndefinedMetricError("pixel accuracy undefined: empty grids");
  }
  std::int64_t diag = 0;
  for (int c = 0; c < m.num_classes(); ++c) diag += m.at(c, c);
  return static_cast<double>(diag) / static_cast<double>(t);
}

}  // namespace edgeadapt
