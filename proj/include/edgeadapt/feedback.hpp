#pragma once

#include <vector>

#include "edgeadapt/configspace.hpp"
#include "edgeadapt/linksim.hpp"
#include "edgeadapt/traces.hpp"

namespace edgeadapt {

// Server-side performance feedback about the previously predicted segment.
// Always one segment stale: the vector consumed at step i describes step i-1.
struct FeedbackVector {
  std::vector<double> class_iou;  // length C, absent classes encoded as 0
  double miou = 0.0;
  double drop_flag = 0.0;  // 1 when the previous segment was dropped

  int dim() const { return static_cast<int>(class_iou.size()) + 2; }
  std::vector<double> flatten() const;

  static FeedbackVector zeros(int num_classes);
};

struct FeedbackParams {
  int num_classes = 8;
  // Relative dispersion of synthetic per-class IoUs around the segment mIoU.
  double class_spread = 0.3;
};

// Oracle feedback for a delivered segment, or the zero vector with the drop
// flag set. Per-class IoUs are a deterministic spread around the trace's
// ground-truth mIoU, keyed on (segment, configuration, class), so feedback
// is a pure function of the previous step.
FeedbackVector feedback_for(const FeedbackParams& params,
                            DeliveryStatus prev_status,
                            const ConfigurationSpace& space,
                            const Configuration& prev_cfg,
                            const SegmentRecord& prev_record);

}  // namespace edgeadapt
