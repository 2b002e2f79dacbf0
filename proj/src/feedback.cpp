#include "edgeadapt/feedback.hpp"

#include <algorithm>

#include "edgeadapt/rng.hpp"

namespace edgeadapt {

std::vector<double> FeedbackVector::flatten() const {
  std::vector<double> out;
  out.reserve(class_iou.size() + 2);
  out.insert(out.end(), class_iou.begin(), class_iou.end());
  out.push_back(miou);
  out.push_back(drop_flag);
  return out;
}

FeedbackVector FeedbackVector::zeros(int num_classes) {
  FeedbackVector fb;
  fb.class_iou.assign(num_classes, 0.0);
  return fb;
}

FeedbackVector feedback_for(const FeedbackParams& params,
                            DeliveryStatus prev_status,
                            const ConfigurationSpace& space,
                            const Configuration& prev_cfg,
                            const SegmentRecord& prev_record) {
  if (params.num_classes <= 0) {
    throw ParameterError("feedback needs at least one class");
  }
  if (prev_status == DeliveryStatus::Dropped) {
    FeedbackVector fb = FeedbackVector::zeros(params.num_classes);
    fb.drop_flag = 1.0;
    return fb;
  }
  const std::size_t cfg_index = space.index_of(prev_cfg);  // throws if absent
  const double miou = prev_record.accuracy[cfg_index];

  FeedbackVector fb;
  fb.miou = miou;
  fb.class_iou.reserve(params.num_classes);
  for (int c = 0; c < params.num_classes; ++c) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(prev_record.segment_id) << 32) ^
        (static_cast<std::uint64_t>(cfg_index) << 8) ^
        static_cast<std::uint64_t>(c);
    const double u = hash_unit(key);
    fb.class_iou.push_back(
        std::clamp(miou * (1.0 + params.class_spread * u), 0.0, 1.0));
  }
  return fb;
}

}  // namespace edgeadapt
