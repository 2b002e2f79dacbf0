#pragma once

#include "edgeadapt/configspace.hpp"
#include "edgeadapt/traces.hpp"

namespace edgeadapt {

// Perfect-information selection for one segment:
//   1. among bandwidth-feasible configurations (size <= B*T) that reach the
//      target accuracy, the cheapest one (ties: higher accuracy, then lower
//      flat index);
//   2. if the target is unreachable, the bandwidth-feasible configuration
//      with maximum accuracy (ties: lower cost, then lower flat index);
//   3. if nothing fits the link at all, the smallest configuration to keep
//      the forced drop as short as possible (ties: lower cost, then lower
//      flat index).
Configuration optimal_config(const ConfigurationSpace& space,
                             const CostModel& cost_model,
                             const SegmentRecord& record,
                             double target_accuracy, double bandwidth_mbps);

// Snapshots one segment's accuracy table every `period` segments and reuses
// it in between; bitrates stay ground truth (the baseline's privilege).
class PeriodicProfilingPolicy {
 public:
  PeriodicProfilingPolicy(const ConfigurationSpace& space,
                          const CostModel& cost_model, int period = 40);

  Configuration choose(const SegmentRecord& record, double target_accuracy,
                       double bandwidth_mbps);

  void reset();
  int period() const { return period_; }

 private:
  const ConfigurationSpace& space_;
  const CostModel& cost_model_;
  int period_;
  int steps_since_profile_ = 0;
  std::vector<double> cached_accuracy_;
};

// Sanity baseline: the same configuration regardless of state.
struct FixedPolicy {
  Configuration cfg;

  Configuration choose(const SegmentRecord&, double, double) const {
    return cfg;
  }
};

}  // namespace edgeadapt
