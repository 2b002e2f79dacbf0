#include "edgeadapt/baselines.hpp"

namespace edgeadapt {

namespace {

// Selection rule shared by the oracle and the profiling baseline; accuracies
// may come from a stale snapshot, sizes always from the current record.
Configuration select(const ConfigurationSpace& space,
                     const CostModel& cost_model,
                     const std::vector<double>& bitrate_mb,
                     const std::vector<double>& accuracy,
                     double target_accuracy, double bandwidth_mbps,
                     double duration_s) {
  const double capacity_mb = bandwidth_mbps * duration_s;
  const std::size_t n = space.size();
  if (bitrate_mb.size() != space.compression_settings() ||
      accuracy.size() != n) {
    throw ConfigurationError("segment tables do not match the space");
  }

  bool have_feasible = false;   // fits the link and reaches the target
  bool have_fallback = false;   // fits the link only
  std::size_t best = 0, best_fallback = 0, best_smallest = 0;
  double best_cost = 0.0, best_acc = 0.0;
  double fallback_acc = 0.0, fallback_cost = 0.0;
  double smallest_size = 0.0, smallest_cost = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const Configuration cfg = space.config_at(i);
    const double size = bitrate_mb[space.compression_index(cfg)];
    const double acc = accuracy[i];
    const double cost = cost_model.cost(cfg);

    if (i == 0 || size < smallest_size ||
        (size == smallest_size && cost < smallest_cost)) {
      smallest_size = size;
      smallest_cost = cost;
      best_smallest = i;
    }
    if (size > capacity_mb) continue;

    if (!have_fallback || acc > fallback_acc ||
        (acc == fallback_acc && cost < fallback_cost)) {
      have_fallback = true;
      fallback_acc = acc;
      fallback_cost = cost;
      best_fallback = i;
    }
    if (acc < target_accuracy) continue;

    if (!have_feasible || cost < best_cost ||
        (cost == best_cost && acc > best_acc)) {
      have_feasible = true;
      best_cost = cost;
      best_acc = acc;
      best = i;
    }
  }
  if (have_feasible) return space.config_at(best);
  if (have_fallback) return space.config_at(best_fallback);
  return space.config_at(best_smallest);
}

}  // namespace

Configuration optimal_config(const ConfigurationSpace& space,
                             const CostModel& cost_model,
                             const SegmentRecord& record,
                             double target_accuracy, double bandwidth_mbps) {
  return select(space, cost_model, record.bitrate_mb, record.accuracy,
                target_accuracy, bandwidth_mbps, record.duration_s);
}

PeriodicProfilingPolicy::PeriodicProfilingPolicy(
    const ConfigurationSpace& space, const CostModel& cost_model, int period)
    : space_(space), cost_model_(cost_model), period_(period) {
  if (period <= 0) throw ParameterError("profiling period must be positive");
}

void PeriodicProfilingPolicy::reset() {
  steps_since_profile_ = 0;
  cached_accuracy_.clear();
}

Configuration PeriodicProfilingPolicy::choose(const SegmentRecord& record,
                                              double target_accuracy,
                                              double bandwidth_mbps) {
  if (cached_accuracy_.empty() || steps_since_profile_ >= period_) {
    cached_accuracy_ = record.accuracy;
    steps_since_profile_ = 0;
  }
  ++steps_since_profile_;
  return select(space_, cost_model_, record.bitrate_mb, cached_accuracy_,
                target_accuracy, bandwidth_mbps, record.duration_s);
}

}  // namespace edgeadapt
