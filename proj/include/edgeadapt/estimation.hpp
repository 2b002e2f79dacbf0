#pragma once

#include <utility>
#include <vector>

#include "edgeadapt/configspace.hpp"
#include "edgeadapt/rng.hpp"
#include "edgeadapt/traces.hpp"

namespace edgeadapt {

// Per-segment bitrate prediction, decomposed as one base size (the anchor
// compression setting) and per-setting ratios relative to it. The base
// setting's ratio is identically 1.
struct BitrateEstimate {
  double base_mb = 0.0;
  std::vector<double> ratios;  // indexed by compression_index

  double size_mb(std::size_t compression_index) const {
    return base_mb * ratios[compression_index];
  }
};

// Perfect-information estimator: reproduces the record's table exactly.
BitrateEstimate estimate_oracle(const ConfigurationSpace& space,
                                const SegmentRecord& record);

// Multiplicative log-normal noise on the base and on each non-base ratio,
// with sigma calibrated so the mean relative error of the reconstructed
// per-setting sizes matches a target. rel_error = 0 degenerates to the
// oracle.
class NoisyEstimator {
 public:
  NoisyEstimator(const ConfigurationSpace& space, double rel_error);

  BitrateEstimate estimate(const SegmentRecord& record, Rng& rng) const;

  double sigma() const { return sigma_; }

  // E|exp(sigma * Z) - 1| for Z ~ N(0,1): closed form used for calibration.
  static double lognormal_mean_rel_error(double sigma);

 private:
  std::size_t settings_;
  std::size_t base_index_;
  double sigma_;
};

// First-order autoregressive baseline: base size forecast from the previous
// segment's observed base, per-setting ratios from an offline-learned table.
struct ARModel {
  double intercept = 0.0;
  double coefficient = 0.0;
  std::vector<double> ratio_table;  // indexed by compression_index
};

// Least-squares fit of x_t = c + phi * x_{t-1}. A zero-variance predictor
// series degenerates to (mean, 0).
std::pair<double, double> fit_ar1(const std::vector<double>& series);

std::vector<double> fit_ratio_table(const ConfigurationSpace& space,
                                    const TraceSet& train);

ARModel fit_ar_model(const ConfigurationSpace& space, const TraceSet& train);

// Positivity floor for AR base predictions.
inline constexpr double kArBaseFloorMb = 1e-6;

BitrateEstimate estimate_ar(const ARModel& model, double prev_base_mb);

// Compact scene-dynamics descriptor handed to the policy.
struct ContentFeatures {
  static constexpr int kDim = 5;
  double base_mb = 0.0;
  double mean_ratio = 0.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double base_delta_mb = 0.0;  // 0 when there is no previous estimate
};

ContentFeatures content_features(const BitrateEstimate& est,
                                 const BitrateEstimate* prev);

}  // namespace edgeadapt
