#include "edgeadapt/estimation.hpp"

#include <algorithm>
#include <cmath>

namespace edgeadapt {

namespace {

BitrateEstimate oracle_from_table(const std::vector<double>& bitrate_mb,
                                  std::size_t settings,
                                  std::size_t base_index) {
  if (bitrate_mb.size() != settings) {
    throw ConfigurationError("segment bitrate table does not match space");
  }
  BitrateEstimate est;
  est.base_mb = bitrate_mb[base_index];
  est.ratios.reserve(bitrate_mb.size());
  for (double size : bitrate_mb) {
    est.ratios.push_back(size / est.base_mb);
  }
  est.ratios[base_index] = 1.0;
  return est;
}

}  // namespace

BitrateEstimate estimate_oracle(const ConfigurationSpace& space,
                                const SegmentRecord& record) {
  return oracle_from_table(
      record.bitrate_mb, space.compression_settings(),
      space.compression_index(space.resolutions().front(),
                              space.qps().front()));
}

double NoisyEstimator::lognormal_mean_rel_error(double sigma) {
  // E|exp(sigma*Z) - 1| = exp(sigma^2/2) * erf(sigma / sqrt(2))
  return std::exp(0.5 * sigma * sigma) * std::erf(sigma / std::sqrt(2.0));
}

NoisyEstimator::NoisyEstimator(const ConfigurationSpace& space,
                               double rel_error)
    : settings_(space.compression_settings()),
      base_index_(space.compression_index(space.resolutions().front(),
                                          space.qps().front())) {
  if (rel_error < 0) throw ParameterError("rel_error must be >= 0");
  if (rel_error == 0) {
    sigma_ = 0.0;
    return;
  }
  // Reconstructed size error: the base setting sees one noise factor, every
  // other setting sees two independent ones (base * ratio), i.e. a
  // log-normal with sigma*sqrt(2). Calibrate the average across settings.
  const double k = static_cast<double>(settings_);
  auto mean_err = [&](double s) {
    return (lognormal_mean_rel_error(s) +
            (k - 1.0) * lognormal_mean_rel_error(s * std::sqrt(2.0))) /
           k;
  };
  double lo = 0.0, hi = 1.0;
  while (mean_err(hi) < rel_error) hi *= 2.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (mean_err(mid) < rel_error ? lo : hi) = mid;
  }
  sigma_ = 0.5 * (lo + hi);
}

BitrateEstimate NoisyEstimator::estimate(const SegmentRecord& record,
                                         Rng& rng) const {
  BitrateEstimate est =
      oracle_from_table(record.bitrate_mb, settings_, base_index_);
  if (sigma_ == 0.0) return est;
  std::normal_distribution<double> normal(0.0, 1.0);
  est.base_mb *= std::exp(sigma_ * normal(rng));
  for (std::size_t j = 0; j < est.ratios.size(); ++j) {
    if (j == base_index_) continue;
    est.ratios[j] *= std::exp(sigma_ * normal(rng));
  }
  return est;
}

std::pair<double, double> fit_ar1(const std::vector<double>& series) {
  if (series.size() < 3) {
    throw ParameterError("AR(1) fit needs at least 3 samples");
  }
  const std::size_t n = series.size() - 1;  // (x_{t-1}, x_t) pairs
  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    mx += series[t];
    my += series[t + 1];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    sxx += (series[t] - mx) * (series[t] - mx);
    sxy += (series[t] - mx) * (series[t + 1] - my);
  }
  if (sxx <= 0.0) {
    double mean = 0.0;
    for (double v : series) mean += v;
    return {mean / series.size(), 0.0};
  }
  const double phi = sxy / sxx;
  return {my - phi * mx, phi};
}

std::vector<double> fit_ratio_table(const ConfigurationSpace& space,
                                    const TraceSet& train) {
  if (train.segments.empty()) {
    throw ParameterError("cannot fit ratio table on an empty trace");
  }
  const std::size_t k = space.compression_settings();
  const std::size_t base_index =
      space.compression_index(space.resolutions().front(), space.qps().front());
  std::vector<double> table(k, 0.0);
  for (const SegmentRecord& rec : train.segments) {
    if (rec.bitrate_mb.size() != k) {
      throw ConfigurationError("segment bitrate table does not match space");
    }
    const double base = rec.bitrate_mb[base_index];
    for (std::size_t j = 0; j < k; ++j) {
      table[j] += rec.bitrate_mb[j] / base;
    }
  }
  for (double& v : table) v /= static_cast<double>(train.segments.size());
  table[base_index] = 1.0;
  return table;
}

ARModel fit_ar_model(const ConfigurationSpace& space, const TraceSet& train) {
  const std::size_t base_index =
      space.compression_index(space.resolutions().front(), space.qps().front());
  std::vector<double> base_series;
  base_series.reserve(train.segments.size());
  for (const SegmentRecord& rec : train.segments) {
    base_series.push_back(rec.bitrate_mb[base_index]);
  }
  ARModel model;
  std::tie(model.intercept, model.coefficient) = fit_ar1(base_series);
  model.ratio_table = fit_ratio_table(space, train);
  return model;
}

BitrateEstimate estimate_ar(const ARModel& model, double prev_base_mb) {
  if (prev_base_mb <= 0) throw ParameterError("prev_base_mb must be > 0");
  BitrateEstimate est;
  est.base_mb = std::max(model.intercept + model.coefficient * prev_base_mb,
                         kArBaseFloorMb);
  est.ratios = model.ratio_table;
  return est;
}

ContentFeatures content_features(const BitrateEstimate& est,
                                 const BitrateEstimate* prev) {
  ContentFeatures f;
  f.base_mb = est.base_mb;
  double sum = 0.0;
  double lo = est.ratios.empty() ? 0.0 : est.ratios.front();
  double hi = lo;
  for (double r : est.ratios) {
    sum += r;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  f.mean_ratio = est.ratios.empty() ? 0.0 : sum / est.ratios.size();
  f.min_ratio = lo;
  f.max_ratio = hi;
  f.base_delta_mb = prev ? est.base_mb - prev->base_mb : 0.0;
  return f;
}

}  // namespace edgeadapt
