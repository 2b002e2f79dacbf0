#include "edgeadapt/configspace.hpp"

#include <cmath>
#include <string>

namespace edgeadapt {

ConfigurationSpace::ConfigurationSpace(std::vector<double> resolutions,
                                       std::vector<int> qps,
                                       std::vector<int> model_versions)
    : resolutions_(std::move(resolutions)),
      qps_(std::move(qps)),
      model_versions_(std::move(model_versions)) {
  if (resolutions_.empty() || qps_.empty() || model_versions_.empty()) {
    throw ConfigurationError("configuration space dimension is empty");
  }
  for (std::size_t i = 1; i < resolutions_.size(); ++i) {
    if (resolutions_[i] >= resolutions_[i - 1]) {
      throw ConfigurationError("resolutions must be strictly descending");
    }
  }
  for (std::size_t i = 1; i < qps_.size(); ++i) {
    if (qps_[i] <= qps_[i - 1]) {
      throw ConfigurationError("qps must be strictly ascending");
    }
  }
  for (std::size_t i = 1; i < model_versions_.size(); ++i) {
    if (model_versions_[i] <= model_versions_[i - 1]) {
      throw ConfigurationError("model versions must be strictly ascending");
    }
  }
  if (resolutions_.front() <= 0 || resolutions_.back() <= 0) {
    throw ConfigurationError("resolution scales must be positive");
  }
}

Configuration ConfigurationSpace::config_at(std::size_t flat_index) const {
  if (flat_index >= size()) {
    throw ConfigurationError("configuration index " +
                             std::to_string(flat_index) + " out of range");
  }
  const std::size_t per_version = compression_settings();
  const std::size_t v = flat_index / per_version;
  const std::size_t rest = flat_index % per_version;
  const std::size_t r = rest / qps_.size();
  const std::size_t q = rest % qps_.size();
  return {resolutions_[r], qps_[q], model_versions_[v]};
}

std::size_t ConfigurationSpace::index_of(const Configuration& cfg) const {
  std::size_t v = model_versions_.size();
  for (std::size_t i = 0; i < model_versions_.size(); ++i) {
    if (model_versions_[i] == cfg.model_version) v = i;
  }
  if (v == model_versions_.size()) {
    throw ConfigurationError("model version not in space");
  }
  return v * compression_settings() + compression_index(cfg);
}

std::size_t ConfigurationSpace::compression_index(double resolution_scale,
                                                  int qp) const {
  std::size_t r = resolutions_.size();
  for (std::size_t i = 0; i < resolutions_.size(); ++i) {
    if (resolutions_[i] == resolution_scale) r = i;
  }
  if (r == resolutions_.size()) {
    throw ConfigurationError("resolution scale not in space");
  }
  std::size_t q = qps_.size();
  for (std::size_t i = 0; i < qps_.size(); ++i) {
    if (qps_[i] == qp) q = i;
  }
  if (q == qps_.size()) {
    throw ConfigurationError("qp not in space");
  }
  return r * qps_.size() + q;
}

std::vector<Configuration> ConfigurationSpace::enumerate() const {
  std::vector<Configuration> out;
  out.reserve(size());
  for (int v : model_versions_) {
    for (double r : resolutions_) {
      for (int q : qps_) {
        out.push_back({r, q, v});
      }
    }
  }
  return out;
}

CostModel::CostModel(std::map<int, double> model_base_cost,
                     double resolution_exponent)
    : model_base_cost_(std::move(model_base_cost)),
      resolution_exponent_(resolution_exponent) {
  if (model_base_cost_.empty()) {
    throw ConfigurationError("cost model has no model versions");
  }
  double prev = 0.0;
  bool first = true;
  for (const auto& [version, cost] : model_base_cost_) {
    if (cost <= 0.0) {
      throw ConfigurationError("model base cost must be positive");
    }
    if (!first && cost >= prev) {
      throw ConfigurationError(
          "model base cost must be strictly decreasing in version");
    }
    prev = cost;
    first = false;
  }
  // Normalization convention: the most expensive model at full resolution
  // defines cost 1.0.
  if (model_base_cost_.begin()->second != 1.0) {
    throw ConfigurationError("base cost of the lowest model version must be 1");
  }
}

double CostModel::cost(const Configuration& cfg) const {
  const auto it = model_base_cost_.find(cfg.model_version);
  if (it == model_base_cost_.end()) {
    throw ConfigurationError("model version " +
                             std::to_string(cfg.model_version) +
                             " not in cost model");
  }
  return it->second * std::pow(cfg.resolution_scale, resolution_exponent_);
}

}  // namespace edgeadapt
