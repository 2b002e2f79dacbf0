#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "edgeadapt/errors.hpp"

namespace edgeadapt {

// One streaming/inference configuration: frame resolution scaling factor,
// H.264 quantization parameter, and edge model version.
struct Configuration {
  double resolution_scale = 1.0;
  int qp = 20;
  int model_version = 0;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

// The discrete action space. Defaults give 3 resolutions x 6 QPs x 5 model
// versions = 90 configurations. Enumeration is lexicographic in
// (model version, resolution, qp); compression settings (resolution, qp)
// enumerate resolution-major.
class ConfigurationSpace {
 public:
  ConfigurationSpace()
      : ConfigurationSpace({1.0, 0.75, 0.5}, {20, 22, 24, 26, 28, 30},
                           {0, 1, 2, 3, 4}) {}

  ConfigurationSpace(std::vector<double> resolutions, std::vector<int> qps,
                     std::vector<int> model_versions);

  const std::vector<double>& resolutions() const { return resolutions_; }
  const std::vector<int>& qps() const { return qps_; }
  const std::vector<int>& model_versions() const { return model_versions_; }

  // Number of full configurations (|res| * |qp| * |versions|).
  std::size_t size() const {
    return resolutions_.size() * qps_.size() * model_versions_.size();
  }
  // Number of compression settings (|res| * |qp|); bitrate is independent
  // of the model version.
  std::size_t compression_settings() const {
    return resolutions_.size() * qps_.size();
  }

  Configuration config_at(std::size_t flat_index) const;
  std::size_t index_of(const Configuration& cfg) const;

  // Index into per-compression-setting tables (resolution-major).
  std::size_t compression_index(double resolution_scale, int qp) const;
  std::size_t compression_index(const Configuration& cfg) const {
    return compression_index(cfg.resolution_scale, cfg.qp);
  }

  // The ground-truth anchor: highest resolution, lowest qp, version 0 slot.
  Configuration anchor() const {
    return {resolutions_.front(), qps_.front(), model_versions_.front()};
  }

  std::vector<Configuration> enumerate() const;

  friend bool operator==(const ConfigurationSpace&,
                         const ConfigurationSpace&) = default;

 private:
  std::vector<double> resolutions_;   // descending, max first
  std::vector<int> qps_;              // ascending, min first
  std::vector<int> model_versions_;   // ascending
};

// Normalized edge inference cost C(r, v) = base_cost[v] * r^exponent.
// Version 0 at full resolution costs exactly 1.0; QP does not enter.
class CostModel {
 public:
  CostModel()
      : CostModel({{0, 1.0}, {1, 0.5}, {2, 0.25}, {3, 0.125}, {4, 0.0625}},
                  2.0) {}

  CostModel(std::map<int, double> model_base_cost, double resolution_exponent);

  double cost(const Configuration& cfg) const;

  const std::map<int, double>& model_base_cost() const {
    return model_base_cost_;
  }
  double resolution_exponent() const { return resolution_exponent_; }

 private:
  std::map<int, double> model_base_cost_;
  double resolution_exponent_;
};

}  // namespace edgeadapt
