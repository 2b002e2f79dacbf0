#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgeadapt/configspace.hpp"
#include "edgeadapt/errors.hpp"

namespace edgeadapt {

// Ground truth for one T-second segment: its encoded size under every
// compression setting and its achieved mIoU under every full configuration.
struct SegmentRecord {
  int segment_id = 0;
  double duration_s = 1.0;
  // Indexed by ConfigurationSpace::compression_index (resolution-major).
  std::vector<double> bitrate_mb;
  // Indexed by ConfigurationSpace flat configuration index.
  std::vector<double> accuracy;
  // Generator-internal dynamics, exposed as content descriptors.
  std::vector<double> scene_latents;

  double bitrate(const ConfigurationSpace& space,
                 const Configuration& cfg) const {
    return bitrate_mb[space.compression_index(cfg)];
  }
  double accuracy_of(const ConfigurationSpace& space,
                     const Configuration& cfg) const {
    return accuracy[space.index_of(cfg)];
  }

  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

struct TraceSet {
  ConfigurationSpace space;
  int fps = 15;
  std::vector<SegmentRecord> segments;
  // Generator parameters and seed (or source file), recorded verbatim so a
  // trace is reproducible from its own header.
  std::string provenance;

  friend bool operator==(const TraceSet&, const TraceSet&) = default;
};

// Per-slot link bandwidth in MB per second; wraps around when a run is
// longer than the trace.
struct BandwidthTrace {
  std::vector<double> mbps;

  double at(std::size_t slot) const { return mbps[slot % mbps.size()]; }

  friend bool operator==(const BandwidthTrace&, const BandwidthTrace&) = default;
};

// Synthetic trace generator. Closed forms:
//   size(r, q)   = S_i * r^size_resolution_exponent * exp(-qp_decay * (q - q_min))
//   lambda(r,q,v)= exp(-max(0, D_i * (res_penalty*(1-r) + qp_penalty*(q-q_min)
//                                     + vpen_i[v]) + noise)^accuracy_sharpness)
// with log S_i and log D_i following AR(1) processes across segments, and
// vpen_i the per-version penalty ladder, occasionally jittered to let model
// rankings cross. The anchor configuration is pinned to accuracy 1 by
// construction. accuracy_sharpness > 1 steepens the drop past a quality
// budget, making under-provisioning miss the target by a wide margin.
struct GeneratorParams {
  int segment_count = 200;
  double duration_s = 1.0;
  int fps = 15;

  // Bitrate model.
  double base_size_mean_mb = 0.8;       // mean anchor-setting segment size
  double scene_phi = 0.9;               // AR(1) coefficient of log size
  double scene_volatility = 0.15;       // AR(1) innovation stddev of log size
  double size_resolution_exponent = 1.4;
  double qp_decay = 0.11552453009332421;  // ln(2)/6: size halves per +6 qp
  // Busy scenes are both harder to segment and bigger to encode: log size
  // gains difficulty_size_coupling * log difficulty.
  double difficulty_size_coupling = 0.0;

  // Accuracy model.
  double difficulty_phi = 0.9;
  double difficulty_volatility = 0.1;
  double res_penalty = 0.16;
  double qp_penalty = 0.012;
  double version_penalty = 0.06;
  double accuracy_sharpness = 1.0;
  double noise_level = 0.0;      // stddev of per-entry accuracy noise
  double crossover_prob = 0.0;   // per-segment chance of version-rank jitter
  double crossover_strength = 0.5;
};

TraceSet generate_trace(const GeneratorParams& params, std::uint64_t seed);

struct ValidationIssue {
  int segment_id = -1;  // -1 for trace-level issues
  std::string what;
};

// Report-only invariant check; empty result means the trace is valid.
std::vector<ValidationIssue> validate_trace(const TraceSet& trace);

// Self-describing versioned text format; decimals carry 17 significant
// digits so load(save(t)) == t holds exactly. load_trace rejects traces that
// violate invariants; parse_trace only reads the file (the validate-trace
// subcommand reports issues itself).
void save_trace(const TraceSet& trace, const std::filesystem::path& path);
TraceSet load_trace(const std::filesystem::path& path);
TraceSet parse_trace(const std::filesystem::path& path);

void save_bandwidth(const BandwidthTrace& trace,
                    const std::filesystem::path& path);
BandwidthTrace load_bandwidth(const std::filesystem::path& path);

}  // namespace edgeadapt
