#pragma once

#include <optional>
#include <vector>

#include "edgeadapt/errors.hpp"

namespace edgeadapt {

enum class DeliveryStatus { Delivered, Dropped };

struct TransmissionOutcome {
  int segment_id = 0;
  DeliveryStatus status = DeliveryStatus::Delivered;
  std::optional<double> upload_time_s;  // present iff Delivered
  double bytes_offered_mb = 0.0;
  double bandwidth_mbps = 0.0;
};

// Slot-synchronous upload model. Each step offers one segment against the
// slot's bandwidth: the segment is Delivered iff it fits within the slot
// (size <= bandwidth * T, boundary included), otherwise it is Dropped and
// the link starts fresh on the next segment. The clock advances by exactly
// one segment duration per step either way; a drop never delays its
// successor.
class StreamSession {
 public:
  explicit StreamSession(double segment_duration_s = 1.0);

  TransmissionOutcome step(double segment_size_mb, double bandwidth_mbps);

  double segment_duration_s() const { return segment_duration_s_; }
  double clock_s() const { return clock_s_; }
  const std::vector<TransmissionOutcome>& ledger() const { return ledger_; }

 private:
  double segment_duration_s_;
  double clock_s_ = 0.0;
  std::vector<TransmissionOutcome> ledger_;
};

}  // namespace edgeadapt
