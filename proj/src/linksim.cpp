#include "edgeadapt/linksim.hpp"

namespace edgeadapt {

StreamSession::StreamSession(double segment_duration_s)
    : segment_duration_s_(segment_duration_s) {
  if (segment_duration_s <= 0.0) {
    throw ParameterError("segment duration must be positive");
  }
}

TransmissionOutcome StreamSession::step(double segment_size_mb,
                                        double bandwidth_mbps) {
  if (bandwidth_mbps <= 0.0) {
    throw ParameterError("bandwidth must be positive");
  }
  if (segment_size_mb < 0.0) {
    throw ParameterError("segment size must be non-negative");
  }
  TransmissionOutcome out;
  out.segment_id = static_cast<int>(ledger_.size());
  out.bytes_offered_mb = segment_size_mb;
  out.bandwidth_mbps = bandwidth_mbps;
  const double capacity_mb = bandwidth_mbps * segment_duration_s_;
  if (segment_size_mb <= capacity_mb) {
    out.status = DeliveryStatus::Delivered;
    out.upload_time_s = segment_size_mb / bandwidth_mbps;
  } else {
    out.status = DeliveryStatus::Dropped;  // aborted at the slot boundary
  }
  clock_s_ += segment_duration_s_;
  ledger_.push_back(out);
  return out;
}

}  // namespace edgeadapt
