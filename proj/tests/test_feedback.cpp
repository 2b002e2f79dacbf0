#include <doctest.h>

#include "edgeadapt/feedback.hpp"

using namespace edgeadapt;

namespace {

TraceSet small_trace() {
  GeneratorParams params;
  params.segment_count = 4;
  return generate_trace(params, 13);
}

}  // namespace

TEST_SUITE("feedback") {

TEST_CASE("dropped segment yields zeros with the flag set") {
  const TraceSet trace = small_trace();
  const FeedbackParams params;
  const Configuration cfg{0.5, 30, 4};
  const FeedbackVector fb = feedback_for(params, DeliveryStatus::Dropped,
                                         trace.space, cfg, trace.segments[1]);
  CHECK(fb.drop_flag == 1.0);
  CHECK(fb.miou == 0.0);
  for (double v : fb.class_iou) CHECK(v == 0.0);
  CHECK(fb.dim() == params.num_classes + 2);
}

TEST_CASE("cold start zeros carry no drop flag") {
  const FeedbackVector fb = FeedbackVector::zeros(8);
  CHECK(fb.drop_flag == 0.0);
  CHECK(fb.miou == 0.0);
  CHECK(fb.flatten().size() == 10);
}

TEST_CASE("delivered feedback reads the trace's mIoU through") {
  const TraceSet trace = small_trace();
  const FeedbackParams params;
  const Configuration cfg{0.75, 24, 2};
  const SegmentRecord& rec = trace.segments[2];
  const FeedbackVector fb =
      feedback_for(params, DeliveryStatus::Delivered, trace.space, cfg, rec);
  CHECK(fb.miou == rec.accuracy_of(trace.space, cfg));
  CHECK(fb.drop_flag == 0.0);
  for (double v : fb.class_iou) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("feedback is deterministic and stale by one segment") {
  TraceSet trace = small_trace();
  const FeedbackParams params;
  const Configuration cfg{1.0, 22, 1};
  const FeedbackVector a =
      feedback_for(params, DeliveryStatus::Delivered, trace.space, cfg,
                   trace.segments[1]);
  const FeedbackVector b =
      feedback_for(params, DeliveryStatus::Delivered, trace.space, cfg,
                   trace.segments[1]);
  CHECK(a.class_iou == b.class_iou);
  CHECK(a.miou == b.miou);

  // mutate segment 2; feedback computed from segment 1 must not move
  for (double& acc : trace.segments[2].accuracy) acc *= 0.5;
  const FeedbackVector c =
      feedback_for(params, DeliveryStatus::Delivered, trace.space, cfg,
                   trace.segments[1]);
  CHECK(c.class_iou == a.class_iou);
  CHECK(c.miou == a.miou);
}

TEST_CASE("unknown configuration is rejected") {
  const TraceSet trace = small_trace();
  CHECK_THROWS_AS(feedback_for(FeedbackParams{}, DeliveryStatus::Delivered,
                               trace.space, Configuration{0.9, 21, 7},
                               trace.segments[0]),
                  ConfigurationError);
}

}  // TEST_SUITE
