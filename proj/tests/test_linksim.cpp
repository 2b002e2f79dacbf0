#include <doctest.h>

#include <random>

#include "edgeadapt/linksim.hpp"

using namespace edgeadapt;

TEST_SUITE("linksim") {

TEST_CASE("delivery below, at, and above the slot capacity") {
  StreamSession session(1.0);

  const auto a = session.step(0.5, 1.0);
  CHECK(a.status == DeliveryStatus::Delivered);
  REQUIRE(a.upload_time_s.has_value());
  CHECK(*a.upload_time_s == 0.5);

  const auto b = session.step(1.5, 1.0);
  CHECK(b.status == DeliveryStatus::Dropped);
  CHECK(!b.upload_time_s.has_value());

  // size == B*T is the boundary and still fits, at exactly T
  const auto c = session.step(1.0, 1.0);
  CHECK(c.status == DeliveryStatus::Delivered);
  REQUIRE(c.upload_time_s.has_value());
  CHECK(*c.upload_time_s == 1.0);
}

TEST_CASE("clock advances by exactly T per step, drop or not") {
  StreamSession session(2.0);
  session.step(10.0, 1.0);  // dropped
  session.step(0.1, 1.0);   // delivered
  session.step(10.0, 1.0);  // dropped
  CHECK(session.clock_s() == 6.0);
  CHECK(session.ledger().size() == 3);
  for (std::size_t i = 0; i < session.ledger().size(); ++i) {
    CHECK(session.ledger()[i].segment_id == static_cast<int>(i));
  }
}

TEST_CASE("parameter errors") {
  StreamSession session(1.0);
  CHECK_THROWS_AS(session.step(1.0, 0.0), ParameterError);
  CHECK_THROWS_AS(session.step(1.0, -2.0), ParameterError);
  CHECK_THROWS_AS(session.step(-1.0, 1.0), ParameterError);
  CHECK_THROWS_AS(StreamSession(0.0), ParameterError);
}

TEST_CASE("randomized laws: exclusivity, threshold, conservation") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> size(0.0, 2.0);
  std::uniform_real_distribution<double> bandwidth(0.05, 1.5);
  StreamSession session(1.0);
  long long delivered = 0, dropped = 0;
  const int steps = 10000;
  for (int i = 0; i < steps; ++i) {
    const double s = size(rng);
    const double b = bandwidth(rng);
    const auto out = session.step(s, b);
    const bool fits = s <= b * session.segment_duration_s();
    if (out.status == DeliveryStatus::Delivered) {
      ++delivered;
      CHECK(fits);
      REQUIRE(out.upload_time_s.has_value());
      CHECK(*out.upload_time_s == s / b);
      CHECK(*out.upload_time_s <= session.segment_duration_s());
    } else {
      ++dropped;
      CHECK(!fits);
      CHECK(out.bytes_offered_mb > b * session.segment_duration_s());
    }
  }
  CHECK(delivered + dropped == steps);
  CHECK(session.clock_s() == doctest::Approx(steps * 1.0));
}

}  // TEST_SUITE
