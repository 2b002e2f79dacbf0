#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "edgeadapt/metrics.hpp"

using namespace edgeadapt;

namespace {

// Independent oracle: per-class IoU from explicit pixel sets.
double brute_force_miou(const LabelGrid& pred, const LabelGrid& gt, int C) {
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < C; ++c) {
    long long inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
      const bool in_pred = pred.labels[i] == c;
      const bool in_gt = gt.labels[i] == c;
      if (in_pred && in_gt) ++inter;
      if (in_pred || in_gt) ++uni;
    }
    if (uni == 0) continue;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++present;
  }
  REQUIRE(present > 0);
  return sum / present;
}

LabelGrid random_grid(int w, int h, int C, std::mt19937_64& rng) {
  LabelGrid g{w, h, {}};
  std::uniform_int_distribution<int> label(0, C - 1);
  g.labels.reserve(static_cast<std::size_t>(w) * h);
  for (int i = 0; i < w * h; ++i) g.labels.push_back(label(rng));
  return g;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("worked 2x2 example") {
  const LabelGrid gt{2, 2, {0, 0, 1, 1}};
  const LabelGrid pred{2, 2, {0, 1, 1, 1}};
  const ConfusionMatrix m = confusion_matrix(pred, gt, 2);
  CHECK(m.at(0, 0) == 1);
  CHECK(m.at(0, 1) == 1);
  CHECK(m.at(1, 1) == 2);
  CHECK(m.at(1, 0) == 0);
  CHECK(m.total() == 4);

  const auto ious = class_iou(m);
  REQUIRE(ious[0].has_value());
  REQUIRE(ious[1].has_value());
  CHECK(*ious[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(*ious[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(mean_iou(m) ==
        doctest::Approx((0.5 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
}

TEST_CASE("identical grids give a diagonal matrix and mIoU 1") {
  const LabelGrid g{3, 2, {0, 1, 2, 2, 1, 0}};
  const ConfusionMatrix m = confusion_matrix(g, g, 3);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a != b) CHECK(m.at(a, b) == 0);
    }
  }
  CHECK(mean_iou(m) == 1.0);
  for (const auto& iou : class_iou(m)) {
    REQUIRE(iou.has_value());
    CHECK(*iou == 1.0);
  }
}

TEST_CASE("fully disjoint single classes give mIoU 0") {
  const LabelGrid gt{2, 1, {0, 0}};
  const LabelGrid pred{2, 1, {1, 1}};
  CHECK(mean_iou(confusion_matrix(pred, gt, 2)) == 0.0);
}

TEST_CASE("absent classes are excluded") {
  const LabelGrid gt{2, 1, {0, 0}};
  const LabelGrid pred{2, 1, {0, 0}};
  const auto ious = class_iou(confusion_matrix(pred, gt, 4));
  CHECK(ious[0].has_value());
  CHECK(!ious[1].has_value());
  CHECK(!ious[3].has_value());
  CHECK(mean_iou(confusion_matrix(pred, gt, 4)) == 1.0);
}

TEST_CASE("errors: dimension mismatch, bad labels, empty metric") {
  const LabelGrid a{2, 2, {0, 0, 0, 0}};
  const LabelGrid b{2, 1, {0, 0}};
  CHECK_THROWS_AS(confusion_matrix(a, b, 2), ParameterError);
  const LabelGrid bad{2, 1, {0, 5}};
  CHECK_THROWS_AS(confusion_matrix(bad, b, 2), ParameterError);
  CHECK_THROWS_AS(mean_iou(ConfusionMatrix(3)), UndefinedMetricError);
}

TEST_CASE("matches the brute-force oracle on random grids") {
  std::mt19937_64 rng(20240211);
  for (int trial = 0; trial < 300; ++trial) {
    const LabelGrid gt = random_grid(8, 8, 4, rng);
    const LabelGrid pred = random_grid(8, 8, 4, rng);
    const double fast = mean_iou(confusion_matrix(pred, gt, 4));
    const double slow = brute_force_miou(pred, gt, 4);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
  }
}

TEST_CASE("invariant under simultaneous class permutation") {
  std::mt19937_64 rng(7);
  const int C = 5;
  std::vector<int> perm(C);
  for (int trial = 0; trial < 50; ++trial) {
    const LabelGrid gt = random_grid(6, 6, C, rng);
    const LabelGrid pred = random_grid(6, 6, C, rng);
    for (int c = 0; c < C; ++c) perm[c] = c;
    std::shuffle(perm.begin(), perm.end(), rng);
    LabelGrid gt2 = gt, pred2 = pred;
    for (auto& l : gt2.labels) l = perm[l];
    for (auto& l : pred2.labels) l = perm[l];
    CHECK(mean_iou(confusion_matrix(pred, gt, C)) ==
          doctest::Approx(mean_iou(confusion_matrix(pred2, gt2, C)))
              .epsilon(1e-12));
  }
}

TEST_CASE("equal pixel accuracy can still differ in mIoU") {
  // 8 pixels, 2 classes. Both predictions get 6 of 8 pixels right, but the
  // mistakes land on classes of different sizes.
  const LabelGrid gt{8, 1, {0, 0, 0, 0, 0, 0, 1, 1}};
  const LabelGrid pred_a{8, 1, {0, 0, 0, 0, 1, 1, 1, 1}};  // errors on class 0
  const LabelGrid pred_b{8, 1, {0, 0, 0, 0, 0, 0, 0, 0}};  // errors on class 1
  const ConfusionMatrix ma = confusion_matrix(pred_a, gt, 2);
  const ConfusionMatrix mb = confusion_matrix(pred_b, gt, 2);
  CHECK(pixel_accuracy(ma) == pixel_accuracy(mb));
  CHECK(mean_iou(ma) != mean_iou(mb));
}

}  // TEST_SUITE
