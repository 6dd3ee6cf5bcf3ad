#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "asmu/selection.hpp"

using namespace asmu;

namespace {

std::vector<Candidate> candidates(const std::vector<double>& kappas) {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    out.push_back(Candidate{PatchKey{"s", i}, PointSet(64, 64), kappas[i]});
  }
  return out;
}

std::vector<std::size_t> indices(const std::vector<PseudoLabel>& labels) {
  std::vector<std::size_t> out;
  for (const auto& l : labels) out.push_back(l.key.patch_index);
  return out;
}

}  // namespace

TEST(Schedule, DefaultValues) {
  const ThresholdSchedule s;
  EXPECT_EQ(threshold_at(s, 5), std::nullopt);
  EXPECT_EQ(threshold_at(s, 9), std::nullopt);
  EXPECT_DOUBLE_EQ(*threshold_at(s, 10), 0.1);
  EXPECT_DOUBLE_EQ(*threshold_at(s, 70), 0.35);
  EXPECT_DOUBLE_EQ(*threshold_at(s, 130), 0.6);
  EXPECT_DOUBLE_EQ(*threshold_at(s, 500), 0.6);
}

TEST(Schedule, MonotoneAfterWarmup) {
  const ThresholdSchedule s{3, 50, 0.05, 0.9};
  double prev = -1.0;
  for (int t = 3; t < 80; ++t) {
    const auto u = threshold_at(s, t);
    ASSERT_TRUE(u);
    EXPECT_GE(*u, prev);
    EXPECT_GE(*u, 0.05);
    EXPECT_LE(*u, 0.9);
    prev = *u;
  }
}

TEST(Schedule, RejectsBadParameters) {
  EXPECT_THROW(threshold_at(ThresholdSchedule{10, 10, 0.1, 0.6}, 10), Error);
  EXPECT_THROW(threshold_at(ThresholdSchedule{-1, 10, 0.1, 0.6}, 10), Error);
  EXPECT_THROW(threshold_at(ThresholdSchedule{0, 10, 0.7, 0.6}, 10), Error);
  EXPECT_THROW(threshold_at(ThresholdSchedule{0, 10, 0.1, 1.5}, 10), Error);
  EXPECT_THROW(threshold_at(ThresholdSchedule{}, -1), Error);
}

TEST(Select, Example) {
  const auto c = candidates({0.05, 0.6, 0.59});
  const auto out = select_pseudo_labels(c, 0.6, 12);
  EXPECT_EQ(indices(out), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(out[0].epoch_created, 12);
  EXPECT_EQ(out[1].kappa, 0.59);
}

TEST(Select, WarmupSelectsNothing) {
  EXPECT_TRUE(select_pseudo_labels(candidates({0.0, 0.1}), std::nullopt, 0).empty());
}

TEST(Select, ZeroScoresAllPass) {
  EXPECT_EQ(select_pseudo_labels(candidates({0, 0, 0, 0}), 0.1, 1).size(), 4u);
}

TEST(Select, Boundary) {
  const auto c = candidates({0.3, 0.2});
  EXPECT_EQ(indices(select_pseudo_labels(c, 0.3, 0, SelectionBoundary::strict)), (std::vector<std::size_t>{1}));
  EXPECT_EQ(indices(select_pseudo_labels(c, 0.3, 0, SelectionBoundary::inclusive)),
            (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(parse_boundary("inclusive"), SelectionBoundary::inclusive);
  EXPECT_EQ(parse_boundary("strict"), SelectionBoundary::strict);
  EXPECT_EQ(parse_boundary("loose"), std::nullopt);
}

TEST(Select, RejectsInvalidScores) {
  for (double bad : {-0.1, 1.1, std::nan("")}) {
    try {
      select_pseudo_labels(candidates({0.2, bad}), 0.5, 0);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::invalid_score);
    }
  }
  EXPECT_THROW(select_pseudo_labels(candidates({0.2}), 1.5, 0), Error);
}

TEST(Select, HigherThresholdSelectsSuperset) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> k(1 + rng() % 20);
    for (auto& x : k) x = u(rng);
    const auto c = candidates(k);
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const auto small = indices(select_pseudo_labels(c, lo, 0));
    const auto big = indices(select_pseudo_labels(c, hi, 0));
    EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    for (auto i : small) EXPECT_LT(k[i], lo);
  }
}

TEST(Ema, SingleStep) {
  const std::vector<double> student{1.0};
  const auto s = ema_update(EmaState{{0.0}, 0.99}, student);
  EXPECT_NEAR(s.teacher_params[0], 0.01, 1e-15);
}

TEST(Ema, FixedPointAndContraction) {
  const std::vector<double> student{2.0, -3.0};
  EmaState s{{2.0, -3.0}, 0.9};
  s = ema_update(s, student);
  EXPECT_EQ(s.teacher_params, student);
  EmaState far{{10.0, 10.0}, 0.9};
  double prev = 1e9;
  for (int i = 0; i < 50; ++i) {
    far = ema_update(far, student);
    const double gap = std::abs(far.teacher_params[0] - 2.0) + std::abs(far.teacher_params[1] + 3.0);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
}

TEST(Ema, Errors) {
  const std::vector<double> two{1.0, 2.0};
  try {
    ema_update(EmaState{{1.0}, 0.99}, two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape);
  }
  EXPECT_THROW(ema_update(EmaState{{1.0, 1.0}, 1.0}, two), Error);
  EXPECT_THROW(ema_update(EmaState{{1.0, 1.0}, 0.0}, two), Error);
}

TEST(ComposedLoss, Values) {
  EXPECT_DOUBLE_EQ(composed_loss(1.0, 0.5, 2.0, 0.3), 2.1);
  EXPECT_EQ(composed_loss(1.0, 0.5, 100.0, 0.0), 1.5);
  try {
    composed_loss(-1.0, 0.0, 0.0, 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_loss);
  }
  EXPECT_THROW(composed_loss(1.0, std::nan(""), 0.0, 0.3), Error);
  EXPECT_THROW(composed_loss(1.0, 0.0, 0.0, -0.1), Error);
}
