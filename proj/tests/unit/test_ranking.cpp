#include <algorithm>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "asmu/ranking.hpp"
#include "asmu/stats.hpp"

using namespace asmu;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<RankingSample> identity_signal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<RankingSample> s(n);
  for (auto& x : s) {
    x.a = u(rng);
    x.features = {x.a};
  }
  return s;
}

}  // namespace

TEST(RankLoss, EqualScoresGiveLogTwo) {
  const std::vector<double> a{1.0, 0.0}, k{0.0, 0.0};
  EXPECT_EQ(lambda_rank_loss(a, k), 1.0);
}

TEST(RankLoss, EqualTargetsGiveZero) {
  const std::vector<double> a{0.4, 0.4, 0.4}, k{0.1, 0.9, 0.3};
  EXPECT_EQ(lambda_rank_loss(a, k), 0.0);
  for (double g : lambda_rank_gradient(a, k)) EXPECT_EQ(g, 0.0);
}

TEST(RankLoss, LargeMarginSpotValue) {
  const std::vector<double> a{1.0, 0.0}, k{10.0, 0.0};
  // log2(1 + e^-10) evaluated independently
  EXPECT_NEAR(lambda_rank_loss(a, k), 6.549676676198847e-05, 1e-15);
}

TEST(RankLoss, StableForExtremeDifferences) {
  const std::vector<double> a{1.0, 0.0};
  EXPECT_NEAR(lambda_rank_loss(a, std::vector<double>{0.0, 1000.0}), 1000.0 / std::numbers::ln2, 1e-9);
  EXPECT_GE(lambda_rank_loss(a, std::vector<double>{1000.0, 0.0}), 0.0);
}

TEST(RankLoss, RejectsNonFinite) {
  const std::vector<double> a{1.0, std::nan("")}, k{0.0, 0.0};
  try {
    lambda_rank_loss(a, k);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_input);
  }
  EXPECT_THROW(lambda_rank_loss(std::span<const RankingSample>{}), Error);
}

TEST(RankLoss, SampleOverloadsAgree) {
  std::vector<RankingSample> batch{{0.9, 0.2, {}}, {0.1, 0.7, {}}, {0.5, 0.5, {}}};
  const std::vector<double> a{0.9, 0.1, 0.5}, k{0.2, 0.7, 0.5};
  EXPECT_EQ(lambda_rank_loss(batch), lambda_rank_loss(a, k));
  EXPECT_EQ(lambda_rank_gradient(batch), lambda_rank_gradient(a, k));
}

TEST(RankGradient, HandValue) {
  const std::vector<double> a{1.0, 0.0}, k{0.0, 0.0};
  const auto g = lambda_rank_gradient(a, k);
  EXPECT_NEAR(g[0], -0.7213475204444817, 1e-15);
  EXPECT_NEAR(g[1], 0.7213475204444817, 1e-15);
}

TEST(RankGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(77);
  const double h = 1e-5;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 16;
    const auto a = random_vec(rng, n, 0.0, 1.0);
    auto k = random_vec(rng, n, 0.0, 1.0);
    const auto g = lambda_rank_gradient(a, k);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double k0 = k[i];
      k[i] = k0 + h;
      const double up = lambda_rank_loss(a, k);
      k[i] = k0 - h;
      const double down = lambda_rank_loss(a, k);
      k[i] = k0;
      const double fd = (up - down) / (2.0 * h);
      err = std::max(err, std::abs(g[i] - fd));
      scale = std::max(scale, std::abs(fd));
    }
    if (scale > 0.0) {
      EXPECT_LE(err / scale, 1e-5);
    } else {
      EXPECT_LE(err, 1e-12);
    }
  }
}

TEST(RankLoss, ShiftInvariant) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 14;
    const auto a = random_vec(rng, n, 0.0, 1.0);
    auto k = random_vec(rng, n, 0.0, 1.0);
    const double base = lambda_rank_loss(a, k);
    const double c = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
    for (auto& x : k) x += c;
    EXPECT_NEAR(lambda_rank_loss(a, k), base, 1e-12 * std::max(1.0, base));
  }
}

TEST(RankLoss, TiesContributeNothing) {
  const std::vector<double> a{0.5, 0.5}, k{0.0, 5.0};
  EXPECT_EQ(lambda_rank_loss(a, k), 0.0);
  const std::vector<double> a3{0.5, 0.5, 0.0}, k3{0.0, 5.0, 0.0};
  const std::vector<double> a2{0.5, 0.0}, k2{0.0, 0.0};
  const std::vector<double> a2b{0.5, 0.0}, k2b{5.0, 0.0};
  EXPECT_NEAR(lambda_rank_loss(a3, k3), lambda_rank_loss(a2, k2) + lambda_rank_loss(a2b, k2b), 1e-15);
}

TEST(StrictPairs, Count) {
  const std::vector<double> a{0.0, 1.0, 1.0, 0.5};
  EXPECT_EQ(strict_pair_count(a), 5u);
  const std::vector<double> same{0.2, 0.2};
  EXPECT_EQ(strict_pair_count(same), 0u);
}

TEST(L1Loss, ValueAndGradient) {
  const std::vector<double> a{0.2, 0.8}, k{0.5, 0.5};
  EXPECT_NEAR(l1_loss(a, k), 0.3, 1e-15);
  const auto g = l1_gradient(a, k);
  EXPECT_EQ(g[0], 0.5);
  EXPECT_EQ(g[1], -0.5);
}

TEST(Features, EmptyPatch) {
  EXPECT_EQ(extract_features(PointSet(64, 64), PatchSpec{0, 0, 64, 64}), (std::vector<double>{0, 0, 0, 0}));
}

TEST(Features, SingleCentredPoint) {
  const auto f = extract_features(PointSet(64, 64, {{32, 32}}), PatchSpec{0, 0, 64, 64});
  EXPECT_EQ(f[0], 1.0);
  EXPECT_EQ(f[1], 0.0);
  EXPECT_EQ(f[2], 0.0);
  // population variance of a one-hot 4x4 grid: 1/16 - 1/256
  EXPECT_DOUBLE_EQ(f[3], 15.0 / 256.0);
}

TEST(Features, TwoPoints) {
  const auto f = extract_features(PointSet(64, 64, {{20, 30}, {30, 30}}), PatchSpec{0, 0, 64, 64});
  EXPECT_EQ(f[0], 2.0);
  EXPECT_DOUBLE_EQ(f[1], 10.0);
  EXPECT_EQ(f[2], 0.0);
}

TEST(Features, BorderCount) {
  const auto f = extract_features(PointSet(64, 64, {{2, 30}, {30, 62}, {4, 4}, {30, 30}}), PatchSpec{0, 0, 64, 64});
  EXPECT_EQ(f[2], 3.0);
}

TEST(Scorer, OutputsInOpenUnitInterval) {
  auto s = UncertaintyScorer::untrained(default_feature_spec());
  s.weights = {1.0, -2.0, 0.5, 3.0};
  const std::vector<double> x{1, 2, 3, 4};
  const double k = s.score(x);
  EXPECT_GT(k, 0.0);
  EXPECT_LT(k, 1.0);
  EXPECT_THROW(s.score(std::vector<double>{1.0}), Error);
}

TEST(Scorer, JsonRoundTrip) {
  auto s = UncertaintyScorer::untrained(default_feature_spec());
  s.weights = {0.1, 0.2, 0.3, 0.4};
  s.bias = -0.5;
  s.feature_offset = {1, 2, 3, 4};
  s.feature_scale = {2, 2, 2, 2};
  const auto t = UncertaintyScorer::from_json(s.to_json());
  EXPECT_EQ(t.to_json(), s.to_json());
  EXPECT_THROW(UncertaintyScorer::from_json(nlohmann::json{{"weights", {1}}}), Error);
}

TEST(TrainScorer, IdentitySignalLearnsTheRanking) {
  const auto samples = identity_signal(64, 1);
  TrainOptions opt;
  opt.epochs = 200;
  opt.feature_spec = {"a"};
  const auto r = train_scorer(samples, opt);
  ASSERT_EQ(r.loss_trace.size(), 201u);
  // The sigmoid squash bounds each pair term below by log2(1 + e^-1) per unit
  // gap, so the loss cannot fall by 10x; it falls by a large fraction of the
  // reachable amount and the ranking becomes exact.
  EXPECT_LT(r.loss_trace.back(), 0.6 * r.loss_trace.front());
  for (std::size_t i = 1; i < r.loss_trace.size(); ++i) EXPECT_LE(r.loss_trace[i], r.loss_trace[i - 1] + 1e-12);
  std::vector<double> a, k;
  for (const auto& s : samples) {
    a.push_back(s.a);
    k.push_back(r.scorer.score(s.features));
  }
  EXPECT_EQ(stats::kendall_tau(k, a), 1.0);
}

TEST(TrainScorer, FullBatchIsOrderFree) {
  auto samples = identity_signal(40, 2);
  for (auto& s : samples) s.features.push_back(std::sin(10.0 * s.a));
  TrainOptions opt;
  opt.epochs = 100;
  const auto r1 = train_scorer(samples, opt);
  std::mt19937_64 rng(3);
  std::shuffle(samples.begin(), samples.end(), rng);
  const auto r2 = train_scorer(samples, opt);
  for (std::size_t d = 0; d < r1.scorer.weights.size(); ++d) {
    EXPECT_NEAR(r1.scorer.weights[d], r2.scorer.weights[d], 1e-9);
  }
  EXPECT_NEAR(r1.scorer.bias, r2.scorer.bias, 1e-9);
}

TEST(TrainScorer, DeterministicMiniBatch) {
  const auto samples = identity_signal(50, 4);
  TrainOptions opt;
  opt.epochs = 30;
  opt.batch_size = 8;
  opt.seed = 99;
  const auto r1 = train_scorer(samples, opt);
  const auto r2 = train_scorer(samples, opt);
  EXPECT_EQ(r1.scorer.weights, r2.scorer.weights);
  EXPECT_EQ(r1.loss_trace, r2.loss_trace);
  EXPECT_LT(r1.loss_trace.back(), r1.loss_trace.front());
}

TEST(TrainScorer, Unrankable) {
  try {
    train_scorer(identity_signal(1, 1), TrainOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unrankable_dataset);
  }
  std::vector<RankingSample> flat{{0.3, 0, {1.0}}, {0.3, 0, {2.0}}};
  EXPECT_THROW(train_scorer(flat, TrainOptions{}), Error);
  TrainOptions bad;
  bad.step_size = 0.0;
  EXPECT_THROW(train_scorer(identity_signal(5, 1), bad), Error);
}

TEST(TrainScorer, L1Ablation) {
  const auto samples = identity_signal(40, 5);
  TrainOptions opt;
  opt.loss = ScorerLoss::l1;
  opt.epochs = 200;
  const auto r = train_scorer(samples, opt);
  EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
}

TEST(TrainScorer, WarmStartKeepsWeights) {
  const auto samples = identity_signal(30, 6);
  TrainOptions opt;
  opt.epochs = 50;
  const auto first = train_scorer(samples, opt);
  opt.initial = first.scorer;
  opt.epochs = 0;
  const auto again = train_scorer(samples, opt);
  EXPECT_EQ(again.scorer.weights, first.scorer.weights);
  EXPECT_EQ(again.loss_trace.front(), first.loss_trace.back());
}

TEST(Stats, KendallAndSpearman) {
  const std::vector<double> x{1, 2, 3, 4}, y{10, 20, 30, 40}, z{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(stats::kendall_tau(x, y), 1.0);
  EXPECT_DOUBLE_EQ(stats::kendall_tau(x, z), -1.0);
  EXPECT_DOUBLE_EQ(stats::spearman(x, y), 1.0);
  const std::vector<double> t{1, 1, 2}, u{1, 2, 3};
  // tau-b with one tie in x: (2 - 0) / sqrt(2 * 3)
  EXPECT_NEAR(stats::kendall_tau(t, u), 2.0 / std::sqrt(6.0), 1e-15);
  EXPECT_EQ(stats::average_ranks(t), (std::vector<double>{1.5, 1.5, 3.0}));
}
