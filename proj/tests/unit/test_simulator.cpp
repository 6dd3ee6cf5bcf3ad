#include <cmath>

#include <gtest/gtest.h>

#include "asmu/simulator.hpp"

using namespace asmu;
using namespace asmu::sim;

namespace {

SceneConfig flat_scene(double intensity, std::uint64_t seed) {
  SceneConfig c;
  c.width = 128;
  c.height = 128;
  c.density = Field{4, 4, std::vector<double>(16, intensity)};
  c.seed = seed;
  return c;
}

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.scenes.count = 10;
  cfg.scenes.width = 128;
  cfg.scenes.height = 128;
  cfg.labeled_fraction = 0.3;
  cfg.epochs = 12;
  cfg.schedule = ThresholdSchedule{2, 8, 0.1, 0.6};
  return cfg;
}

}  // namespace

TEST(Scene, ZeroIntensityIsEmpty) {
  const auto p = generate_scene(flat_scene(0.0, 3));
  EXPECT_TRUE(p.empty());
  EXPECT_EQ(p.frame_width(), 128.0);
}

TEST(Scene, PoissonMean) {
  double total = 0.0;
  const int trials = 1000;
  for (int s = 0; s < trials; ++s) total += static_cast<double>(generate_scene(flat_scene(0.5, s)).size());
  const double mean = total / trials;
  // expected 8, standard error sqrt(8 / 1000)
  EXPECT_NEAR(mean, 8.0, 5.0 * std::sqrt(8.0 / trials));
}

TEST(Scene, DeterministicAndInFrame) {
  const auto a = generate_scene(flat_scene(2.0, 42));
  const auto b = generate_scene(flat_scene(2.0, 42));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].y, b[i].y);
    EXPECT_GE(a[i].x, 0.0);
    EXPECT_LE(a[i].x, 128.0);
  }
}

TEST(Scene, RejectsBadFields) {
  auto c = flat_scene(1.0, 1);
  c.density.values[3] = -1.0;
  EXPECT_THROW(generate_scene(c), Error);
  c = flat_scene(1.0, 1);
  c.density.rows = 3;
  EXPECT_THROW(generate_scene(c), Error);
  c = flat_scene(1.0, 1);
  c.width = 0.0;
  EXPECT_THROW(generate_scene(c), Error);
}

TEST(Predictor, ZeroNoiseReproducesTruth) {
  const auto gt = generate_scene(flat_scene(1.0, 5));
  PredictorConfig cfg;
  cfg.noise = cfg.noise.scaled(0.0);
  const auto p = predict_noisy(gt, cfg, 0);
  ASSERT_EQ(p.points.size(), gt.size());
  const double c = PatchSpec{0, 0, 64, 64}.diagonal();
  EXPECT_EQ(spatial_matching_distance(p.points, gt, c).distance, 0.0);
}

TEST(Predictor, MissEverything) {
  const auto gt = generate_scene(flat_scene(1.0, 6));
  ASSERT_FALSE(gt.empty());
  PredictorConfig cfg;
  cfg.noise = cfg.noise.scaled(0.0);
  cfg.noise.miss_rate_base = 1.0;
  const auto p = predict_noisy(gt, cfg, 0);
  EXPECT_TRUE(p.points.empty());
  const double c = PatchSpec{0, 0, 64, 64}.diagonal();
  EXPECT_DOUBLE_EQ(spatial_matching_distance(p.points, gt, c).distance, c);
}

TEST(Predictor, DeterministicPerSeedAndEpoch) {
  const auto gt = generate_scene(flat_scene(1.0, 7));
  PredictorConfig cfg;
  cfg.seed = 9;
  const auto a = predict_noisy(gt, cfg, 3);
  const auto b = predict_noisy(gt, cfg, 3);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].x, b.points[i].x);
  EXPECT_EQ(a.patch_confidence, b.patch_confidence);
  EXPECT_THROW(predict_noisy(gt, cfg, -1), Error);
}

TEST(Predictor, NoiseShrinksWithEpochs) {
  PredictorConfig cfg;
  cfg.improvement_per_epoch = 0.8;
  const double c = PatchSpec{0, 0, 64, 64}.diagonal();
  double early = 0.0, late = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto gt = generate_scene(flat_scene(1.0, 100 + s));
    cfg.seed = s;
    early += spatial_matching_distance(predict_noisy(gt, cfg, 0).points, gt, c).distance;
    late += spatial_matching_distance(predict_noisy(gt, cfg, 20).points, gt, c).distance;
  }
  EXPECT_LT(late, early);
}

TEST(Predictor, RejectsBadConfig) {
  PredictorConfig cfg;
  cfg.improvement_per_epoch = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = PredictorConfig{};
  cfg.noise.jitter_sigma = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(NoiseParams, ArrayRoundTrip) {
  NoiseParams n;
  const auto a = n.to_array();
  const auto b = NoiseParams::from_array(a).to_array();
  EXPECT_EQ(a, b);
  EXPECT_THROW(NoiseParams::from_array(std::vector<double>{1.0}), Error);
}

TEST(Strategy, NamesRoundTrip) {
  for (auto s : all_strategies) EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_EQ(parse_strategy("bogus"), std::nullopt);
}

TEST(Experiment, ZeroNoiseRunIsExact) {
  auto cfg = small_experiment();
  cfg.predictor.noise = cfg.predictor.noise.scaled(0.0);
  const auto r = run_semi_supervised(cfg, Strategy::ours, 1);
  EXPECT_EQ(r.scene_mae, 0.0);
  EXPECT_EQ(r.selected_count_mae, 0.0);
  EXPECT_EQ(r.selected_mean_distance, 0.0);
  // Every target ties, so the scorer is never fit and scores 0.5: selection
  // starts once the threshold exceeds it.
  for (const auto& e : r.epochs) {
    const bool open = e.threshold && *e.threshold > 0.5;
    EXPECT_EQ(e.selected, open ? e.candidates : 0u) << "epoch " << e.epoch;
  }
}

TEST(Experiment, WarmupSelectsNothing) {
  const auto r = run_semi_supervised(small_experiment(), Strategy::without_filtering, 2);
  EXPECT_EQ(r.epochs[0].selected, 0u);
  EXPECT_EQ(r.epochs[1].selected, 0u);
  EXPECT_EQ(r.epochs[2].selected, r.epochs[2].candidates);
}

TEST(Experiment, FullyLabeledHasNoCandidates) {
  auto cfg = small_experiment();
  cfg.labeled_fraction = 1.0;
  const auto r = run_semi_supervised(cfg, Strategy::ours, 3);
  EXPECT_EQ(r.unlabeled_patches, 0u);
  EXPECT_EQ(r.selected_total, 0u);
}

TEST(Experiment, Deterministic) {
  const auto cfg = small_experiment();
  const auto a = run_semi_supervised(cfg, Strategy::ours, 4);
  const auto b = run_semi_supervised(cfg, Strategy::ours, 4);
  EXPECT_EQ(a.selected_total, b.selected_total);
  EXPECT_EQ(a.selected_count_mae, b.selected_count_mae);
  EXPECT_EQ(a.scene_mae, b.scene_mae);
}

TEST(Experiment, RecordsSelectedPatches) {
  auto cfg = small_experiment();
  cfg.record_selected = true;
  const auto r = run_semi_supervised(cfg, Strategy::without_filtering, 5);
  std::size_t n = 0;
  for (const auto& e : r.epochs) {
    EXPECT_EQ(e.selected_patches.size(), e.selected);
    n += e.selected_patches.size();
  }
  EXPECT_EQ(n, r.selected_total);
}

TEST(Experiment, CutoutTrimsLabels) {
  auto cfg = small_experiment();
  cfg.record_selected = true;
  const auto plain = run_semi_supervised(cfg, Strategy::without_filtering, 6);
  cfg.cutout = true;
  const auto cut = run_semi_supervised(cfg, Strategy::without_filtering, 6);
  std::size_t gt_plain = 0, gt_cut = 0;
  for (const auto& e : plain.epochs) {
    for (const auto& p : e.selected_patches) gt_plain += p.n_gt;
  }
  for (const auto& e : cut.epochs) {
    for (const auto& p : e.selected_patches) gt_cut += p.n_gt;
  }
  EXPECT_LT(gt_cut, gt_plain);
}

TEST(Experiment, RejectsBadConfig) {
  auto cfg = small_experiment();
  cfg.labeled_fraction = 0.0;
  EXPECT_THROW(run_semi_supervised(cfg, Strategy::ours, 1), Error);
  cfg = small_experiment();
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = small_experiment();
  cfg.scenes.width = 32;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Ablation, IndependentOfWorkerCount) {
  const auto cfg = small_experiment();
  const std::vector<Strategy> strategies{Strategy::ours, Strategy::softmax, Strategy::acd};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto a = run_ablation_suite(cfg, strategies, seeds, 1);
  const auto b = run_ablation_suite(cfg, strategies, seeds, 4);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].selected_count_mae, b.runs[i].selected_count_mae);
    EXPECT_EQ(a.runs[i].scene_mae, b.runs[i].scene_mae);
  }
  for (std::size_t s = 0; s < a.summary.size(); ++s) EXPECT_EQ(a.summary[s].mean_rank, b.summary[s].mean_rank);
}

TEST(Ablation, StrategyResultDoesNotDependOnCompanions) {
  const auto cfg = small_experiment();
  const std::vector<std::uint64_t> seeds{7, 8, 9};
  const std::vector<Strategy> two{Strategy::ours, Strategy::awd};
  const std::vector<Strategy> three{Strategy::hungarian, Strategy::ours, Strategy::l1_loss};
  const auto a = run_ablation_suite(cfg, two, seeds);
  const auto b = run_ablation_suite(cfg, three, seeds);
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    EXPECT_EQ(a.run(0, k).selected_count_mae, b.run(1, k).selected_count_mae);
  }
}

TEST(Ablation, MeanRanksAverageToMiddle) {
  const auto cfg = small_experiment();
  const std::vector<Strategy> strategies{Strategy::ours, Strategy::without_filtering, Strategy::softmax};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto r = run_ablation_suite(cfg, strategies, seeds);
  double sum = 0.0;
  for (const auto& s : r.summary) sum += s.mean_rank;
  EXPECT_DOUBLE_EQ(sum, 6.0);
  EXPECT_THROW(run_ablation_suite(cfg, strategies, std::vector<std::uint64_t>{1, 2}), Error);
}

TEST(Calibration, ScorerTracksExpectedError) {
  const auto r = calibrate_scorer(CalibrationConfig{}, 1);
  EXPECT_GT(r.heldout_spearman, 0.5);
  EXPECT_GT(r.heldout_spearman, r.softmax_spearman);
  EXPECT_GT(r.train_patches, 0u);
  EXPECT_GT(r.heldout_patches, 0u);
}

TEST(Rankable, LinearScorerRanksLatentTargets) {
  EXPECT_GE(rankable_train_kendall(RankableConfig{}, 1), 0.9);
}
