#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "asmu/asm.hpp"
#include "asmu/error.hpp"
#include "asmu/geometry.hpp"
#include "asmu/matching.hpp"
#include "asmu/random.hpp"
#include "asmu/ranking.hpp"
#include "asmu/selection.hpp"
#include "asmu/stats.hpp"

namespace asmu::sim {

// ---------------------------------------------------------------------------
// Sampling helpers. Each consumes a fixed number of engine outputs so that
// runs sharing a stream stay aligned draw-for-draw.

inline double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(Rng& rng) noexcept {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::size_t poisson(Rng& rng, double lambda) {
  if (!(lambda > 0.0)) return 0;
  if (lambda < 30.0) {
    const double limit = std::exp(-lambda);
    std::size_t k = 0;
    double prod = uniform01(rng);
    while (prod > limit) {
      ++k;
      prod *= uniform01(rng);
    }
    return k;
  }
  std::poisson_distribution<std::size_t> dist(lambda);
  return dist(rng);
}

// ---------------------------------------------------------------------------
// Scenes

/// Piecewise-constant field over a rows x cols grid covering the scene.
struct Field {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  bool empty() const noexcept { return values.empty(); }

  double at(std::size_t r, std::size_t c) const { return values.at(r * cols + c); }

  /// Value of the cell covering (x, y) in a width x height scene; 0 when empty.
  double sample(double x, double y, double width, double height) const noexcept {
    if (values.empty()) return 0.0;
    auto c = static_cast<std::size_t>(x / width * static_cast<double>(cols));
    auto r = static_cast<std::size_t>(y / height * static_cast<double>(rows));
    c = std::min(c, cols - 1);
    r = std::min(r, rows - 1);
    return values[r * cols + c];
  }
};

struct SceneConfig {
  double width = 256.0;
  double height = 256.0;
  /// Expected number of points per cell.
  Field density;
  /// Background clutter level in [0, 1]; detections in cluttered cells are
  /// sometimes mislocalized. Empty means no clutter.
  Field clutter;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(width > 0.0) || !(height > 0.0)) throw Error(ErrorCode::invalid_argument, "scene dimensions must be positive");
    if (density.rows * density.cols != density.values.size() || density.values.empty()) {
      throw Error(ErrorCode::invalid_argument, "density field shape does not match its values");
    }
    for (double v : density.values) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "intensities must be >= 0");
    }
    if (!clutter.empty()) {
      if (clutter.rows * clutter.cols != clutter.values.size()) {
        throw Error(ErrorCode::invalid_argument, "clutter field shape does not match its values");
      }
      for (double v : clutter.values) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::invalid_argument, "clutter levels must lie in [0, 1]");
      }
    }
  }
};

/// Inhomogeneous Poisson sample: per density cell, Poisson(intensity)
/// points placed uniformly inside the cell.
inline PointSet generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  auto rng = make_rng(cfg.seed, {hash_name("scene")});
  const double cw = cfg.width / static_cast<double>(cfg.density.cols);
  const double ch = cfg.height / static_cast<double>(cfg.density.rows);
  std::vector<Point> pts;
  for (std::size_t r = 0; r < cfg.density.rows; ++r) {
    for (std::size_t c = 0; c < cfg.density.cols; ++c) {
      const auto n = poisson(rng, cfg.density.at(r, c));
      for (std::size_t k = 0; k < n; ++k) {
        const double x = (static_cast<double>(c) + uniform01(rng)) * cw;
        const double y = (static_cast<double>(r) + uniform01(rng)) * ch;
        pts.push_back(Point{std::min(x, cfg.width), std::min(y, cfg.height)});
      }
    }
  }
  return PointSet(cfg.width, cfg.height, std::move(pts));
}

/// Parameters of the random scene family used by experiments: crowds are
/// Gaussian blobs of density on a faint background, and a random subset of
/// patch-sized cells carries background clutter.
struct SceneFamily {
  std::size_t count = 30;
  double width = 256.0;
  double height = 256.0;
  double cell_size = 16.0;
  double background = 0.05;
  std::size_t max_blobs = 3;
  double blob_radius_min = 16.0;
  double blob_radius_max = 48.0;
  double blob_peak_min = 0.5;
  double blob_peak_max = 2.5;
  double clutter_cell = 64.0;
  double clutter_probability = 0.5;
  double clutter_min = 0.2;
  double clutter_max = 1.0;
};

inline SceneConfig make_scene_config(const SceneFamily& fam, std::uint64_t root_seed, std::size_t index) {
  auto rng = make_rng(root_seed, {hash_name("scene-config"), index});
  SceneConfig cfg;
  cfg.width = fam.width;
  cfg.height = fam.height;
  cfg.seed = derive_seed(root_seed, {hash_name("scene-points"), index});

  cfg.density.cols = static_cast<std::size_t>(std::ceil(fam.width / fam.cell_size));
  cfg.density.rows = static_cast<std::size_t>(std::ceil(fam.height / fam.cell_size));
  cfg.density.values.assign(cfg.density.rows * cfg.density.cols, fam.background);
  const std::size_t blobs = 1 + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(fam.max_blobs));
  for (std::size_t b = 0; b < std::min(blobs, fam.max_blobs); ++b) {
    const double cx = uniform01(rng) * fam.width;
    const double cy = uniform01(rng) * fam.height;
    const double radius = fam.blob_radius_min + uniform01(rng) * (fam.blob_radius_max - fam.blob_radius_min);
    const double peak = fam.blob_peak_min + uniform01(rng) * (fam.blob_peak_max - fam.blob_peak_min);
    for (std::size_t r = 0; r < cfg.density.rows; ++r) {
      for (std::size_t c = 0; c < cfg.density.cols; ++c) {
        const double x = (static_cast<double>(c) + 0.5) * fam.cell_size;
        const double y = (static_cast<double>(r) + 0.5) * fam.cell_size;
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        cfg.density.values[r * cfg.density.cols + c] += peak * std::exp(-d2 / (2.0 * radius * radius));
      }
    }
  }

  cfg.clutter.cols = static_cast<std::size_t>(std::ceil(fam.width / fam.clutter_cell));
  cfg.clutter.rows = static_cast<std::size_t>(std::ceil(fam.height / fam.clutter_cell));
  cfg.clutter.values.resize(cfg.clutter.rows * cfg.clutter.cols);
  for (auto& v : cfg.clutter.values) {
    const double u = uniform01(rng);
    const double level = fam.clutter_min + uniform01(rng) * (fam.clutter_max - fam.clutter_min);
    v = u < fam.clutter_probability ? level : 0.0;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Noisy predictor

/// Error magnitudes of a simulated point predictor. These are the "model
/// parameters" the student improves and the teacher tracks by EMA.
struct NoiseParams {
  double jitter_sigma = 2.0;
  double miss_rate_base = 0.1;
  /// Added miss probability per neighbouring ground-truth point.
  double miss_rate_density_coef = 0.03;
  /// Expected spurious points per patch.
  double false_positive_rate = 0.05;
  /// Probability (times local clutter level) that a detection is mislocalized.
  double clutter_displace_prob = 0.6;
  /// Added miss probability at clutter level 1.
  double clutter_miss_rate = 0.2;
  /// Added spurious points per patch at mean clutter level 1.
  double clutter_fp_rate = 1.0;

  static constexpr std::size_t dimension = 7;

  std::array<double, dimension> to_array() const noexcept {
    return {jitter_sigma,        miss_rate_base,        miss_rate_density_coef,
            false_positive_rate, clutter_displace_prob, clutter_miss_rate, clutter_fp_rate};
  }
  static NoiseParams from_array(std::span<const double> v) {
    if (v.size() != dimension) throw Error(ErrorCode::shape, "noise parameter vector has the wrong size");
    return NoiseParams{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
  NoiseParams scaled(double s) const noexcept {
    return NoiseParams{jitter_sigma * s,        miss_rate_base * s,        miss_rate_density_coef * s,
                       false_positive_rate * s, clutter_displace_prob * s, clutter_miss_rate * s,
                       clutter_fp_rate * s};
  }
};

struct PredictorConfig {
  NoiseParams noise;
  /// Multiplicative decay of every noise term per epoch, in (0, 1].
  double improvement_per_epoch = 0.98;
  /// Neighbourhood radius used for local density.
  double density_radius = 16.0;
  /// Mislocalized detections land uniformly within this radius.
  double displace_radius = 32.0;
  /// Jitter is multiplied by (1 + clutter_jitter_gain * clutter level).
  double clutter_jitter_gain = 2.0;
  double patch_size = 64.0;
  /// Length scale of the per-point confidence exp(-|offset| / scale).
  double confidence_scale = 4.0;
  /// Largest confidence boost in crowded patches.
  double overconfidence = 0.3;
  /// Predicted count at which the overconfidence boost saturates.
  double overconfidence_count = 30.0;
  std::uint64_t seed = 0;

  void validate() const {
    const auto v = noise.to_array();
    for (double x : v) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorCode::invalid_argument, "noise terms must be >= 0");
    }
    if (!(improvement_per_epoch > 0.0 && improvement_per_epoch <= 1.0)) {
      throw Error(ErrorCode::invalid_argument, "improvement_per_epoch must lie in (0, 1]");
    }
    if (!(patch_size > 0.0) || !(density_radius >= 0.0) || !(displace_radius >= 0.0) || !(confidence_scale > 0.0) ||
        !(overconfidence >= 0.0) || !(overconfidence_count > 0.0) || !(clutter_jitter_gain >= 0.0)) {
      throw Error(ErrorCode::invalid_argument, "invalid predictor geometry parameters");
    }
  }
};

/// Number of other ground-truth points within `radius` of each point.
inline std::vector<double> local_density(const PointSet& gt, double radius) {
  std::vector<double> out(gt.size(), 0.0);
  if (gt.empty() || !(radius > 0.0)) return out;
  const auto cols = static_cast<std::size_t>(std::ceil(gt.frame_width() / radius)) + 1;
  const auto rows = static_cast<std::size_t>(std::ceil(gt.frame_height() / radius)) + 1;
  std::vector<std::vector<std::size_t>> buckets(rows * cols);
  auto cell = [&](const Point& p) {
    return std::pair{std::min(static_cast<std::size_t>(p.y / radius), rows - 1),
                     std::min(static_cast<std::size_t>(p.x / radius), cols - 1)};
  };
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto [r, c] = cell(gt[i]);
    buckets[r * cols + c].push_back(i);
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto [r, c] = cell(gt[i]);
    double n = 0.0;
    for (std::size_t rr = (r == 0 ? 0 : r - 1); rr <= std::min(r + 1, rows - 1); ++rr) {
      for (std::size_t cc = (c == 0 ? 0 : c - 1); cc <= std::min(c + 1, cols - 1); ++cc) {
        for (auto j : buckets[rr * cols + cc]) {
          if (j != i && distance(gt[i], gt[j]) <= radius) n += 1.0;
        }
      }
    }
    out[i] = n;
  }
  return out;
}

struct Prediction {
  PointSet points;
  /// Mean proposal confidence per patch of the predictor's grid, row-major.
  std::vector<double> patch_confidence;
};

/// Everything about a ground-truth scene the predictor needs, computed once.
struct SceneTruth {
  std::string id;
  PointSet points;
  Field clutter;
  std::vector<double> density;
  PatchGrid grid;
  std::vector<PointSet> patches;
  /// Mean clutter level per patch on a 4x4 sample lattice.
  std::vector<double> patch_clutter;
  /// Per-patch appearance cue: mean clutter plus fixed observation noise.
  std::vector<double> appearance;
};

inline SceneTruth make_truth(std::string id, PointSet gt, Field clutter, const PredictorConfig& cfg) {
  SceneTruth t;
  t.id = std::move(id);
  t.density = local_density(gt, cfg.density_radius);
  t.grid = build_grid(gt.frame_width(), gt.frame_height(), cfg.patch_size);
  t.patches = crop_all(gt, t.grid);
  t.points = std::move(gt);
  t.clutter = std::move(clutter);
  const double w = t.points.frame_width();
  const double h = t.points.frame_height();
  t.patch_clutter.assign(t.grid.size(), 0.0);
  for (std::size_t k = 0; k < t.grid.size(); ++k) {
    const auto& p = t.grid.patches[k];
    double level = 0.0;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        level += t.clutter.sample(p.origin_x + (i + 0.5) * p.width / 4.0, p.origin_y + (j + 0.5) * p.height / 4.0, w, h);
      }
    }
    t.patch_clutter[k] = level / 16.0;
  }
  t.appearance = t.patch_clutter;
  return t;
}

/// Fills SceneTruth::appearance: the patch's mean clutter level (on a 4x4
/// sample lattice) plus Gaussian noise that is fixed per patch, like an image.
inline void observe_appearance(SceneTruth& t, double noise_sigma, std::uint64_t seed) {
  auto rng = make_rng(seed, {hash_name("appearance"), hash_name(t.id)});
  for (std::size_t k = 0; k < t.grid.size(); ++k) {
    t.appearance[k] = t.patch_clutter[k] + noise_sigma * standard_normal(rng);
  }
}

/// One noisy prediction of a scene. Each ground-truth point consumes exactly
/// eight uniforms from `point_rng` whatever the noise level, and each patch's
/// spurious points come from their own stream, so two predictors driven by
/// the same streams make coupled errors.
inline Prediction predict_scene(const SceneTruth& truth, const NoiseParams& noise, const PredictorConfig& cfg,
                                std::uint64_t stream_seed) {
  const double w = truth.points.frame_width();
  const double h = truth.points.frame_height();
  auto point_rng = make_rng(stream_seed, {hash_name("points")});

  std::vector<Point> pts;
  std::vector<double> conf;
  pts.reserve(truth.points.size());
  for (std::size_t i = 0; i < truth.points.size(); ++i) {
    const auto& g = truth.points[i];
    const double u_miss = uniform01(point_rng);
    const double n1 = standard_normal(point_rng);
    const double n2 = standard_normal(point_rng);
    const double u_disp = uniform01(point_rng);
    const double u_r = uniform01(point_rng);
    const double u_conf = uniform01(point_rng);
    // Eight uniforms per point: the two normals take two each.

    const double clutter = truth.clutter.sample(g.x, g.y, w, h);
    const double miss_p = std::clamp(noise.miss_rate_base + noise.miss_rate_density_coef * truth.density[i] +
                                         noise.clutter_miss_rate * clutter,
                                     0.0, 1.0);
    if (u_miss < miss_p) continue;

    const bool displaced = u_disp < std::clamp(clutter * noise.clutter_displace_prob, 0.0, 1.0);
    double dx = 0.0, dy = 0.0, c = 1.0;
    if (displaced) {
      // n1 doubles as the angle source so the draw count stays fixed.
      const double angle = 2.0 * std::numbers::pi * (0.5 + 0.5 * std::erf(n1 / std::numbers::sqrt2));
      const double rad = cfg.displace_radius * std::sqrt(u_r);
      dx = rad * std::cos(angle);
      dy = rad * std::sin(angle);
      c = 0.6 + 0.4 * u_conf;
    } else {
      const double sigma = noise.jitter_sigma * (1.0 + cfg.clutter_jitter_gain * clutter);
      dx = sigma * n1;
      dy = sigma * n2;
      c = std::exp(-std::hypot(dx, dy) / cfg.confidence_scale);
    }
    pts.push_back(Point{std::clamp(g.x + dx, 0.0, w), std::clamp(g.y + dy, 0.0, h)});
    conf.push_back(c);
  }

  const auto& grid = truth.grid;
  std::vector<double> boost(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto fp_rng = make_rng(stream_seed, {hash_name("spurious"), k});
    boost[k] = uniform01(fp_rng);
    const auto n = poisson(fp_rng, std::max(0.0, noise.false_positive_rate + noise.clutter_fp_rate * truth.patch_clutter[k]));
    const auto& patch = grid.patches[k];
    for (std::size_t s = 0; s < n; ++s) {
      const double x = patch.origin_x + uniform01(fp_rng) * patch.width;
      const double y = patch.origin_y + uniform01(fp_rng) * patch.height;
      pts.push_back(Point{std::min(x, w), std::min(y, h)});
      conf.push_back(0.6 + 0.4 * uniform01(fp_rng));
    }
  }

  std::vector<double> conf_sum(grid.size(), 0.0), count(grid.size(), 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto k = grid.locate(pts[i]);
    conf_sum[k] += conf[i];
    count[k] += 1.0;
  }
  Prediction out;
  out.patch_confidence.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double mean = count[k] > 0.0 ? conf_sum[k] / count[k] : 1.0;
    const double crowd = std::min(1.0, count[k] / cfg.overconfidence_count);
    out.patch_confidence[k] = std::clamp(mean + cfg.overconfidence * crowd * boost[k], 0.0, 1.0);
  }
  out.points = PointSet(w, h, std::move(pts));
  return out;
}

/// Prediction at a given training epoch: all noise terms decay by
/// improvement_per_epoch^epoch.
inline Prediction predict_noisy(const PointSet& gt, const PredictorConfig& cfg, int epoch, const Field& clutter = {}) {
  cfg.validate();
  if (epoch < 0) throw Error(ErrorCode::invalid_argument, "epoch must be non-negative");
  const auto truth = make_truth("scene", gt, clutter, cfg);
  const double decay = std::pow(cfg.improvement_per_epoch, epoch);
  return predict_scene(truth, cfg.noise.scaled(decay), cfg,
                       derive_seed(cfg.seed, {hash_name("predict"), static_cast<std::uint64_t>(epoch)}));
}

// ---------------------------------------------------------------------------
// Semi-supervised experiment

enum class Strategy { ours, without_filtering, softmax, acd, awd, hungarian, l1_loss, without_average };

inline constexpr std::array<Strategy, 8> all_strategies{Strategy::ours,      Strategy::without_filtering,
                                                        Strategy::softmax,   Strategy::acd,
                                                        Strategy::awd,       Strategy::hungarian,
                                                        Strategy::l1_loss,   Strategy::without_average};

inline std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::ours: return "ours";
    case Strategy::without_filtering: return "w/o-filtering";
    case Strategy::softmax: return "softmax";
    case Strategy::acd: return "acd";
    case Strategy::awd: return "awd";
    case Strategy::hungarian: return "hungarian";
    case Strategy::l1_loss: return "l1-loss";
    case Strategy::without_average: return "w/o-average";
  }
  return "ours";
}

inline std::optional<Strategy> parse_strategy(std::string_view name) noexcept {
  for (auto s : all_strategies) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

/// How a strategy turns labeled-patch errors into unlabeled-patch scores.
struct StrategyTraits {
  enum class Scoring { scorer, softmax, none };
  Scoring scoring = Scoring::scorer;
  SurrogateMetric metric = SurrogateMetric::asm_step;
  AsmReduction reduction = AsmReduction::mean;
  ScorerLoss loss = ScorerLoss::rank;
};

inline StrategyTraits traits(Strategy s) noexcept {
  StrategyTraits t;
  switch (s) {
    case Strategy::ours: break;
    case Strategy::without_filtering: t.scoring = StrategyTraits::Scoring::none; break;
    case Strategy::softmax: t.scoring = StrategyTraits::Scoring::softmax; break;
    case Strategy::acd: t.metric = SurrogateMetric::acd; break;
    case Strategy::awd: t.metric = SurrogateMetric::awd; break;
    case Strategy::hungarian: t.metric = SurrogateMetric::hungarian; break;
    case Strategy::l1_loss: t.loss = ScorerLoss::l1; break;
    case Strategy::without_average: t.reduction = AsmReduction::last; break;
  }
  return t;
}

struct ExperimentConfig {
  SceneFamily scenes;
  PredictorConfig predictor;
  double labeled_fraction = 0.1;
  int epochs = 40;
  ThresholdSchedule schedule{4, 32, 0.1, 0.6};
  double ema_decay = 0.99;
  /// EMA updates applied per simulated epoch (one per training iteration).
  int ema_steps_per_epoch = 20;
  double lambda1 = 0.3;
  SelectionBoundary boundary = SelectionBoundary::strict;
  /// Gradient steps per scorer refit (warm-started every epoch).
  std::size_t scorer_steps = 30;
  double scorer_step_size = 2.0;
  /// Relative noise reduction per unit of (lambda1 * mean label benefit).
  double pseudo_gain = 0.1;
  /// Label error (matching distance / C) at which a pseudo-label stops helping.
  double pseudo_quality_reference = 0.15;
  double noise_scale_floor = 0.05;
  double noise_scale_cap = 2.0;
  /// A pseudo-label is "good" for precision/recall when its count error is at
  /// most max(1, good_count_tolerance * N_gt).
  double good_count_tolerance = 0.1;
  /// Append the patch appearance cue to the scorer's prediction features.
  bool appearance_feature = true;
  double appearance_noise = 0.1;
  /// Strong augmentation: before a pseudo-label is used, the points inside a
  /// random rectangle covering 25% of the patch are removed from both the
  /// label and the region it is scored against.
  bool cutout = false;
  bool record_selected = false;
  std::uint64_t seed = 0;

  void validate() const {
    predictor.validate();
    if (!(appearance_noise >= 0.0)) throw Error(ErrorCode::invalid_experiment, "appearance noise must be >= 0");
    schedule.validate();
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) {
      throw Error(ErrorCode::invalid_experiment, "labeled fraction must lie in (0, 1]");
    }
    if (scenes.count < 2) throw Error(ErrorCode::invalid_experiment, "need at least two scenes");
    if (epochs < 1) throw Error(ErrorCode::invalid_experiment, "need at least one epoch");
    if (!(ema_decay > 0.0 && ema_decay < 1.0) || ema_steps_per_epoch < 1) {
      throw Error(ErrorCode::invalid_experiment, "invalid EMA settings");
    }
    if (!(lambda1 >= 0.0) || !(pseudo_gain >= 0.0) || !(pseudo_quality_reference > 0.0)) {
      throw Error(ErrorCode::invalid_experiment, "invalid pseudo-label feedback settings");
    }
    if (!(noise_scale_floor > 0.0 && noise_scale_floor <= noise_scale_cap)) {
      throw Error(ErrorCode::invalid_experiment, "invalid noise scale bounds");
    }
    if (scenes.width < predictor.patch_size || scenes.height < predictor.patch_size) {
      throw Error(ErrorCode::invalid_experiment, "scenes are smaller than one patch");
    }
  }
};

struct SelectedPatch {
  PatchKey key;
  double kappa = 0.0;
  std::size_t n_pseudo = 0;
  std::size_t n_gt = 0;
  double distance = 0.0;
};

struct EpochLog {
  int epoch = 0;
  std::optional<double> threshold;
  std::size_t candidates = 0;
  std::size_t selected = 0;
  double count_mae = 0.0;       // over this epoch's selected patches
  double mean_distance = 0.0;   // over this epoch's selected patches
  double precision = 0.0;
  double recall = 0.0;
  double student_scale = 1.0;
  double teacher_scale = 1.0;
  std::vector<SelectedPatch> selected_patches;  // only with record_selected
};

struct RunResult {
  Strategy strategy = Strategy::ours;
  std::uint64_t seed = 0;
  std::size_t labeled_patches = 0;
  std::size_t unlabeled_patches = 0;
  std::size_t selected_total = 0;
  /// Pooled over every (epoch, selected patch).
  double selected_count_mae = 0.0;
  double selected_mean_distance = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// Final student evaluated on every scene.
  double scene_mae = 0.0;
  double scene_rmse = 0.0;
  std::vector<EpochLog> epochs;
};

struct World {
  std::vector<SceneTruth> labeled;
  std::vector<SceneTruth> unlabeled;
};

/// Scenes and the labeled/unlabeled split depend only on the seed, never on
/// the strategy.
inline World make_world(const ExperimentConfig& cfg, std::uint64_t seed) {
  World world;
  const std::size_t n_labeled = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.labeled_fraction * static_cast<double>(cfg.scenes.count))));
  for (std::size_t i = 0; i < cfg.scenes.count; ++i) {
    auto sc = make_scene_config(cfg.scenes, seed, i);
    auto gt = generate_scene(sc);
    auto truth = make_truth("scene" + std::to_string(i), std::move(gt), std::move(sc.clutter), cfg.predictor);
    observe_appearance(truth, cfg.appearance_noise, seed);
    (i < n_labeled ? world.labeled : world.unlabeled).push_back(std::move(truth));
  }
  return world;
}

namespace detail {

inline std::uint64_t stream(std::uint64_t seed, std::string_view role, std::size_t scene, int epoch) {
  return derive_seed(seed, {hash_name(role), scene, static_cast<std::uint64_t>(epoch)});
}

inline double abs_diff(std::size_t a, std::size_t b) noexcept {
  return static_cast<double>(a > b ? a - b : b - a);
}

inline std::vector<double> patch_features(const SceneTruth& scene, std::size_t k, const PointSet& pred,
                                          bool with_appearance) {
  auto f = extract_features(pred, scene.grid.patches[k]);
  if (with_appearance) f.push_back(scene.appearance[k]);
  return f;
}

inline PointSet without_rect(const PointSet& pts, double x0, double y0, double w, double h) {
  std::vector<Point> kept;
  for (const auto& p : pts) {
    if (!(p.x >= x0 && p.x < x0 + w && p.y >= y0 && p.y < y0 + h)) kept.push_back(p);
  }
  return PointSet(pts.frame_width(), pts.frame_height(), std::move(kept));
}

inline std::vector<std::string> feature_spec(bool with_appearance) {
  auto spec = default_feature_spec();
  if (with_appearance) spec.push_back("appearance");
  return spec;
}

}  // namespace detail

/// One semi-supervised run of a single filtering strategy.
///
/// Per epoch: the student predicts the labeled scenes and the patch bank
/// accumulates the strategy's surrogate; the scorer is refit on normalized
/// bank values; the EMA teacher predicts and scores the unlabeled patches;
/// patches under the scheduled threshold become pseudo-labels; and their true
/// quality feeds back into the student's noise level (good labels shrink it,
/// bad labels grow it), scaled by lambda1.
inline RunResult run_semi_supervised(const ExperimentConfig& cfg, Strategy strategy, std::uint64_t seed) {
  cfg.validate();
  const auto tr = traits(strategy);
  const World world = make_world(cfg, seed);

  RunResult result;
  result.strategy = strategy;
  result.seed = seed;
  for (const auto& s : world.labeled) result.labeled_patches += s.grid.size();
  for (const auto& s : world.unlabeled) result.unlabeled_patches += s.grid.size();
  if (result.labeled_patches == 0) throw Error(ErrorCode::invalid_experiment, "no labeled patches");

  const double penalty_c = PatchSpec{0, 0, cfg.predictor.patch_size, cfg.predictor.patch_size}.diagonal();
  AsmBank bank(penalty_c);
  std::vector<PatchKey> labeled_keys;
  for (const auto& s : world.labeled) {
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      labeled_keys.push_back(PatchKey{s.id, k});
      bank.register_patch(labeled_keys.back());
    }
  }

  const auto base = cfg.predictor.noise.to_array();
  double student_scale = 1.0;
  EmaState teacher{std::vector<double>(base.begin(), base.end()), cfg.ema_decay};
  std::optional<UncertaintyScorer> scorer;

  double sum_count_err = 0.0, sum_distance = 0.0;
  std::size_t good_selected = 0, good_total = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const NoiseParams student = cfg.predictor.noise.scaled(student_scale);

    // (1) student on labeled scenes -> surrogate bank
    std::vector<RankingSample> samples;
    samples.reserve(labeled_keys.size());
    for (std::size_t si = 0; si < world.labeled.size(); ++si) {
      const auto& scene = world.labeled[si];
      const auto pred = predict_scene(scene, student, cfg.predictor, detail::stream(seed, "student", si, epoch));
      const auto pred_patches = crop_all(pred.points, scene.grid);
      for (std::size_t k = 0; k < scene.grid.size(); ++k) {
        const PatchKey key{scene.id, k};
        bank.record_distance(key, surrogate_distance(tr.metric, pred_patches[k], scene.patches[k], penalty_c));
        if (tr.scoring == StrategyTraits::Scoring::scorer) {
          samples.push_back(
              RankingSample{0.0, 0.0, detail::patch_features(scene, k, pred_patches[k], cfg.appearance_feature)});
        }
      }
    }

    // (2) refit the scorer on normalized surrogate targets
    if (tr.scoring == StrategyTraits::Scoring::scorer) {
      const auto batch = normalize_batch(bank, labeled_keys, tr.reduction);
      for (std::size_t i = 0; i < samples.size(); ++i) samples[i].a = batch.a_values[i];
      std::vector<double> a(batch.a_values);
      if (tr.loss == ScorerLoss::l1 || strict_pair_count(a) > 0) {
        TrainOptions opt;
        opt.epochs = cfg.scorer_steps;
        opt.step_size = cfg.scorer_step_size;
        opt.seed = derive_seed(seed, {hash_name("trainer"), static_cast<std::uint64_t>(epoch)});
        opt.loss = tr.loss;
        opt.initial = scorer;
        opt.feature_spec = detail::feature_spec(cfg.appearance_feature);
        scorer = train_scorer(samples, opt).scorer;
      }
    }

    // (3) teacher on unlabeled scenes -> candidates
    const auto threshold = threshold_at(cfg.schedule, epoch);
    const NoiseParams teacher_noise = NoiseParams::from_array(teacher.teacher_params);
    EpochLog log;
    log.epoch = epoch;
    log.threshold = threshold;
    double epoch_count_err = 0.0, epoch_distance = 0.0, benefit = 0.0;
    std::size_t epoch_good_selected = 0, epoch_good = 0;

    for (std::size_t si = 0; si < world.unlabeled.size(); ++si) {
      const auto& scene = world.unlabeled[si];
      const auto pred = predict_scene(scene, teacher_noise, cfg.predictor, detail::stream(seed, "teacher", si, epoch));
      const auto pred_patches = crop_all(pred.points, scene.grid);
      std::vector<Candidate> candidates;
      candidates.reserve(scene.grid.size());
      for (std::size_t k = 0; k < scene.grid.size(); ++k) {
        double kappa = 0.0;
        switch (tr.scoring) {
          case StrategyTraits::Scoring::scorer:
            kappa = scorer ? scorer->score(detail::patch_features(scene, k, pred_patches[k], cfg.appearance_feature))
                           : 0.5;
            break;
          case StrategyTraits::Scoring::softmax: kappa = 1.0 - pred.patch_confidence[k]; break;
          case StrategyTraits::Scoring::none: kappa = 0.0; break;
        }
        candidates.push_back(Candidate{PatchKey{scene.id, k}, pred_patches[k], kappa});
      }
      log.candidates += candidates.size();

      // (4) threshold selection; without filtering everything passes once
      // the warm-up is over.
      std::vector<PseudoLabel> chosen;
      if (tr.scoring == StrategyTraits::Scoring::none) {
        chosen = select_pseudo_labels(candidates, threshold ? std::optional<double>(1.0) : std::nullopt, epoch,
                                      SelectionBoundary::inclusive);
      } else {
        chosen = select_pseudo_labels(candidates, threshold, epoch, cfg.boundary);
      }

      std::vector<char> picked(scene.grid.size(), 0);
      for (const auto& label : chosen) {
        const auto k = label.key.patch_index;
        picked[k] = 1;
        PointSet used = label.points;
        PointSet gt = scene.patches[k];
        if (cfg.cutout) {
          auto rng = make_rng(detail::stream(seed, "cutout", si, epoch), {k});
          const double w = gt.frame_width() / 2.0;
          const double h = gt.frame_height() / 2.0;
          const double x0 = uniform01(rng) * w;
          const double y0 = uniform01(rng) * h;
          used = detail::without_rect(used, x0, y0, w, h);
          gt = detail::without_rect(gt, x0, y0, w, h);
        }
        const double err = detail::abs_diff(used.size(), gt.size());
        const double dist = spatial_matching_distance(used, gt, penalty_c).distance;
        epoch_count_err += err;
        epoch_distance += dist;
        benefit += std::clamp(1.0 - (dist / penalty_c) / cfg.pseudo_quality_reference, -1.0, 1.0);
        if (cfg.record_selected) {
          log.selected_patches.push_back(SelectedPatch{label.key, label.kappa, used.size(), gt.size(), dist});
        }
      }
      log.selected += chosen.size();
      if (threshold) {
        for (std::size_t k = 0; k < scene.grid.size(); ++k) {
          const auto n_gt = scene.patches[k].size();
          const bool good = detail::abs_diff(pred_patches[k].size(), n_gt) <=
                            std::max(1.0, cfg.good_count_tolerance * static_cast<double>(n_gt));
          if (good) {
            ++epoch_good;
            if (picked[k]) ++epoch_good_selected;
          }
        }
      }
    }

    if (log.selected > 0) {
      log.count_mae = epoch_count_err / static_cast<double>(log.selected);
      log.mean_distance = epoch_distance / static_cast<double>(log.selected);
      log.precision = static_cast<double>(epoch_good_selected) / static_cast<double>(log.selected);
    }
    if (epoch_good > 0) log.recall = static_cast<double>(epoch_good_selected) / static_cast<double>(epoch_good);
    sum_count_err += epoch_count_err;
    sum_distance += epoch_distance;
    result.selected_total += log.selected;
    good_selected += epoch_good_selected;
    good_total += epoch_good;

    // (5) student update: supervised progress, then pseudo-label feedback
    const double gain = result.unlabeled_patches == 0
                            ? 0.0
                            : cfg.lambda1 * cfg.pseudo_gain * benefit / static_cast<double>(result.unlabeled_patches);
    student_scale = std::clamp(student_scale * cfg.predictor.improvement_per_epoch * (1.0 - gain),
                               cfg.noise_scale_floor, cfg.noise_scale_cap);

    // (6) EMA teacher tracks the student
    const auto student_now = cfg.predictor.noise.scaled(student_scale).to_array();
    for (int s = 0; s < cfg.ema_steps_per_epoch; ++s) teacher = ema_update(std::move(teacher), student_now);

    log.student_scale = student_scale;
    log.teacher_scale = base[0] > 0.0 ? teacher.teacher_params[0] / base[0] : student_scale;
    result.epochs.push_back(std::move(log));
  }

  if (result.selected_total > 0) {
    result.selected_count_mae = sum_count_err / static_cast<double>(result.selected_total);
    result.selected_mean_distance = sum_distance / static_cast<double>(result.selected_total);
    result.precision = static_cast<double>(good_selected) / static_cast<double>(result.selected_total);
  }
  if (good_total > 0) result.recall = static_cast<double>(good_selected) / static_cast<double>(good_total);

  // Final student on every scene.
  const NoiseParams final_noise = cfg.predictor.noise.scaled(student_scale);
  double abs_sum = 0.0, sq_sum = 0.0;
  std::size_t n_scenes = 0, idx = 0;
  for (const auto* group : {&world.labeled, &world.unlabeled}) {
    for (const auto& scene : *group) {
      const auto pred = predict_scene(scene, final_noise, cfg.predictor, detail::stream(seed, "final", idx++, 0));
      const double err = detail::abs_diff(pred.points.size(), scene.points.size());
      abs_sum += err;
      sq_sum += err * err;
      ++n_scenes;
    }
  }
  result.scene_mae = abs_sum / static_cast<double>(n_scenes);
  result.scene_rmse = std::sqrt(sq_sum / static_cast<double>(n_scenes));
  return result;
}

// ---------------------------------------------------------------------------
// Ablation suite

struct StrategySummary {
  Strategy strategy = Strategy::ours;
  double count_mae_mean = 0.0, count_mae_std = 0.0;
  double distance_mean = 0.0, distance_std = 0.0;
  double precision_mean = 0.0, recall_mean = 0.0;
  double scene_mae_mean = 0.0, scene_mae_std = 0.0;
  double scene_rmse_mean = 0.0;
  /// Mean per-seed rank by selected-patch count-MAE (1 = best).
  double mean_rank = 0.0;
};

struct AblationReport {
  std::vector<Strategy> strategies;
  std::vector<std::uint64_t> seeds;
  /// runs[s * seeds.size() + k] is strategy s on seed k.
  std::vector<RunResult> runs;
  std::vector<StrategySummary> summary;

  const RunResult& run(std::size_t strategy_index, std::size_t seed_index) const {
    return runs[strategy_index * seeds.size() + seed_index];
  }
};

inline std::vector<StrategySummary> summarize(const AblationReport& report) {
  const std::size_t ns = report.strategies.size();
  const std::size_t nk = report.seeds.size();
  std::vector<StrategySummary> out(ns);
  std::vector<double> rank_sum(ns, 0.0);
  for (std::size_t k = 0; k < nk; ++k) {
    std::vector<double> mae(ns);
    for (std::size_t s = 0; s < ns; ++s) mae[s] = report.run(s, k).selected_count_mae;
    const auto ranks = stats::average_ranks(mae);
    for (std::size_t s = 0; s < ns; ++s) rank_sum[s] += ranks[s];
  }
  for (std::size_t s = 0; s < ns; ++s) {
    std::vector<double> mae, dist, prec, rec, smae, srmse;
    for (std::size_t k = 0; k < nk; ++k) {
      const auto& r = report.run(s, k);
      mae.push_back(r.selected_count_mae);
      dist.push_back(r.selected_mean_distance);
      prec.push_back(r.precision);
      rec.push_back(r.recall);
      smae.push_back(r.scene_mae);
      srmse.push_back(r.scene_rmse);
    }
    auto& o = out[s];
    o.strategy = report.strategies[s];
    o.count_mae_mean = stats::mean(mae);
    o.count_mae_std = stats::stdev(mae);
    o.distance_mean = stats::mean(dist);
    o.distance_std = stats::stdev(dist);
    o.precision_mean = stats::mean(prec);
    o.recall_mean = stats::mean(rec);
    o.scene_mae_mean = stats::mean(smae);
    o.scene_mae_std = stats::stdev(smae);
    o.scene_rmse_mean = stats::mean(srmse);
    o.mean_rank = nk == 0 ? 0.0 : rank_sum[s] / static_cast<double>(nk);
  }
  return out;
}

/// Runs every (strategy, seed) cell on at most `workers` threads. Cells are
/// independent and results land in fixed slots, so the report does not
/// depend on the worker count.
inline AblationReport run_ablation_suite(const ExperimentConfig& cfg, std::span<const Strategy> strategies,
                                         std::span<const std::uint64_t> seeds, std::size_t workers = 1) {
  if (strategies.size() < 2) throw Error(ErrorCode::invalid_experiment, "ablation needs at least two strategies");
  if (seeds.size() < 3) throw Error(ErrorCode::invalid_experiment, "ablation needs at least three seeds");
  cfg.validate();
  AblationReport report;
  report.strategies.assign(strategies.begin(), strategies.end());
  report.seeds.assign(seeds.begin(), seeds.end());
  report.runs.resize(strategies.size() * seeds.size());

  const std::size_t cells = report.runs.size();
  workers = std::clamp<std::size_t>(workers, 1, cells);
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) {
      report.runs[c] = run_semi_supervised(cfg, strategies[c / seeds.size()], seeds[c % seeds.size()]);
    }
  } else {
    for (std::size_t start = 0; start < cells; start += workers) {
      std::vector<std::future<RunResult>> jobs;
      for (std::size_t c = start; c < std::min(cells, start + workers); ++c) {
        jobs.push_back(std::async(std::launch::async, [&cfg, s = strategies[c / seeds.size()],
                                                       k = seeds[c % seeds.size()]] {
          return run_semi_supervised(cfg, s, k);
        }));
      }
      for (std::size_t j = 0; j < jobs.size(); ++j) report.runs[start + j] = jobs[j].get();
    }
  }
  report.summary = summarize(report);
  return report;
}

// ---------------------------------------------------------------------------
// Scorer calibration study

struct CalibrationResult {
  /// Kendall tau between learned kappa and normalized ASM on training patches.
  double train_kendall = 0.0;
  /// Spearman between kappa and the expected matching distance on held-out
  /// patches (mean over as many predictor draws as training epochs).
  double heldout_spearman = 0.0;
  /// Same, against a single draw of the held-out prediction.
  double heldout_spearman_single = 0.0;
  /// Expected-distance Spearman for the softmax confidence baseline.
  double softmax_spearman = 0.0;
  /// Mean kappa over the densest / sparsest quartile of held-out patches.
  double kappa_top_density = 0.0;
  double kappa_bottom_density = 0.0;
  std::size_t train_patches = 0;
  std::size_t heldout_patches = 0;
};

struct CalibrationConfig {
  SceneFamily scenes{.count = 20};
  PredictorConfig predictor;
  double train_fraction = 0.5;
  /// Epochs of student predictions accumulated into the bank.
  int epochs = 10;
  TrainOptions trainer = [] {
    TrainOptions t;
    t.epochs = 300;
    t.step_size = 2.0;
    return t;
  }();
  bool appearance_feature = true;
  double appearance_noise = 0.1;
};

/// Accumulates ASM on training scenes from a noisy predictor, fits the scorer
/// on prediction features, then checks how well kappa ranks the actual
/// prediction error on held-out scenes.
inline CalibrationResult calibrate_scorer(const CalibrationConfig& cfg, std::uint64_t seed) {
  cfg.predictor.validate();
  std::vector<SceneTruth> train, held;
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(cfg.scenes.count)));
  for (std::size_t i = 0; i < cfg.scenes.count; ++i) {
    auto sc = make_scene_config(cfg.scenes, seed, i);
    auto gt = generate_scene(sc);
    auto t = make_truth("scene" + std::to_string(i), std::move(gt), std::move(sc.clutter), cfg.predictor);
    observe_appearance(t, cfg.appearance_noise, seed);
    (i < n_train ? train : held).push_back(std::move(t));
  }
  if (train.empty() || held.empty()) throw Error(ErrorCode::invalid_experiment, "calibration needs train and held-out scenes");

  const double penalty_c = PatchSpec{0, 0, cfg.predictor.patch_size, cfg.predictor.patch_size}.diagonal();
  AsmBank bank(penalty_c);
  std::vector<PatchKey> keys;
  std::vector<std::vector<double>> last_features;
  for (const auto& s : train) {
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      keys.push_back(PatchKey{s.id, k});
      bank.register_patch(keys.back());
    }
  }
  last_features.resize(keys.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto noise = cfg.predictor.noise.scaled(std::pow(cfg.predictor.improvement_per_epoch, epoch));
    std::size_t idx = 0;
    for (std::size_t si = 0; si < train.size(); ++si) {
      const auto& s = train[si];
      const auto pred = predict_scene(s, noise, cfg.predictor, detail::stream(seed, "calib-train", si, epoch));
      const auto patches = crop_all(pred.points, s.grid);
      for (std::size_t k = 0; k < s.grid.size(); ++k, ++idx) {
        bank.record_epoch(keys[idx], patches[k], s.patches[k]);
        last_features[idx] = detail::patch_features(s, k, patches[k], cfg.appearance_feature);
      }
    }
  }
  const auto batch = normalize_batch(bank, keys);
  std::vector<RankingSample> samples;
  for (std::size_t i = 0; i < keys.size(); ++i) samples.push_back(RankingSample{batch.a_values[i], 0.0, last_features[i]});
  auto opt = cfg.trainer;
  opt.seed = derive_seed(seed, {hash_name("calib-trainer")});
  opt.feature_spec = detail::feature_spec(cfg.appearance_feature);
  const auto fit = train_scorer(samples, opt);

  CalibrationResult out;
  out.train_patches = samples.size();
  std::vector<double> kappa_train;
  for (const auto& s : samples) kappa_train.push_back(fit.scorer.score(s.features));
  out.train_kendall = stats::kendall_tau(kappa_train, batch.a_values);

  const auto noise = cfg.predictor.noise.scaled(std::pow(cfg.predictor.improvement_per_epoch, cfg.epochs));
  std::vector<double> kappa, soft, single_dist, expected_dist, density;
  for (std::size_t si = 0; si < held.size(); ++si) {
    const auto& s = held[si];
    const auto pred = predict_scene(s, noise, cfg.predictor, detail::stream(seed, "calib-held", si, cfg.epochs));
    const auto patches = crop_all(pred.points, s.grid);
    std::vector<double> acc(s.grid.size(), 0.0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const auto draw_noise = cfg.predictor.noise.scaled(std::pow(cfg.predictor.improvement_per_epoch, epoch));
      const auto draw = predict_scene(s, draw_noise, cfg.predictor, detail::stream(seed, "calib-held-draw", si, epoch));
      const auto draw_patches = crop_all(draw.points, s.grid);
      for (std::size_t k = 0; k < s.grid.size(); ++k) {
        acc[k] += spatial_matching_distance(draw_patches[k], s.patches[k], penalty_c).distance;
      }
    }
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      kappa.push_back(fit.scorer.score(detail::patch_features(s, k, patches[k], cfg.appearance_feature)));
      soft.push_back(1.0 - pred.patch_confidence[k]);
      single_dist.push_back(spatial_matching_distance(patches[k], s.patches[k], penalty_c).distance);
      expected_dist.push_back(acc[k] / static_cast<double>(cfg.epochs));
      density.push_back(static_cast<double>(s.patches[k].size()));
    }
  }
  out.heldout_patches = kappa.size();
  out.heldout_spearman = stats::spearman(kappa, expected_dist);
  out.heldout_spearman_single = stats::spearman(kappa, single_dist);
  out.softmax_spearman = stats::spearman(soft, expected_dist);

  std::vector<std::size_t> order(density.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto l, auto r) { return density[l] < density[r]; });
  const std::size_t q = std::max<std::size_t>(1, order.size() / 4);
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    lo += kappa[order[i]];
    hi += kappa[order[order.size() - 1 - i]];
  }
  out.kappa_bottom_density = lo / static_cast<double>(q);
  out.kappa_top_density = hi / static_cast<double>(q);
  return out;
}

/// Samples whose target is a monotone function of a hidden linear score of
/// the features plus a little label noise, so a linear scorer can rank them.
struct RankableConfig {
  std::size_t samples = 256;
  std::size_t features = 4;
  double label_noise = 0.01;
  TrainOptions trainer = [] {
    TrainOptions t;
    t.epochs = 300;
    t.step_size = 2.0;
    return t;
  }();
};

inline std::vector<RankingSample> rankable_samples(const RankableConfig& cfg, std::uint64_t seed) {
  if (cfg.samples < 2 || cfg.features == 0 || !(cfg.label_noise >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "rankable data needs >= 2 samples, >= 1 feature, noise >= 0");
  }
  auto rng = make_rng(seed, {hash_name("rankable")});
  std::vector<double> w(cfg.features), offset(cfg.features), scale(cfg.features);
  for (std::size_t j = 0; j < cfg.features; ++j) {
    w[j] = standard_normal(rng);
    offset[j] = 10.0 * standard_normal(rng);
    scale[j] = 0.5 + 4.5 * uniform01(rng);
  }
  std::vector<double> raw(cfg.samples);
  std::vector<RankingSample> out(cfg.samples);
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    double z = 0.0;
    out[i].features.resize(cfg.features);
    for (std::size_t j = 0; j < cfg.features; ++j) {
      const double x = standard_normal(rng);
      z += w[j] * x;
      out[i].features[j] = offset[j] + scale[j] * x;
    }
    raw[i] = asmu::detail::sigmoid(z) + cfg.label_noise * standard_normal(rng);
  }
  const auto a = min_max_normalize(raw);
  for (std::size_t i = 0; i < cfg.samples; ++i) out[i].a = a[i];
  return out;
}

/// Kendall tau between the fitted scorer's kappa and the targets it was trained on.
inline double rankable_train_kendall(const RankableConfig& cfg, std::uint64_t seed) {
  const auto samples = rankable_samples(cfg, seed);
  auto opt = cfg.trainer;
  opt.seed = derive_seed(seed, {hash_name("rankable-trainer")});
  opt.feature_spec.clear();
  for (std::size_t j = 0; j < cfg.features; ++j) opt.feature_spec.push_back("f" + std::to_string(j));
  const auto fit = train_scorer(samples, opt);
  std::vector<double> kappa, a;
  for (const auto& s : samples) {
    kappa.push_back(fit.scorer.score(s.features));
    a.push_back(s.a);
  }
  return stats::kendall_tau(kappa, a);
}

}  // namespace asmu::sim
