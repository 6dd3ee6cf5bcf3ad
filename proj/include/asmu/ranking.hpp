#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "asmu/error.hpp"
#include "asmu/geometry.hpp"
#include "asmu/random.hpp"

namespace asmu {

struct RankingSample {
  double a = 0.0;      // normalized surrogate
  double kappa = 0.0;  // scorer output
  std::vector<double> features;
};

namespace detail {

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + e^x) without overflow or cancellation.
inline double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double pairwise_sum(std::span<const double> xs) noexcept {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const auto half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline void check_finite(std::span<const double> a, std::span<const double> kappa) {
  if (a.size() != kappa.size()) throw Error(ErrorCode::shape, "a and kappa differ in length");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(kappa[i])) {
      throw Error(ErrorCode::invalid_input, "non-finite ranking input");
    }
  }
}

}  // namespace detail

/// Pairwise ranking loss: over ordered pairs with a_i > a_j,
///   sum |a_i - a_j| * log2(1 + exp(-(kappa_i - kappa_j))).
/// Pairs with equal a contribute nothing.
inline double lambda_rank_loss(std::span<const double> a, std::span<const double> kappa) {
  detail::check_finite(a, kappa);
  std::vector<double> rows(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a[i] > a[j]) row += (a[i] - a[j]) * detail::softplus(-(kappa[i] - kappa[j]));
    }
    rows[i] = row;
  }
  return detail::pairwise_sum(rows) / std::numbers::ln2;
}

/// d(lambda_rank_loss)/d(kappa_k) for every sample k.
inline std::vector<double> lambda_rank_gradient(std::span<const double> a, std::span<const double> kappa) {
  detail::check_finite(a, kappa);
  std::vector<double> grad(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (!(a[i] > a[j])) continue;
      const double g = (a[i] - a[j]) * detail::sigmoid(-(kappa[i] - kappa[j])) / std::numbers::ln2;
      grad[i] -= g;
      grad[j] += g;
    }
  }
  return grad;
}

namespace detail {
inline void split(std::span<const RankingSample> batch, std::vector<double>& a, std::vector<double>& k) {
  a.clear();
  k.clear();
  for (const auto& s : batch) {
    a.push_back(s.a);
    k.push_back(s.kappa);
  }
}
}  // namespace detail

inline double lambda_rank_loss(std::span<const RankingSample> batch) {
  if (batch.empty()) throw Error(ErrorCode::invalid_argument, "ranking batch is empty");
  std::vector<double> a, k;
  detail::split(batch, a, k);
  return lambda_rank_loss(a, k);
}

inline std::vector<double> lambda_rank_gradient(std::span<const RankingSample> batch) {
  if (batch.empty()) throw Error(ErrorCode::invalid_argument, "ranking batch is empty");
  std::vector<double> a, k;
  detail::split(batch, a, k);
  return lambda_rank_gradient(a, k);
}

/// Number of ordered pairs with a_i > a_j.
inline std::size_t strict_pair_count(std::span<const double> a) {
  std::vector<double> sorted(a.begin(), a.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    pairs += static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), sorted[i]) - sorted.begin());
  }
  return pairs;
}

/// Pointwise L1 alternative to the ranking loss: mean |kappa - a|.
inline double l1_loss(std::span<const double> a, std::span<const double> kappa) {
  detail::check_finite(a, kappa);
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(kappa[i] - a[i]);
  return s / static_cast<double>(a.size());
}

inline std::vector<double> l1_gradient(std::span<const double> a, std::span<const double> kappa) {
  detail::check_finite(a, kappa);
  std::vector<double> grad(a.size(), 0.0);
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (kappa[i] > a[i]) grad[i] = 1.0 / n;
    else if (kappa[i] < a[i]) grad[i] = -1.0 / n;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Patch features

inline const std::vector<std::string>& default_feature_spec() {
  static const std::vector<std::string> spec{"count", "mean_nn_distance", "border_count", "subgrid_variance"};
  return spec;
}

inline constexpr double border_margin = 4.0;
inline constexpr std::size_t subgrid_cells = 4;

/// Descriptor of a predicted patch: point count, mean nearest-neighbour
/// distance (0 with fewer than two points), number of points within 4 px of
/// the patch border, and population variance of point counts over a 4x4
/// sub-grid.
inline std::vector<double> extract_features(const PointSet& pred, const PatchSpec& patch) {
  const std::size_t n = pred.size();
  double mean_nn = 0.0;
  if (n >= 2) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) best = std::min(best, distance(pred[i], pred[j]));
      }
      total += best;
    }
    mean_nn = total / static_cast<double>(n);
  }

  std::size_t border = 0;
  std::vector<double> cells(subgrid_cells * subgrid_cells, 0.0);
  const double cw = patch.width / static_cast<double>(subgrid_cells);
  const double ch = patch.height / static_cast<double>(subgrid_cells);
  for (const auto& p : pred) {
    const double edge = std::min({p.x, p.y, patch.width - p.x, patch.height - p.y});
    if (edge <= border_margin) ++border;
    const auto cx = std::min(static_cast<std::size_t>(p.x / cw), subgrid_cells - 1);
    const auto cy = std::min(static_cast<std::size_t>(p.y / ch), subgrid_cells - 1);
    cells[cy * subgrid_cells + cx] += 1.0;
  }
  const double cell_mean = static_cast<double>(n) / static_cast<double>(cells.size());
  double var = 0.0;
  for (double c : cells) var += (c - cell_mean) * (c - cell_mean);
  var /= static_cast<double>(cells.size());

  return {static_cast<double>(n), mean_nn, static_cast<double>(border), var};
}

// ---------------------------------------------------------------------------
// Scorer

/// Squashed linear uncertainty scorer, kappa = sigmoid(w . z + b), where z is
/// the feature vector standardized with the stored per-feature offset/scale.
struct UncertaintyScorer {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<std::string> feature_spec;
  std::vector<double> feature_offset;
  std::vector<double> feature_scale;

  static UncertaintyScorer untrained(const std::vector<std::string>& spec) {
    UncertaintyScorer s;
    s.feature_spec = spec;
    s.weights.assign(spec.size(), 0.0);
    s.feature_offset.assign(spec.size(), 0.0);
    s.feature_scale.assign(spec.size(), 1.0);
    return s;
  }

  std::size_t dimension() const noexcept { return weights.size(); }

  std::vector<double> standardize(std::span<const double> x) const {
    if (x.size() != weights.size()) throw Error(ErrorCode::shape, "feature vector has the wrong dimension");
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - feature_offset[i]) / feature_scale[i];
    return z;
  }

  double logit_standardized(std::span<const double> z) const noexcept {
    double s = bias;
    for (std::size_t i = 0; i < z.size(); ++i) s += weights[i] * z[i];
    return s;
  }

  double score(std::span<const double> x) const {
    const auto z = standardize(x);
    return detail::sigmoid(logit_standardized(z));
  }

  nlohmann::json to_json() const {
    return {{"weights", weights},
            {"bias", bias},
            {"feature_spec", feature_spec},
            {"feature_offset", feature_offset},
            {"feature_scale", feature_scale}};
  }

  static UncertaintyScorer from_json(const nlohmann::json& j) {
    try {
      UncertaintyScorer s;
      s.weights = j.at("weights").get<std::vector<double>>();
      s.bias = j.at("bias").get<double>();
      s.feature_spec = j.at("feature_spec").get<std::vector<std::string>>();
      s.feature_offset = j.at("feature_offset").get<std::vector<double>>();
      s.feature_scale = j.at("feature_scale").get<std::vector<double>>();
      const auto d = s.weights.size();
      if (s.feature_spec.size() != d || s.feature_offset.size() != d || s.feature_scale.size() != d) {
        throw Error(ErrorCode::parse, "scorer vectors disagree in dimension");
      }
      return s;
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::parse, std::string("malformed scorer document: ") + ex.what());
    }
  }
};

enum class ScorerLoss { rank, l1 };

inline std::string_view to_string(ScorerLoss l) noexcept { return l == ScorerLoss::rank ? "rank" : "l1"; }

inline std::optional<ScorerLoss> parse_loss(std::string_view name) noexcept {
  if (name == "rank") return ScorerLoss::rank;
  if (name == "l1") return ScorerLoss::l1;
  return std::nullopt;
}

struct TrainOptions {
  std::size_t epochs = 200;
  double step_size = 1.0;
  std::uint64_t seed = 0;
  /// 0 means full batch.
  std::size_t batch_size = 0;
  ScorerLoss loss = ScorerLoss::rank;
  /// Warm start; its standardization is reused when its dimension matches.
  std::optional<UncertaintyScorer> initial;
  std::vector<std::string> feature_spec = default_feature_spec();
};

struct TrainResult {
  UncertaintyScorer scorer;
  /// Loss over the full training set, before any update and after each epoch.
  std::vector<double> loss_trace;
};

namespace detail {

struct Standardized {
  std::vector<std::vector<double>> z;
  std::vector<double> offset, scale;
};

inline Standardized standardize_samples(std::span<const RankingSample> samples, std::size_t dim) {
  Standardized s;
  s.offset.assign(dim, 0.0);
  s.scale.assign(dim, 1.0);
  const double n = static_cast<double>(samples.size());
  for (const auto& smp : samples) {
    for (std::size_t d = 0; d < dim; ++d) s.offset[d] += smp.features[d] / n;
  }
  for (std::size_t d = 0; d < dim; ++d) {
    double var = 0.0;
    for (const auto& smp : samples) var += (smp.features[d] - s.offset[d]) * (smp.features[d] - s.offset[d]);
    var /= n;
    s.scale[d] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  s.z.reserve(samples.size());
  for (const auto& smp : samples) {
    std::vector<double> z(dim);
    for (std::size_t d = 0; d < dim; ++d) z[d] = (smp.features[d] - s.offset[d]) / s.scale[d];
    s.z.push_back(std::move(z));
  }
  return s;
}

}  // namespace detail

/// Gradient descent on the ranking loss (or L1, for the ablation) through the
/// squashed linear scorer. Updates use the loss divided by the total target
/// gap sum |a_i - a_j| over the batch's strict pairs, so step_size does not
/// depend on batch size. Deterministic for a given seed.
inline TrainResult train_scorer(std::span<const RankingSample> samples, const TrainOptions& opt) {
  if (!(opt.step_size > 0.0) || !std::isfinite(opt.step_size)) {
    throw Error(ErrorCode::invalid_argument, "step size must be positive");
  }
  if (samples.size() < 2) throw Error(ErrorCode::unrankable_dataset, "need at least two samples");
  const std::size_t dim = samples.front().features.size();
  for (const auto& s : samples) {
    if (s.features.size() != dim) throw Error(ErrorCode::shape, "samples disagree in feature dimension");
    for (double f : s.features) {
      if (!std::isfinite(f)) throw Error(ErrorCode::invalid_input, "non-finite feature");
    }
  }
  std::vector<double> a(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) a[i] = samples[i].a;
  if (opt.loss == ScorerLoss::rank && strict_pair_count(a) == 0) {
    throw Error(ErrorCode::unrankable_dataset, "no pair of samples has distinct targets");
  }

  auto stdz = detail::standardize_samples(samples, dim);
  UncertaintyScorer scorer;
  if (opt.initial && opt.initial->dimension() == dim) {
    scorer = *opt.initial;
    scorer.feature_offset = stdz.offset;
    scorer.feature_scale = stdz.scale;
  } else {
    std::vector<std::string> spec = opt.feature_spec;
    if (spec.size() != dim) {
      spec.clear();
      for (std::size_t d = 0; d < dim; ++d) spec.push_back("f" + std::to_string(d));
    }
    scorer = UncertaintyScorer::untrained(spec);
    scorer.feature_offset = stdz.offset;
    scorer.feature_scale = stdz.scale;
  }

  auto full_loss = [&] {
    std::vector<double> kappa(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) kappa[i] = detail::sigmoid(scorer.logit_standardized(stdz.z[i]));
    return opt.loss == ScorerLoss::rank ? lambda_rank_loss(a, kappa) : l1_loss(a, kappa);
  };

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = opt.batch_size == 0 ? samples.size() : std::min(opt.batch_size, samples.size());
  auto rng = make_rng(opt.seed, {hash_name("train_scorer")});

  TrainResult result;
  result.loss_trace.reserve(opt.epochs + 1);
  result.loss_trace.push_back(full_loss());

  std::vector<double> ba, bk, grad_w(dim);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    if (batch < samples.size()) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < samples.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, samples.size());
      ba.clear();
      bk.clear();
      for (std::size_t k = start; k < stop; ++k) {
        ba.push_back(a[order[k]]);
        bk.push_back(detail::sigmoid(scorer.logit_standardized(stdz.z[order[k]])));
      }
      std::vector<double> dk;
      if (opt.loss == ScorerLoss::rank) {
        double gap_total = 0.0;
        for (std::size_t i = 0; i < ba.size(); ++i) {
          for (std::size_t j = 0; j < ba.size(); ++j) {
            if (ba[i] > ba[j]) gap_total += ba[i] - ba[j];
          }
        }
        if (gap_total == 0.0) continue;
        dk = lambda_rank_gradient(ba, bk);
        for (double& g : dk) g /= gap_total;
      } else {
        dk = l1_gradient(ba, bk);
      }
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      double grad_b = 0.0;
      for (std::size_t k = 0; k < ba.size(); ++k) {
        const double dz = dk[k] * bk[k] * (1.0 - bk[k]);
        const auto& z = stdz.z[order[start + k]];
        for (std::size_t d = 0; d < dim; ++d) grad_w[d] += dz * z[d];
        grad_b += dz;
      }
      for (std::size_t d = 0; d < dim; ++d) scorer.weights[d] -= opt.step_size * grad_w[d];
      scorer.bias -= opt.step_size * grad_b;
    }
    result.loss_trace.push_back(full_loss());
  }
  result.scorer = std::move(scorer);
  return result;
}

}  // namespace asmu
