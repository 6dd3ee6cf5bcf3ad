#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "asmu/error.hpp"
#include "asmu/geometry.hpp"
#include "asmu/matching.hpp"

namespace asmu {

struct PatchKey {
  std::string scene_id;
  std::size_t patch_index = 0;

  friend auto operator<=>(const PatchKey&, const PatchKey&) = default;
  friend bool operator==(const PatchKey&, const PatchKey&) = default;
};

inline std::string to_string(const PatchKey& key) {
  return key.scene_id + "#" + std::to_string(key.patch_index);
}

struct AsmEntry {
  double sum_dist = 0.0;
  std::size_t epoch_count = 0;
  double last_dist = 0.0;

  /// Mean distance over recorded epochs; 0 before the first epoch.
  double asm_value() const noexcept {
    return epoch_count == 0 ? 0.0 : sum_dist / static_cast<double>(epoch_count);
  }
};

/// Whether a patch is ranked by its accumulated mean or by its latest
/// distance alone (the "w/o average" ablation).
enum class AsmReduction { mean, last };

inline std::string_view to_string(AsmReduction r) noexcept { return r == AsmReduction::mean ? "mean" : "last"; }

inline std::optional<AsmReduction> parse_reduction(std::string_view name) noexcept {
  if (name == "mean") return AsmReduction::mean;
  if (name == "last") return AsmReduction::last;
  return std::nullopt;
}

/// Patch bank: per-patch running record of prediction-vs-ground-truth
/// distances across training epochs. Every patch in a bank shares one
/// penalty constant, i.e. one patch size.
class AsmBank {
 public:
  explicit AsmBank(double penalty_c) : penalty_c_(penalty_c) {
    if (!(penalty_c > 0.0) || !std::isfinite(penalty_c)) {
      throw Error(ErrorCode::invalid_argument, "penalty constant must be positive and finite");
    }
  }

  double penalty_c() const noexcept { return penalty_c_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(const PatchKey& key) const { return entries_.contains(key); }

  void register_patch(const PatchKey& key) { entries_.try_emplace(key); }

  const AsmEntry& entry(const PatchKey& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw Error(ErrorCode::missing_patch, "unknown patch " + to_string(key));
    return it->second;
  }

  /// Adds this epoch's spatial matching distance between pred and gt.
  const AsmEntry& record_epoch(const PatchKey& key, const PointSet& pred, const PointSet& gt) {
    auto& e = mutable_entry(key);
    const double d = spatial_matching_distance(pred, gt, penalty_c_).distance;
    return add(e, d);
  }

  /// Adds an externally computed per-epoch distance (ablation surrogates).
  const AsmEntry& record_distance(const PatchKey& key, double d) {
    if (!std::isfinite(d) || d < 0.0) {
      throw Error(ErrorCode::invalid_input, "surrogate distance must be finite and non-negative");
    }
    return add(mutable_entry(key), d);
  }

  double value(const PatchKey& key, AsmReduction reduction = AsmReduction::mean) const {
    const auto& e = entry(key);
    if (e.epoch_count == 0) {
      throw Error(ErrorCode::uninitialized_surrogate, "patch " + to_string(key) + " has no recorded epochs");
    }
    return reduction == AsmReduction::mean ? e.asm_value() : e.last_dist;
  }

  std::vector<PatchKey> keys() const {
    std::vector<PatchKey> out;
    out.reserve(entries_.size());
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
  }

  const std::map<PatchKey, AsmEntry>& entries() const noexcept { return entries_; }

  nlohmann::json to_json() const {
    nlohmann::json patches = nlohmann::json::array();
    for (const auto& [k, e] : entries_) {
      patches.push_back({{"scene_id", k.scene_id},
                         {"patch_index", k.patch_index},
                         {"sum_dist", e.sum_dist},
                         {"epoch_count", e.epoch_count},
                         {"last_dist", e.last_dist}});
    }
    return {{"penalty_c", penalty_c_}, {"patches", std::move(patches)}};
  }

  static AsmBank from_json(const nlohmann::json& j) {
    try {
      AsmBank bank(j.at("penalty_c").get<double>());
      for (const auto& p : j.at("patches")) {
        PatchKey key{p.at("scene_id").get<std::string>(), p.at("patch_index").get<std::size_t>()};
        AsmEntry e{p.at("sum_dist").get<double>(), p.at("epoch_count").get<std::size_t>(),
                   p.at("last_dist").get<double>()};
        if (!(e.sum_dist >= 0.0) || !std::isfinite(e.sum_dist)) {
          throw Error(ErrorCode::parse, "negative or non-finite sum_dist for " + to_string(key));
        }
        if (!bank.entries_.emplace(std::move(key), e).second) {
          throw Error(ErrorCode::parse, "duplicate patch key in bank");
        }
      }
      return bank;
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::parse, std::string("malformed bank document: ") + ex.what());
    }
  }

 private:
  AsmEntry& mutable_entry(const PatchKey& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw Error(ErrorCode::missing_patch, "unknown patch " + to_string(key));
    return it->second;
  }

  static const AsmEntry& add(AsmEntry& e, double d) {
    e.sum_dist += d;
    ++e.epoch_count;
    e.last_dist = d;
    return e;
  }

  double penalty_c_;
  std::map<PatchKey, AsmEntry> entries_;
};

struct NormalizedBatch {
  std::vector<PatchKey> keys;
  std::vector<double> a_values;
};

/// Min-max normalization of raw surrogate values to [0, 1]. A batch whose
/// values are all equal has no rankable pairs and normalizes to all zeros.
inline std::vector<double> min_max_normalize(std::span<const double> raw) {
  std::vector<double> out(raw.size(), 0.0);
  if (raw.empty()) return out;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double min = *lo;
  const double range = *hi - min;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - min) / range;
  return out;
}

inline NormalizedBatch normalize_batch(const AsmBank& bank, std::span<const PatchKey> keys,
                                       AsmReduction reduction = AsmReduction::mean) {
  std::vector<double> raw;
  raw.reserve(keys.size());
  for (const auto& k : keys) raw.push_back(bank.value(k, reduction));
  return NormalizedBatch{std::vector<PatchKey>(keys.begin(), keys.end()), min_max_normalize(raw)};
}

/// Flips a normalized uncertainty target into a confidence target.
inline double confidence_view(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw Error(ErrorCode::invalid_argument, "value must lie in [0, 1]");
  return 1.0 - a;
}

}  // namespace asmu
