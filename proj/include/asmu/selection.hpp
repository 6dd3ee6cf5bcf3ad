#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "asmu/asm.hpp"
#include "asmu/error.hpp"
#include "asmu/geometry.hpp"

namespace asmu {

/// Linear uncertainty threshold: disabled before start_epoch, rising from
/// start_unc to end_unc over [start_epoch, end_epoch], constant afterwards.
struct ThresholdSchedule {
  int start_epoch = 10;
  int end_epoch = 130;
  double start_unc = 0.1;
  double end_unc = 0.6;

  void validate() const {
    if (start_epoch < 0 || start_epoch >= end_epoch) {
      throw Error(ErrorCode::invalid_argument, "schedule needs 0 <= start_epoch < end_epoch");
    }
    if (!(start_unc >= 0.0 && start_unc <= end_unc && end_unc <= 1.0)) {
      throw Error(ErrorCode::invalid_argument, "schedule needs 0 <= start_unc <= end_unc <= 1");
    }
  }
};

/// Threshold at epoch t; std::nullopt during warm-up (no selection).
inline std::optional<double> threshold_at(const ThresholdSchedule& s, int t) {
  s.validate();
  if (t < 0) throw Error(ErrorCode::invalid_argument, "epoch must be non-negative");
  if (t < s.start_epoch) return std::nullopt;
  if (t == s.start_epoch) return s.start_unc;
  if (t >= s.end_epoch) return s.end_unc;
  const double slope = (s.end_unc - s.start_unc) / static_cast<double>(s.end_epoch - s.start_epoch);
  return s.start_unc + slope * static_cast<double>(t - s.start_epoch);
}

enum class SelectionBoundary { strict, inclusive };

inline std::string_view to_string(SelectionBoundary b) noexcept {
  return b == SelectionBoundary::strict ? "strict" : "inclusive";
}

inline std::optional<SelectionBoundary> parse_boundary(std::string_view name) noexcept {
  if (name == "strict") return SelectionBoundary::strict;
  if (name == "inclusive") return SelectionBoundary::inclusive;
  return std::nullopt;
}

struct Candidate {
  PatchKey key;
  PointSet points;
  double kappa = 0.0;
};

struct PseudoLabel {
  PatchKey key;
  PointSet points;
  double kappa = 0.0;
  int epoch_created = 0;
};

inline bool admits(double kappa, double u_t, SelectionBoundary boundary) noexcept {
  return boundary == SelectionBoundary::strict ? kappa < u_t : kappa <= u_t;
}

/// Keeps the candidates whose uncertainty falls below the threshold, in
/// input order. A missing threshold (warm-up) selects nothing.
inline std::vector<PseudoLabel> select_pseudo_labels(std::span<const Candidate> candidates,
                                                     std::optional<double> u_t, int epoch,
                                                     SelectionBoundary boundary = SelectionBoundary::strict) {
  for (const auto& c : candidates) {
    if (!(c.kappa >= 0.0 && c.kappa <= 1.0)) {
      throw Error(ErrorCode::invalid_score, "candidate uncertainty outside [0, 1] for " + to_string(c.key));
    }
  }
  std::vector<PseudoLabel> out;
  if (!u_t) return out;
  if (!(*u_t >= 0.0 && *u_t <= 1.0)) throw Error(ErrorCode::invalid_argument, "threshold outside [0, 1]");
  for (const auto& c : candidates) {
    if (admits(c.kappa, *u_t, boundary)) out.push_back(PseudoLabel{c.key, c.points, c.kappa, epoch});
  }
  return out;
}

struct EmaState {
  std::vector<double> teacher_params;
  double decay = 0.99;
};

/// teacher <- decay * teacher + (1 - decay) * student, elementwise.
inline EmaState ema_update(EmaState state, std::span<const double> student_params) {
  if (student_params.size() != state.teacher_params.size()) {
    throw Error(ErrorCode::shape, "student and teacher parameter vectors differ in size");
  }
  if (!(state.decay > 0.0 && state.decay < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "EMA decay must lie in (0, 1)");
  }
  for (std::size_t i = 0; i < student_params.size(); ++i) {
    state.teacher_params[i] = state.decay * state.teacher_params[i] + (1.0 - state.decay) * student_params[i];
  }
  return state;
}

/// Supervised prediction loss + uncertainty loss on labeled data, plus the
/// pseudo-label prediction loss weighted by lambda1. The uncertainty term is
/// never computed on pseudo-labeled data.
inline double composed_loss(double sup_pred_loss, double uncer_loss, double pseudo_pred_loss, double lambda1) {
  for (double v : {sup_pred_loss, uncer_loss, pseudo_pred_loss, lambda1}) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::invalid_loss, "loss components must be finite and >= 0");
  }
  return sup_pred_loss + uncer_loss + lambda1 * pseudo_pred_loss;
}

}  // namespace asmu
