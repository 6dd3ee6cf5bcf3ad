#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asmu/error.hpp"

namespace asmu {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// A multiset of point annotations living inside a rectangular frame
/// [0, width] x [0, height]. Construction rejects out-of-frame or non-finite
/// coordinates, so every PointSet in the program is valid.
class PointSet {
 public:
  PointSet() = default;

  PointSet(double frame_width, double frame_height, std::vector<Point> points = {})
      : points_(std::move(points)), width_(frame_width), height_(frame_height) {
    if (!std::isfinite(width_) || !std::isfinite(height_) || width_ < 0.0 || height_ < 0.0) {
      throw Error(ErrorCode::invalid_argument, "frame dimensions must be finite and non-negative");
    }
    for (const auto& p : points_) check(p);
  }

  double frame_width() const noexcept { return width_; }
  double frame_height() const noexcept { return height_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  std::span<const Point> points() const noexcept { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }

  void push_back(const Point& p) {
    check(p);
    points_.push_back(p);
  }

  bool same_frame(const PointSet& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  void check(const Point& p) const {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::invalid_input, "non-finite point coordinate");
    }
    if (p.x < 0.0 || p.y < 0.0 || p.x > width_ || p.y > height_) {
      throw Error(ErrorCode::invalid_input,
                  "point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") lies outside the " + std::to_string(width_) + "x" +
                      std::to_string(height_) + " frame");
    }
  }

  std::vector<Point> points_;
  double width_ = 0.0;
  double height_ = 0.0;
};

struct PatchSpec {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double width = 0.0;
  double height = 0.0;

  /// Diagonal length; used as the per-point penalty for unmatched points.
  double diagonal() const noexcept { return std::hypot(width, height); }

  friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

/// Row-major tiling of a scene into patch_size squares. Patches on the right
/// and bottom edges are truncated to the scene boundary.
struct PatchGrid {
  double scene_width = 0.0;
  double scene_height = 0.0;
  double patch_size = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<PatchSpec> patches;

  std::size_t size() const noexcept { return patches.size(); }
  std::size_t index(std::size_t row, std::size_t col) const noexcept { return row * cols + col; }
  std::size_t row_of(std::size_t index) const noexcept { return index / cols; }
  std::size_t col_of(std::size_t index) const noexcept { return index % cols; }

  /// Index of the patch owning p. Points on the far scene edge belong to the
  /// last row/column.
  std::size_t locate(const Point& p) const noexcept {
    auto col = static_cast<std::size_t>(std::floor(p.x / patch_size));
    auto row = static_cast<std::size_t>(std::floor(p.y / patch_size));
    if (col >= cols) col = cols - 1;
    if (row >= rows) row = rows - 1;
    return index(row, col);
  }
};

inline PatchGrid build_grid(double scene_width, double scene_height, double patch_size) {
  if (!(scene_width > 0.0) || !(scene_height > 0.0) || !(patch_size > 0.0) ||
      !std::isfinite(scene_width) || !std::isfinite(scene_height) || !std::isfinite(patch_size)) {
    throw Error(ErrorCode::invalid_argument, "scene dimensions and patch size must be positive");
  }
  PatchGrid grid;
  grid.scene_width = scene_width;
  grid.scene_height = scene_height;
  grid.patch_size = patch_size;
  grid.cols = static_cast<std::size_t>(std::ceil(scene_width / patch_size));
  grid.rows = static_cast<std::size_t>(std::ceil(scene_height / patch_size));
  grid.patches.reserve(grid.rows * grid.cols);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const double ox = static_cast<double>(c) * patch_size;
      const double oy = static_cast<double>(r) * patch_size;
      grid.patches.push_back(PatchSpec{ox, oy, std::min(patch_size, scene_width - ox),
                                       std::min(patch_size, scene_height - oy)});
    }
  }
  return grid;
}

/// Points of `scene` inside `patch`, translated to patch-local coordinates.
///
/// Membership is half-open, [origin, origin + size), on both axes so that a
/// grid's patches partition the scene. A patch whose far edge coincides with
/// the scene edge also owns the points lying exactly on that edge.
inline PointSet crop_points(const PointSet& scene, const PatchSpec& patch) {
  if (!(patch.width > 0.0) || !(patch.height > 0.0) || patch.origin_x < 0.0 || patch.origin_y < 0.0 ||
      patch.origin_x + patch.width > scene.frame_width() ||
      patch.origin_y + patch.height > scene.frame_height()) {
    throw Error(ErrorCode::invalid_patch, "patch does not lie within the scene frame");
  }
  const double x_end = patch.origin_x + patch.width;
  const double y_end = patch.origin_y + patch.height;
  const bool closed_x = x_end == scene.frame_width();
  const bool closed_y = y_end == scene.frame_height();

  std::vector<Point> inside;
  for (const auto& p : scene) {
    const bool in_x = p.x >= patch.origin_x && (p.x < x_end || (closed_x && p.x == x_end));
    const bool in_y = p.y >= patch.origin_y && (p.y < y_end || (closed_y && p.y == y_end));
    if (in_x && in_y) {
      // Clamp guards against rounding pushing a translated coordinate past the frame.
      inside.push_back(Point{std::min(p.x - patch.origin_x, patch.width),
                             std::min(p.y - patch.origin_y, patch.height)});
    }
  }
  return PointSet(patch.width, patch.height, std::move(inside));
}

/// Crops every patch of `grid` in one pass over the scene.
inline std::vector<PointSet> crop_all(const PointSet& scene, const PatchGrid& grid) {
  std::vector<std::vector<Point>> buckets(grid.size());
  for (const auto& p : scene) {
    const auto idx = grid.locate(p);
    const auto& patch = grid.patches[idx];
    buckets[idx].push_back(Point{std::min(p.x - patch.origin_x, patch.width),
                                 std::min(p.y - patch.origin_y, patch.height)});
  }
  std::vector<PointSet> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.emplace_back(grid.patches[i].width, grid.patches[i].height, std::move(buckets[i]));
  }
  return out;
}

}  // namespace asmu
