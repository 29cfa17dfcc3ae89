#pragma once

// Discrete trajectory field F(p, lambda) over the first-frame pixel grid and
// its nonlinear residual G = F - (R F(., 0) + t).

#include <cstdint>
#include <span>
#include <vector>

#include "camctl/geometry.hpp"

namespace camctl {

/// Per-frame camera-space positions of the H x W first-frame points.
/// Layout: frame-major, then row-major over the grid.
struct TrajectoryField {
  int num_frames = 0;
  int grid_h = 0;
  int grid_w = 0;
  Intrinsics intrinsics;
  std::vector<Vec3> positions;
  std::vector<std::uint8_t> visible;

  TrajectoryField() = default;
  TrajectoryField(int frames, int h, int w, const Intrinsics& k)
      : num_frames(frames),
        grid_h(h),
        grid_w(w),
        intrinsics(k),
        positions(static_cast<std::size_t>(frames) * h * w, Vec3::Zero()),
        visible(static_cast<std::size_t>(frames) * h * w, 1) {}

  std::size_t num_points() const { return static_cast<std::size_t>(grid_h) * grid_w; }
  std::size_t index(int frame, std::size_t point) const {
    return static_cast<std::size_t>(frame) * num_points() + point;
  }

  const Vec3& at(int frame, std::size_t point) const { return positions[index(frame, point)]; }
  Vec3& at(int frame, std::size_t point) { return positions[index(frame, point)]; }
  bool is_visible(int frame, std::size_t point) const { return visible[index(frame, point)] != 0; }

  std::span<const Vec3> frame(int f) const {
    return {positions.data() + index(f, 0), num_points()};
  }
};

/// Checks the structural invariants: sizes, all frame-0 points visible and
/// every visible position finite and in front of the camera.
inline void validate(const TrajectoryField& field, double z_min = kDefaultZMin) {
  validate(field.intrinsics);
  if (field.num_frames <= 0 || field.grid_h <= 0 || field.grid_w <= 0)
    fail(ErrorKind::kInvalidArgument, "trajectory field has an empty dimension");
  const std::size_t total = static_cast<std::size_t>(field.num_frames) * field.num_points();
  if (field.positions.size() != total || field.visible.size() != total)
    fail(ErrorKind::kInvalidArgument, "trajectory field storage does not match its shape");
  for (std::size_t i = 0; i < field.num_points(); ++i) {
    if (!field.visible[i]) fail(ErrorKind::kData, "frame-0 point " + std::to_string(i) + " is not visible");
  }
  for (std::size_t i = 0; i < total; ++i) {
    if (field.visible[i] && !(field.positions[i].allFinite() && field.positions[i].z() >= z_min))
      fail(ErrorKind::kData, "visible position " + std::to_string(i) + " is non-finite or behind the camera");
  }
}

/// Ω_S as a mask over the first-frame grid (true = static).
struct PixelPartition {
  int grid_h = 0;
  int grid_w = 0;
  std::vector<std::uint8_t> static_mask;

  PixelPartition() = default;
  PixelPartition(int h, int w, bool value = true)
      : grid_h(h), grid_w(w), static_mask(static_cast<std::size_t>(h) * w, value ? 1 : 0) {}

  std::size_t size() const { return static_mask.size(); }
  bool is_static(std::size_t i) const { return static_mask[i] != 0; }
  std::size_t count_static() const {
    std::size_t n = 0;
    for (auto v : static_mask) n += v != 0;
    return n;
  }
  bool operator==(const PixelPartition&) const = default;
};

struct ResidualField {
  int num_frames = 0;
  int grid_h = 0;
  int grid_w = 0;
  std::vector<Vec3> g;
  std::vector<std::uint8_t> valid;

  std::size_t num_points() const { return static_cast<std::size_t>(grid_h) * grid_w; }
  std::size_t index(int frame, std::size_t point) const {
    return static_cast<std::size_t>(frame) * num_points() + point;
  }
};

inline ResidualField residual_g(const TrajectoryField& field, std::span<const RigidMotion> motions) {
  if (motions.size() != static_cast<std::size_t>(field.num_frames))
    fail(ErrorKind::kInvalidArgument, "frame count mismatch");
  if (field.num_frames > 0 && !is_identity(motions[0]))
    fail(ErrorKind::kInvalidArgument, "frame-0 motion must be identity");

  ResidualField out;
  out.num_frames = field.num_frames;
  out.grid_h = field.grid_h;
  out.grid_w = field.grid_w;
  out.g.assign(field.positions.size(), Vec3::Zero());
  out.valid = field.visible;

  const std::size_t n = field.num_points();
  for (int f = 1; f < field.num_frames; ++f) {
    const RigidMotion& m = motions[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = field.index(f, i);
      if (!field.visible[idx]) continue;
      out.g[idx] = field.positions[idx] - apply(m, field.positions[i]);
    }
  }
  return out;
}

}  // namespace camctl
