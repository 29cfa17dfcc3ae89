#pragma once

// Camera-control signals: projected rigid point trajectories, the motion
// strength series, and the (T, 3, H, W) control tensor.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "camctl/campath.hpp"
#include "camctl/image.hpp"
#include "camctl/parallel.hpp"
#include "camctl/trajfield.hpp"

namespace camctl {

/// Projected (u, v) of every rigidly transported first-frame point, layout
/// (t, c, h, w). Points outside the view hold their last in-view value.
struct TrajectoryChannels {
  int num_frames = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;           // T * 2 * H * W
  std::vector<std::uint8_t> valid;    // T * H * W

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double u(int f, std::size_t i) const { return data[(static_cast<std::size_t>(f) * 2) * plane() + i]; }
  double v(int f, std::size_t i) const { return data[(static_cast<std::size_t>(f) * 2 + 1) * plane() + i]; }
  bool is_valid(int f, std::size_t i) const { return valid[static_cast<std::size_t>(f) * plane() + i] != 0; }
};

struct MotionStrengthSeries {
  std::vector<double> m;
  std::vector<int> empty_pairs;  // frames lambda with no point valid at lambda and lambda-1
};

struct ControlTensor {
  int num_frames = 0;
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<double> data;                 // (t, c, h, w)
  std::vector<std::uint8_t> last_valid;     // H * W frustum mask of the last frame

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double at(int t, int c, int h, int w) const {
    return data[((static_cast<std::size_t>(t) * channels + c) * height + h) * width + w];
  }
  bool operator==(const ControlTensor&) const = default;
};

/// Projects `points0` (row-major H x W grid of first-frame points) under every
/// motion.
inline TrajectoryChannels project_trajectories(std::span<const Vec3> points0, int height, int width,
                                               const Intrinsics& k, std::span<const RigidMotion> motions,
                                               unsigned threads = 1) {
  if (motions.empty() || !is_identity(motions[0]))
    fail(ErrorKind::kInvalidArgument, "frame-0 motion must be identity");
  const std::size_t n = static_cast<std::size_t>(height) * width;
  if (points0.size() != n) fail(ErrorKind::kInvalidArgument, "point count does not match the grid");

  TrajectoryChannels out;
  out.num_frames = static_cast<int>(motions.size());
  out.height = height;
  out.width = width;
  out.data.assign(motions.size() * 2 * n, 0.0);
  out.valid.assign(motions.size() * n, 0);

  // Validity is per (frame, point); hold-last-value needs frames in order, so
  // parallelize over points.
  const std::size_t chunk = 4096;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  parallel_for(0, chunks, threads, [&](std::size_t c) {
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) {
      double last_u = 0.0, last_v = 0.0;
      bool have_last = false;
      for (std::size_t f = 0; f < motions.size(); ++f) {
        const Vec3 q = apply(motions[f], points0[i]);
        bool ok = q.z() >= kDefaultZMin;
        Pixel2 px = Pixel2::Zero();
        if (ok) {
          px = project(q, k);
          ok = in_image(px, k);
        }
        if (f == 0 && !ok && q.z() >= kDefaultZMin) ok = true;  // grid points sit on the image
        if (ok) {
          last_u = px.x();
          last_v = px.y();
          have_last = true;
        } else if (!have_last) {
          last_u = 0.0;
          last_v = 0.0;
        }
        out.data[(f * 2) * n + i] = last_u;
        out.data[(f * 2 + 1) * n + i] = last_v;
        out.valid[f * n + i] = ok;
      }
    }
  });
  return out;
}

inline TrajectoryChannels point_trajectory(const TrajectoryField& field, std::span<const RigidMotion> motions,
                                           unsigned threads = 1) {
  if (motions.size() != static_cast<std::size_t>(field.num_frames))
    fail(ErrorKind::kInvalidArgument, "frame count mismatch");
  return project_trajectories(field.frame(0), field.grid_h, field.grid_w, field.intrinsics, motions, threads);
}

/// Mean speed of the nonlinear residual between adjacent frames, averaged
/// over points valid in both frames. m[0] = 0.
inline MotionStrengthSeries motion_strength(const ResidualField& g) {
  MotionStrengthSeries out;
  out.m.assign(static_cast<std::size_t>(std::max(g.num_frames, 0)), 0.0);
  const std::size_t n = g.num_points();
  for (int f = 1; f < g.num_frames; ++f) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = g.index(f, i);
      const std::size_t b = g.index(f - 1, i);
      if (!g.valid[a] || !g.valid[b]) continue;
      sum += (g.g[a] - g.g[b]).norm();
      ++count;
    }
    if (count == 0) {
      out.empty_pairs.push_back(f);
      continue;
    }
    out.m[static_cast<std::size_t>(f)] = sum / static_cast<double>(count);
  }
  return out;
}

inline ControlTensor pack_tensor(const TrajectoryChannels& traj, const MotionStrengthSeries& ms) {
  if (ms.m.size() != static_cast<std::size_t>(traj.num_frames))
    fail(ErrorKind::kInvalidArgument, "shape mismatch: motion strength has " + std::to_string(ms.m.size()) +
                                          " frames, trajectories have " + std::to_string(traj.num_frames));
  if (traj.data.size() != static_cast<std::size_t>(traj.num_frames) * 2 * traj.plane() ||
      traj.valid.size() != static_cast<std::size_t>(traj.num_frames) * traj.plane())
    fail(ErrorKind::kInvalidArgument, "shape mismatch: trajectory storage does not match its shape");

  ControlTensor t;
  t.num_frames = traj.num_frames;
  t.height = traj.height;
  t.width = traj.width;
  const std::size_t n = traj.plane();
  t.data.resize(static_cast<std::size_t>(t.num_frames) * 3 * n);
  for (std::size_t f = 0; f < static_cast<std::size_t>(t.num_frames); ++f) {
    std::copy_n(traj.data.begin() + static_cast<std::ptrdiff_t>(f * 2 * n), 2 * n,
                t.data.begin() + static_cast<std::ptrdiff_t>(f * 3 * n));
    std::fill_n(t.data.begin() + static_cast<std::ptrdiff_t>((f * 3 + 2) * n), n, ms.m[f]);
  }
  if (t.num_frames > 0)
    t.last_valid.assign(traj.valid.end() - static_cast<std::ptrdiff_t>(n), traj.valid.end());
  return t;
}

/// Inverse of pack_tensor. Only the last frame's validity survives packing;
/// earlier frames come back marked valid.
inline std::pair<TrajectoryChannels, MotionStrengthSeries> unpack_tensor(const ControlTensor& t) {
  if (t.channels != 3) fail(ErrorKind::kInvalidArgument, "control tensor must have 3 channels");
  const std::size_t n = t.plane();
  TrajectoryChannels traj;
  traj.num_frames = t.num_frames;
  traj.height = t.height;
  traj.width = t.width;
  traj.data.resize(static_cast<std::size_t>(t.num_frames) * 2 * n);
  traj.valid.assign(static_cast<std::size_t>(t.num_frames) * n, 1);
  MotionStrengthSeries ms;
  ms.m.resize(static_cast<std::size_t>(t.num_frames));
  for (std::size_t f = 0; f < static_cast<std::size_t>(t.num_frames); ++f) {
    std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(f * 3 * n), 2 * n,
                traj.data.begin() + static_cast<std::ptrdiff_t>(f * 2 * n));
    ms.m[f] = n > 0 ? t.data[(f * 3 + 2) * n] : 0.0;
  }
  if (t.num_frames > 0 && t.last_valid.size() == n)
    std::copy(t.last_valid.begin(), t.last_valid.end(),
              traj.valid.end() - static_cast<std::ptrdiff_t>(n));
  return {std::move(traj), std::move(ms)};
}

/// Maps the (u, v) channels from pixel coordinates to [-1, 1] (pixel centers
/// 0 and W-1 map to -1 and 1).
inline void normalize_coordinates(ControlTensor& t) {
  const std::size_t n = t.plane();
  const double su = t.width > 1 ? 2.0 / (t.width - 1) : 0.0;
  const double sv = t.height > 1 ? 2.0 / (t.height - 1) : 0.0;
  for (std::size_t f = 0; f < static_cast<std::size_t>(t.num_frames); ++f) {
    double* u = t.data.data() + f * 3 * n;
    double* v = u + n;
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = su * u[i] - (t.width > 1 ? 1.0 : 0.0);
      v[i] = sv * v[i] - (t.height > 1 ? 1.0 : 0.0);
    }
  }
}

/// First-frame grid points lifted with a depth map.
inline std::vector<Vec3> lift_depth(const DepthMap& depth, const Intrinsics& k) {
  if (depth.width != k.width || depth.height != k.height)
    fail(ErrorKind::kInvalidArgument, "depth map is " + std::to_string(depth.width) + "x" +
                                          std::to_string(depth.height) + " but intrinsics are " +
                                          std::to_string(k.width) + "x" + std::to_string(k.height));
  std::vector<Vec3> pts(depth.values.size());
  for (int r = 0; r < depth.height; ++r) {
    for (int c = 0; c < depth.width; ++c) {
      const double z = depth.at(r, c);
      if (!(z > 0.0) || !std::isfinite(z))
        fail(ErrorKind::kData, "non-positive depth at pixel (row " + std::to_string(r) + ", col " +
                                   std::to_string(c) + ")");
      pts[static_cast<std::size_t>(r) * depth.width + c] = unproject(grid_pixel(r, c), z, k);
    }
  }
  return pts;
}

/// Inference-side signal: trajectories of the depth-lifted first frame under
/// a user path, with a user motion strength on every frame after the first.
inline ControlTensor build_inference_signal(const DepthMap& depth0, const Intrinsics& k, const CameraPath& path,
                                            double motion_strength_value, unsigned threads = 1) {
  validate(k);
  validate(path);
  if (!(motion_strength_value >= 0.0) || !std::isfinite(motion_strength_value))
    fail(ErrorKind::kInvalidArgument, "motion strength must be finite and >= 0");
  const std::vector<Vec3> pts = lift_depth(depth0, k);
  const TrajectoryChannels traj = project_trajectories(pts, depth0.height, depth0.width, k, path.motions, threads);
  MotionStrengthSeries ms;
  ms.m.assign(path.size(), motion_strength_value);
  ms.m[0] = 0.0;
  return pack_tensor(traj, ms);
}

}  // namespace camctl
