#pragma once

// Iterative static/dynamic region extraction.
//
// Starting from the whole grid, every iteration fits one rigid motion per
// frame on the current static set, measures each point's summed squared
// reprojection error under those motions and re-thresholds the whole grid at
// alpha * (eps_max + epsilon). Stops when the worst static point is within
// epsilon, when every point is static, or after max_iterations. On the
// epsilon stop, points outside the static set whose error is under the same
// threshold are re-admitted before the final fit.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "camctl/parallel.hpp"
#include "camctl/rigidfit.hpp"
#include "camctl/trajfield.hpp"

namespace camctl {

struct SegmentationConfig {
  std::optional<double> epsilon;  // px^2 summed over frames; default 4.0 * T
  double alpha = 0.15;
  int max_iterations = 10;
  double min_static_fraction = 0.10;
  FitConfig fit;
  unsigned threads = 1;

  double epsilon_for(int num_frames) const { return epsilon.value_or(4.0 * num_frames); }
};

inline void validate(const SegmentationConfig& c, int num_frames) {
  const double eps = c.epsilon_for(num_frames);
  if (!(eps > 0.0) || !(c.alpha > 0.0 && c.alpha < 1.0) || c.max_iterations < 1 ||
      !(c.min_static_fraction > 0.0 && c.min_static_fraction < 1.0))
    fail(ErrorKind::kInvalidArgument, "invalid segmentation config");
  validate(c.fit);
}

enum class SegmentationStatus { kConvergedEps, kConvergedFull, kMaxIters, kDegenerate };

inline std::string to_string(SegmentationStatus s) {
  switch (s) {
    case SegmentationStatus::kConvergedEps: return "converged_eps";
    case SegmentationStatus::kConvergedFull: return "converged_full";
    case SegmentationStatus::kMaxIters: return "max_iters";
    case SegmentationStatus::kDegenerate: return "degenerate";
  }
  return "unknown";
}

struct SegmentationResult {
  PixelPartition partition;
  std::vector<RigidMotion> motions;    // frame 0 is the identity
  std::vector<double> per_point_error;  // H*W, occlusion-normalized sum over frames
  int iterations_used = 0;
  SegmentationStatus status = SegmentationStatus::kMaxIters;
  double epsilon = 0.0;
  std::vector<double> eps_max_trace;
  bool eps_max_monotone = true;  // diagnostic only
  std::vector<double> frame_costs;   // final mean squared error per frame
  std::vector<std::uint8_t> frame_converged;
  std::vector<int> unfit_frames;     // frames with < 3 usable points; motion carried over
};

namespace detail {

struct FrameObservations {
  std::vector<std::vector<Pixel2>> pixels;  // per frame, per point
};

inline FrameObservations observe(const TrajectoryField& field) {
  FrameObservations obs;
  obs.pixels.resize(static_cast<std::size_t>(field.num_frames));
  const std::size_t n = field.num_points();
  for (int f = 0; f < field.num_frames; ++f) {
    auto& px = obs.pixels[static_cast<std::size_t>(f)];
    px.assign(n, Pixel2::Zero());
    for (std::size_t i = 0; i < n; ++i)
      if (field.is_visible(f, i)) px[i] = project(field.at(f, i), field.intrinsics);
  }
  return obs;
}

// Summed squared reprojection error per point over its visible frames,
// rescaled by T / visible_count. Points driven behind the camera score +inf.
inline std::vector<double> point_errors(const TrajectoryField& field, const FrameObservations& obs,
                                        const std::vector<RigidMotion>& motions) {
  const std::size_t n = field.num_points();
  std::vector<double> err(n, 0.0);
  std::vector<int> seen(n, 0);
  const Intrinsics& k = field.intrinsics;
  for (int f = 0; f < field.num_frames; ++f) {
    const RigidMotion& m = motions[static_cast<std::size_t>(f)];
    const auto& px = obs.pixels[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < n; ++i) {
      if (!field.is_visible(f, i)) continue;
      ++seen[i];
      const Vec3 q = apply(m, field.at(0, i));
      if (!(q.z() >= kDefaultZMin)) {
        err[i] = std::numeric_limits<double>::infinity();
        continue;
      }
      const Pixel2 d = px[i] - project(q, k);
      err[i] += d.squaredNorm();
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    err[i] *= static_cast<double>(field.num_frames) / static_cast<double>(seen[i]);
  return err;
}

struct FrameFits {
  std::vector<Vec6> params;
  std::vector<double> costs;
  std::vector<std::uint8_t> converged;
  std::vector<int> unfit;
};

// Fits frames 1..T-1 on the static mask. With `chain` set, frame f starts
// from frame f-1's solution (sequential); otherwise from `init[f]` and frames
// run concurrently.
inline FrameFits fit_frames(const TrajectoryField& field, const FrameObservations& obs,
                            const std::vector<std::uint8_t>& static_mask,
                            const std::vector<Vec6>& init, bool chain, const FitConfig& fit,
                            unsigned threads) {
  const auto frames = static_cast<std::size_t>(field.num_frames);
  const std::size_t n = field.num_points();
  FrameFits out;
  out.params.assign(frames, Vec6::Zero());
  out.costs.assign(frames, 0.0);
  out.converged.assign(frames, 1);
  std::vector<std::uint8_t> fitted(frames, 1);
  const auto points0 = field.frame(0);

  auto fit_one = [&](std::size_t f, const Vec6& start) {
    std::vector<std::uint8_t> mask(n);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mask[i] = static_mask[i] && field.is_visible(static_cast<int>(f), i);
      count += mask[i];
    }
    if (count < 3) {
      fitted[f] = 0;
      out.params[f] = start;
      out.converged[f] = 0;
      return;
    }
    const FitResult r = fit_rigid(points0, obs.pixels[f], mask, field.intrinsics, start, fit);
    out.params[f] = r.params;
    out.costs[f] = r.final_cost;
    out.converged[f] = r.converged;
  };

  if (chain) {
    for (std::size_t f = 1; f < frames; ++f) fit_one(f, out.params[f - 1]);
  } else {
    parallel_for(1, frames, threads, [&](std::size_t f) { fit_one(f, init[f]); });
  }
  for (std::size_t f = 1; f < frames; ++f)
    if (!fitted[f]) out.unfit.push_back(static_cast<int>(f));
  return out;
}

inline std::vector<RigidMotion> to_motions(const std::vector<Vec6>& params) {
  std::vector<RigidMotion> m(params.size());
  for (std::size_t f = 1; f < params.size(); ++f) m[f] = motion_from_params(params[f]);
  return m;  // m[0] stays the exact identity
}

}  // namespace detail

/// Splits the first-frame grid into static and dynamic points. `initial`
/// overrides the starting static set (default: every point).
inline SegmentationResult extract_static(const TrajectoryField& field, const SegmentationConfig& config = {},
                                         const PixelPartition* initial = nullptr) {
  validate(field);
  validate(config, field.num_frames);
  if (field.num_frames < 2) fail(ErrorKind::kInvalidArgument, "segmentation needs at least two frames");
  const std::size_t n = field.num_points();
  if (initial && (initial->grid_h != field.grid_h || initial->grid_w != field.grid_w))
    fail(ErrorKind::kInvalidArgument, "initial partition shape does not match the field grid");

  const double eps = config.epsilon_for(field.num_frames);
  const double min_static =
      std::max(config.min_static_fraction * static_cast<double>(n), 6.0);

  const detail::FrameObservations obs = detail::observe(field);

  SegmentationResult res;
  res.epsilon = eps;
  std::vector<std::uint8_t> current = initial ? initial->static_mask : std::vector<std::uint8_t>(n, 1);
  std::vector<Vec6> params(static_cast<std::size_t>(field.num_frames), Vec6::Zero());
  detail::FrameFits fits;
  std::vector<double> errors;
  bool need_refit = false;

  auto finish = [&](const std::vector<std::uint8_t>& mask) {
    res.partition = PixelPartition(field.grid_h, field.grid_w);
    res.partition.static_mask = mask;
    res.motions = detail::to_motions(fits.params);
    res.per_point_error = detail::point_errors(field, obs, res.motions);
    res.frame_costs = fits.costs;
    res.frame_converged = fits.converged;
    res.unfit_frames = fits.unfit;
  };

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    fits = detail::fit_frames(field, obs, current, params, iter == 0, config.fit, config.threads);
    params = fits.params;
    res.iterations_used = iter + 1;
    errors = detail::point_errors(field, obs, detail::to_motions(params));

    double eps_max = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (current[i]) eps_max = std::max(eps_max, errors[i]);
    if (!res.eps_max_trace.empty() && eps_max > res.eps_max_trace.back())
      res.eps_max_monotone = false;
    res.eps_max_trace.push_back(eps_max);

    if (eps_max < eps) {
      res.status = SegmentationStatus::kConvergedEps;
      need_refit = false;
      // Re-admit points the converged motions explain, e.g. static points
      // misjudged by an early contaminated fit. Nothing is removed, and every
      // re-admitted point is below the threshold and hence below epsilon.
      const double threshold = config.alpha * (eps_max + eps);
      for (std::size_t i = 0; i < n; ++i) {
        if (!current[i] && errors[i] < threshold) {
          current[i] = 1;
          need_refit = true;
        }
      }
      break;
    }

    const double threshold = config.alpha * (eps_max + eps);
    std::vector<std::uint8_t> next(n);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = errors[i] < threshold;
      count += next[i];
    }
    if (static_cast<double>(count) < min_static) {
      res.status = SegmentationStatus::kDegenerate;
      finish(current);
      return res;
    }
    current = std::move(next);
    need_refit = true;
    if (count == n) {
      res.status = SegmentationStatus::kConvergedFull;
      break;
    }
    res.status = SegmentationStatus::kMaxIters;
  }

  // The final set differs from the one the last fits saw: solve once more.
  if (need_refit) {
    fits = detail::fit_frames(field, obs, current, params, false, config.fit, config.threads);
    params = fits.params;
  }
  finish(current);
  return res;
}

}  // namespace camctl
