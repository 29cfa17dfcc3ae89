#pragma once

// Preview rendering: the first frame's RGBD point cloud re-projected under
// every frame of a camera path, nearest-pixel splatting with a z-buffer.

#include <cmath>
#include <limits>
#include <vector>

#include "camctl/campath.hpp"
#include "camctl/image.hpp"
#include "camctl/parallel.hpp"
#include "camctl/signal.hpp"

namespace camctl {

struct RgbdFrame {
  RgbImage rgb;
  DepthMap depth;
  Intrinsics intrinsics;
};

struct PreviewFrames {
  std::vector<RgbImage> frames;
  std::vector<GrayImage> coverage;  // 255 = covered
};

inline constexpr std::array<std::uint8_t, 3> kPreviewBackground{128, 128, 128};

inline RgbImage render_frame(const RgbImage& rgb, std::span<const Vec3> points, const Intrinsics& k,
                             const RigidMotion& motion, GrayImage* coverage = nullptr) {
  RgbImage out(rgb.width, rgb.height, kPreviewBackground);
  std::vector<double> zbuf(static_cast<std::size_t>(rgb.width) * rgb.height,
                           std::numeric_limits<double>::infinity());
  if (coverage) *coverage = GrayImage(rgb.width, rgb.height, 0);
  // Source order is row-major; strict comparison keeps the smaller index on ties.
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 q = apply(motion, points[i]);
    if (!(q.z() >= kDefaultZMin)) continue;
    const Pixel2 px = project(q, k);
    const double col = std::floor(px.x() + 0.5);
    const double row = std::floor(px.y() + 0.5);
    if (!(col >= 0.0 && col < rgb.width && row >= 0.0 && row < rgb.height)) continue;
    const std::size_t t = static_cast<std::size_t>(row) * rgb.width + static_cast<std::size_t>(col);
    if (q.z() < zbuf[t]) {
      zbuf[t] = q.z();
      const std::size_t src = i * 3;
      out.data[t * 3] = rgb.data[src];
      out.data[t * 3 + 1] = rgb.data[src + 1];
      out.data[t * 3 + 2] = rgb.data[src + 2];
      if (coverage) coverage->data[t] = 255;
    }
  }
  return out;
}

inline PreviewFrames render_preview(const RgbdFrame& frame0, const CameraPath& path, unsigned threads = 1) {
  validate(frame0.intrinsics);
  validate(path);
  if (frame0.rgb.width != frame0.depth.width || frame0.rgb.height != frame0.depth.height)
    fail(ErrorKind::kInvalidArgument, "rgb and depth dimensions differ");
  const std::vector<Vec3> points = lift_depth(frame0.depth, frame0.intrinsics);

  PreviewFrames out;
  out.frames.resize(path.size());
  out.coverage.resize(path.size());
  parallel_for(0, path.size(), threads, [&](std::size_t f) {
    out.frames[f] = render_frame(frame0.rgb, points, frame0.intrinsics, path.motions[f], &out.coverage[f]);
  });
  return out;
}

}  // namespace camctl
