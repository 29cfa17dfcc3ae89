#pragma once

// Synthetic dynamic scenes with exact ground truth.
//
// The static background is a height field over the first-frame grid (depth
// ramp from z_near at the top row to z_far at the bottom row, plus seeded
// per-pixel jitter). Dynamic objects are discs of first-frame pixels with
// their own motion, expressed in first-frame camera coordinates and applied
// before the camera path. Tracks are exact projections plus seeded Gaussian
// pixel noise on frames after the first.

#include <json.hpp>

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "camctl/campath.hpp"
#include "camctl/image.hpp"
#include "camctl/io.hpp"
#include "camctl/rng.hpp"
#include "camctl/signal.hpp"
#include "camctl/trajfield.hpp"

namespace camctl {

struct DynamicObject {
  Pixel2 center = Pixel2::Zero();  // first-frame pixel
  double radius = 1.0;             // pixels
  Vec3 velocity = Vec3::Zero();    // per frame; used when `motions` is empty
  std::vector<RigidMotion> motions;  // optional per-frame rigid motion

  /// Displacement map applied to the object's points at `frame`.
  RigidMotion motion_at(int frame) const {
    if (!motions.empty()) return motions[static_cast<std::size_t>(frame)];
    return {Rotation3::Identity(), static_cast<double>(frame) * velocity};
  }
};

struct SceneSpec {
  int frames = 24;
  Intrinsics intrinsics{64.0, 64.0, 31.5, 31.5, 64, 64};
  double z_near = 4.0;
  double z_far = 4.0;
  double jitter = 0.0;  // uniform per-pixel depth jitter amplitude
  std::vector<DynamicObject> objects;
  double noise_sigma = 0.0;  // px
  std::uint64_t seed = 0;

  int height() const { return intrinsics.height; }
  int width() const { return intrinsics.width; }
};

inline void validate(const SceneSpec& s) {
  validate(s.intrinsics);
  if (s.frames < 1) fail(ErrorKind::kInvalidArgument, "scene needs at least one frame");
  if (!(s.z_near > 0.0) || !(s.z_near <= s.z_far) || !std::isfinite(s.z_far))
    fail(ErrorKind::kInvalidArgument, "scene depth range must satisfy 0 < z_near <= z_far");
  if (!(s.jitter >= 0.0) || !(s.z_near - s.jitter > 0.0))
    fail(ErrorKind::kInvalidArgument, "depth jitter must be >= 0 and keep depths positive");
  if (!(s.noise_sigma >= 0.0) || !std::isfinite(s.noise_sigma))
    fail(ErrorKind::kInvalidArgument, "track noise sigma must be >= 0");
  for (const auto& o : s.objects) {
    if (!(o.radius > 0.0)) fail(ErrorKind::kInvalidArgument, "object radius must be > 0");
    if (!o.center.allFinite() || !in_image(o.center, s.intrinsics))
      fail(ErrorKind::kInvalidArgument, "object not visible in frame 0");
    if (!o.motions.empty()) {
      if (o.motions.size() != static_cast<std::size_t>(s.frames))
        fail(ErrorKind::kInvalidArgument, "object motion length must equal the frame count");
      if (!is_identity(o.motions[0], 1e-12))
        fail(ErrorKind::kInvalidArgument, "object motion must be identity at frame 0");
    }
  }
}

struct GroundTruth {
  TrajectoryField field;     // exact positions
  TrajectoryField observed;  // positions re-lifted from the noisy tracks
  Tracks tracks;             // noisy 2D tracks
  PixelPartition partition;
  std::vector<int> owner;    // per pixel: -1 static, else object index
  CameraPath path;
  DepthMap depth0;
  RgbImage rgb0;
  MotionStrengthSeries true_m;
};

namespace detail {

inline std::vector<int> assign_owners(const SceneSpec& s) {
  const int h = s.height(), w = s.width();
  std::vector<int> owner(static_cast<std::size_t>(h) * w, -1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (std::size_t o = 0; o < s.objects.size(); ++o)
        if ((grid_pixel(r, c) - s.objects[o].center).norm() <= s.objects[o].radius)
          owner[static_cast<std::size_t>(r) * w + c] = static_cast<int>(o);
  return owner;
}

inline DepthMap make_depth0(const SceneSpec& s) {
  const int h = s.height(), w = s.width();
  DepthMap d(w, h);
  const CounterRng rng(s.seed, 2);
  for (int r = 0; r < h; ++r) {
    const double ramp = h > 1 ? static_cast<double>(r) / (h - 1) : 0.0;
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double j = s.jitter > 0.0 ? s.jitter * (2.0 * rng.uniform(i) - 1.0) : 0.0;
      d.at(r, c) = static_cast<float>(s.z_near + (s.z_far - s.z_near) * ramp + j);
    }
  }
  return d;
}

inline RgbImage make_texture(const SceneSpec& s, const std::vector<int>& owner) {
  const int h = s.height(), w = s.width();
  RgbImage img(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int o = owner[static_cast<std::size_t>(r) * w + c];
      const bool check = ((r / 8) + (c / 8)) % 2 == 0;
      std::array<std::uint8_t, 3> px;
      if (o < 0) {
        px = {static_cast<std::uint8_t>(40 + (175 * c) / std::max(w - 1, 1)),
              static_cast<std::uint8_t>(40 + (175 * r) / std::max(h - 1, 1)),
              static_cast<std::uint8_t>(check ? 200 : 90)};
      } else {
        const std::uint64_t hsh = splitmix64(static_cast<std::uint64_t>(o) + 17);
        px = {static_cast<std::uint8_t>(hsh & 0xff), static_cast<std::uint8_t>((hsh >> 8) & 0xff),
              static_cast<std::uint8_t>(check ? 255 : 0)};
      }
      img.set(r, c, px);
    }
  }
  return img;
}

}  // namespace detail

inline GroundTruth generate_scene(const SceneSpec& spec, const CameraPath& path) {
  validate(spec);
  validate(path);
  if (path.size() != static_cast<std::size_t>(spec.frames))
    fail(ErrorKind::kInvalidArgument, "path has " + std::to_string(path.size()) + " frames, scene has " +
                                          std::to_string(spec.frames));
  const Intrinsics& k = spec.intrinsics;
  const int h = spec.height(), w = spec.width(), frames = spec.frames;
  const std::size_t n = static_cast<std::size_t>(h) * w;

  GroundTruth gt;
  gt.path = path;
  gt.owner = detail::assign_owners(spec);
  gt.partition = PixelPartition(h, w);
  for (std::size_t i = 0; i < n; ++i) gt.partition.static_mask[i] = gt.owner[i] < 0;
  gt.depth0 = detail::make_depth0(spec);
  gt.rgb0 = detail::make_texture(spec, gt.owner);

  gt.field = TrajectoryField(frames, h, w, k);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      gt.field.at(0, static_cast<std::size_t>(r) * w + c) = unproject(grid_pixel(r, c), gt.depth0.at(r, c), k);

  for (int f = 1; f < frames; ++f) {
    const RigidMotion& cam = path.motions[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& p0 = gt.field.at(0, i);
      const Vec3 moved = gt.owner[i] < 0 ? p0 : apply(spec.objects[gt.owner[i]].motion_at(f), p0);
      const Vec3 q = apply(cam, moved);
      gt.field.at(f, i) = q;
      gt.field.visible[gt.field.index(f, i)] = q.z() >= kDefaultZMin && in_image(project(q, k), k);
    }
  }

  // Noisy tracks and the field they lift to (exact depths).
  gt.tracks = Tracks(frames, n);
  gt.observed = gt.field;
  const CounterRng noise(spec.seed, 1);
  for (int f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = gt.field.index(f, i);
      const Vec3& q = gt.field.positions[idx];
      const bool vis = gt.field.visible[idx] != 0;
      Pixel2 px = q.z() >= kDefaultZMin ? project(q, k) : Pixel2::Zero();
      if (f > 0 && vis && spec.noise_sigma > 0.0) {
        px.x() += spec.noise_sigma * noise.normal(2 * idx);
        px.y() += spec.noise_sigma * noise.normal(2 * idx + 1);
        gt.observed.positions[idx] = unproject(px, q.z(), k);
      }
      gt.tracks.u[idx] = static_cast<float>(px.x());
      gt.tracks.v[idx] = static_cast<float>(px.y());
      gt.tracks.visible[idx] = vis;
    }
  }

  // Motion strength straight from the object displacements:
  // G(p, f) = R_f (O_f(p) - p).
  gt.true_m.m.assign(static_cast<std::size_t>(frames), 0.0);
  for (int f = 1; f < frames; ++f) {
    const Rotation3& r1 = path.motions[static_cast<std::size_t>(f)].rotation;
    const Rotation3& r0 = path.motions[static_cast<std::size_t>(f - 1)].rotation;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!gt.field.is_visible(f, i) || !gt.field.is_visible(f - 1, i)) continue;
      ++count;
      if (gt.owner[i] < 0) continue;
      const DynamicObject& obj = spec.objects[gt.owner[i]];
      const Vec3& p0 = gt.field.at(0, i);
      const Vec3 d1 = apply(obj.motion_at(f), p0) - p0;
      const Vec3 d0 = apply(obj.motion_at(f - 1), p0) - p0;
      sum += (r1 * d1 - r0 * d0).norm();
    }
    if (count == 0) {
      gt.true_m.empty_pairs.push_back(f);
      continue;
    }
    gt.true_m.m[static_cast<std::size_t>(f)] = sum / static_cast<double>(count);
  }
  return gt;
}

// ---- per-frame depth rendering ---------------------------------------------

namespace detail {

// Inverts x0 -> project(M unproject(x0, D(x0))) for a target pixel with
// Newton steps on a finite-difference Jacobian. Returns the frame-0
// coordinate and the camera-space depth at the solution.
inline std::optional<std::pair<Pixel2, double>> invert_surface(const DepthMap& depth0, const Intrinsics& k,
                                                               const RigidMotion& m, const Pixel2& target,
                                                               const Pixel2& start) {
  auto forward = [&](const Pixel2& x, double& z) -> std::optional<Pixel2> {
    const double d = sample_bilinear(depth0, x.x(), x.y());
    const Vec3 q = apply(m, unproject(x, d, k));
    z = q.z();
    if (!(q.z() >= kDefaultZMin)) return std::nullopt;
    return project(q, k);
  };
  Pixel2 x = start;
  double z = 0.0;
  for (int it = 0; it < 30; ++it) {
    const auto f = forward(x, z);
    if (!f) return std::nullopt;
    const Pixel2 r = *f - target;
    if (r.norm() < 1e-9) return std::make_pair(x, z);
    Eigen::Matrix2d jac;
    const double step = 1e-4;
    for (int a = 0; a < 2; ++a) {
      Pixel2 xp = x, xm = x;
      xp[a] += step;
      xm[a] -= step;
      double zz;
      const auto fp = forward(xp, zz);
      const auto fm = forward(xm, zz);
      if (!fp || !fm) return std::nullopt;
      jac.col(a) = (*fp - *fm) / (2.0 * step);
    }
    if (!(std::abs(jac.determinant()) > 1e-12)) return std::nullopt;
    Pixel2 dx = jac.partialPivLu().solve(r);
    const double len = dx.norm();
    if (len > 4.0) dx *= 4.0 / len;
    x -= dx;
  }
  return std::nullopt;
}

}  // namespace detail

/// Camera-space depth seen through every pixel of `frame`. The nearest of the
/// static surface and every object surface wins; pixels that see nothing get
/// the static surface extended past the first-frame border.
inline DepthMap render_depth(const SceneSpec& spec, const GroundTruth& gt, int frame) {
  const Intrinsics& k = spec.intrinsics;
  const int h = spec.height(), w = spec.width();
  if (frame == 0) return gt.depth0;
  const RigidMotion& cam = gt.path.motions[static_cast<std::size_t>(frame)];

  std::vector<RigidMotion> maps{cam};
  for (const auto& o : spec.objects) maps.push_back(compose(cam, o.motion_at(frame)));
  std::vector<RigidMotion> inverse_maps;
  for (const auto& m : maps) inverse_maps.push_back(inverse(m));

  auto owner_at = [&](const Pixel2& x) {
    int best = -1;
    for (std::size_t o = 0; o < spec.objects.size(); ++o)
      if ((x - spec.objects[o].center).norm() <= spec.objects[o].radius) best = static_cast<int>(o);
    return best;
  };
  const double z_mid = 0.5 * (spec.z_near + spec.z_far);

  DepthMap out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Pixel2 target = grid_pixel(r, c);
      double best_z = std::numeric_limits<double>::infinity();
      double fallback = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t s = 0; s < maps.size(); ++s) {
        // Start from the target pulled back through a mid-depth plane.
        const Vec3 back = apply(inverse_maps[s], unproject(target, z_mid, k));
        Pixel2 start = target;
        if (back.z() >= kDefaultZMin) start = project(back, k);
        const auto sol = detail::invert_surface(gt.depth0, k, maps[s], target, start);
        if (!sol) continue;
        const int expected = static_cast<int>(s) - 1;
        const bool inside = in_image(sol->first, k) && owner_at(sol->first) == expected;
        if (s == 0 && std::isnan(fallback)) fallback = sol->second;
        if (inside) best_z = std::min(best_z, sol->second);
      }
      if (!std::isfinite(best_z)) best_z = std::isnan(fallback) ? z_mid : fallback;
      out.at(r, c) = static_cast<float>(std::max(best_z, kDefaultZMin));
    }
  }
  return out;
}

// ---- scene JSON ------------------------------------------------------------

inline nlohmann::json scene_to_json(const SceneSpec& s) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : s.objects) {
    nlohmann::json j{{"center", {o.center.x(), o.center.y()}}, {"radius", o.radius}};
    if (o.motions.empty()) {
      j["velocity"] = {o.velocity.x(), o.velocity.y(), o.velocity.z()};
    } else {
      j["motions"] = path_to_json(CameraPath{o.motions})["frames"];
    }
    objs.push_back(j);
  }
  return {{"frames", s.frames},   {"intrinsics", intrinsics_to_json(s.intrinsics)},
          {"z_near", s.z_near},   {"z_far", s.z_far},
          {"jitter", s.jitter},   {"noise_sigma", s.noise_sigma},
          {"seed", s.seed},       {"objects", objs}};
}

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& what) { fail(ErrorKind::kData, "scene JSON: " + what); };
  if (!j.is_object()) bad("top level must be an object");
  static constexpr std::string_view keys[] = {"frames", "intrinsics", "z_near", "z_far", "jitter",
                                              "noise_sigma", "seed", "objects"};
  for (const auto& [key, value] : j.items())
    if (std::find(std::begin(keys), std::end(keys), key) == std::end(keys)) bad("unknown key '" + key + "'");
  SceneSpec s;
  try {
    if (!j.contains("frames") || !j.contains("intrinsics")) bad("'frames' and 'intrinsics' are required");
    s.frames = j.at("frames").get<int>();
    s.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    s.z_near = j.value("z_near", s.z_near);
    s.z_far = j.value("z_far", s.z_near);
    s.jitter = j.value("jitter", 0.0);
    s.noise_sigma = j.value("noise_sigma", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& o : j.value("objects", nlohmann::json::array())) {
      DynamicObject obj;
      const auto& c = o.at("center");
      if (!c.is_array() || c.size() != 2) bad("object 'center' must be [u, v]");
      obj.center = {c[0].get<double>(), c[1].get<double>()};
      obj.radius = o.at("radius").get<double>();
      if (o.contains("motions")) {
        obj.motions = path_from_json({{"frames", o.at("motions")}}).motions;
      } else if (o.contains("velocity")) {
        const auto& v = o.at("velocity");
        if (!v.is_array() || v.size() != 3) bad("object 'velocity' must be [x, y, z]");
        obj.velocity = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
      }
      s.objects.push_back(obj);
    }
  } catch (const nlohmann::json::exception& e) {
    bad(e.what());
  }
  validate(s);
  return s;
}

}  // namespace camctl
