#pragma once

// Per-frame rigid motion from reprojection error: minimize the mean squared
// pixel distance between observed tracks and the projections of transformed
// first-frame points, over axis-angle rotation and translation.

#include <cstdint>
#include <span>
#include <vector>

#include "camctl/geometry.hpp"
#include "camctl/lbfgs.hpp"

namespace camctl {

using FitConfig = LbfgsOptions;

struct FitResult {
  RigidMotion motion;
  Vec6 params = Vec6::Zero();  // (omega, t)
  double final_cost = 0.0;     // mean squared reprojection error, px^2
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_trace;
};

struct CostGrad {
  double cost = 0.0;
  Vec6 grad = Vec6::Zero();
  std::size_t used = 0;     // points in the sum
  std::size_t dropped = 0;  // masked-in points behind the camera at these params
};

/// Rigid motion encoded by (omega, t).
inline RigidMotion motion_from_params(const Vec6& params) {
  return {so3_exp(params.head<3>()), params.tail<3>()};
}

inline Vec6 params_from_motion(const RigidMotion& m) {
  Vec6 p;
  p.head<3>() = so3_log(m.rotation);
  p.tail<3>() = m.translation;
  return p;
}

namespace detail {

// Evaluates the objective without throwing; used == 0 signals no valid term.
inline CostGrad evaluate_reprojection(std::span<const Vec3> points0, std::span<const Pixel2> observed,
                                      std::span<const std::uint8_t> mask, const Intrinsics& k,
                                      const Vec6& params, double z_min = kDefaultZMin) {
  CostGrad out;
  const Rotation3 r = so3_exp(params.head<3>());
  const Vec3 t = params.tail<3>();
  Vec3 grad_t = Vec3::Zero();
  Vec3 torque = Vec3::Zero();  // sum of (R p) x dcost/dq
  double sum = 0.0;
  for (std::size_t i = 0; i < points0.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const Vec3 rp = r * points0[i];
    const Vec3 q = rp + t;
    if (!(q.z() >= z_min)) {
      ++out.dropped;
      continue;
    }
    const double iz = 1.0 / q.z();
    const double u = k.fx * q.x() * iz + k.cx;
    const double v = k.fy * q.y() * iz + k.cy;
    const double ru = observed[i].x() - u;
    const double rv = observed[i].y() - v;
    sum += ru * ru + rv * rv;
    // d(r.r)/dq = -2 J^T r, J = d(u,v)/dq.
    const Vec3 dq(-2.0 * ru * k.fx * iz, -2.0 * rv * k.fy * iz,
                  2.0 * (ru * k.fx * q.x() + rv * k.fy * q.y()) * iz * iz);
    grad_t += dq;
    torque += rp.cross(dq);
    ++out.used;
  }
  if (out.used == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(out.used);
  out.cost = sum * inv_n;
  out.grad.head<3>() = so3_left_jacobian(params.head<3>()).transpose() * torque * inv_n;
  out.grad.tail<3>() = grad_t * inv_n;
  return out;
}

inline void check_fit_inputs(std::span<const Vec3> points0, std::span<const Pixel2> observed,
                             std::span<const std::uint8_t> mask) {
  if (observed.size() != points0.size() || (!mask.empty() && mask.size() != points0.size()))
    fail(ErrorKind::kInvalidArgument, "point, observation and mask lengths differ");
  std::size_t in = 0;
  for (std::size_t i = 0; i < points0.size(); ++i) in += mask.empty() || mask[i];
  if (in < 3) fail(ErrorKind::kInvalidArgument, "underdetermined fit");
}

}  // namespace detail

/// Mean squared reprojection error and its analytic gradient. An empty mask
/// selects every point.
inline CostGrad reproj_cost_grad(std::span<const Vec3> points0, std::span<const Pixel2> observed,
                                 std::span<const std::uint8_t> mask, const Intrinsics& k,
                                 const Vec6& params) {
  detail::check_fit_inputs(points0, observed, mask);
  CostGrad out = detail::evaluate_reprojection(points0, observed, mask, k, params);
  if (out.used < 3) fail(ErrorKind::kInvalidArgument, "underdetermined fit");
  return out;
}

inline FitResult fit_rigid(std::span<const Vec3> points0, std::span<const Pixel2> observed,
                           std::span<const std::uint8_t> mask, const Intrinsics& k,
                           const Vec6& init, const FitConfig& config = {}) {
  detail::check_fit_inputs(points0, observed, mask);
  auto objective = [&](const Vec6& x, Vec6& grad) {
    const CostGrad cg = detail::evaluate_reprojection(points0, observed, mask, k, x);
    grad = cg.grad;
    if (cg.used < 3) return std::numeric_limits<double>::infinity();
    return cg.cost;
  };
  {
    Vec6 g0;
    if (!std::isfinite(objective(init, g0))) fail(ErrorKind::kInvalidArgument, "underdetermined fit");
  }
  const LbfgsResult<6> r = lbfgs_minimize<6>(objective, init, config);

  FitResult out;
  out.params = r.x;
  out.motion = motion_from_params(r.x);
  out.final_cost = r.cost;
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.cost_trace = r.cost_trace;
  return out;
}

}  // namespace camctl
