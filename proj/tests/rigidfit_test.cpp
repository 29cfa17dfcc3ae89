#include <gtest/gtest.h>

#include <camctl/rigidfit.hpp>
#include <camctl/rng.hpp>

#include "scenes.hpp"

using namespace camctl;

namespace {

const Intrinsics kK{64.0, 64.0, 31.5, 31.5, 64, 64};

struct Problem {
  std::vector<Vec3> points;
  std::vector<Pixel2> observed;
  RigidMotion truth;
};

Problem make_problem(std::uint64_t seed, std::size_t count = 60, double noise = 0.0) {
  SeqRng rng(seed);
  Problem p;
  p.truth.rotation = so3_exp(Vec3(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15)));
  p.truth.translation = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
  for (std::size_t i = 0; i < count; ++i) {
    const Vec3 x = unproject({rng.uniform(0, 63), rng.uniform(0, 63)}, rng.uniform(3, 6), kK);
    p.points.push_back(x);
    Pixel2 o = project(apply(p.truth, x), kK);
    o += noise * Pixel2(rng.normal(), rng.normal());
    p.observed.push_back(o);
  }
  return p;
}

double rosenbrock(const Eigen::Vector2d& x, Eigen::Vector2d& g) {
  const double a = 1 - x[0], b = x[1] - x[0] * x[0];
  g[0] = -2 * a - 400 * x[0] * b;
  g[1] = 200 * b;
  return a * a + 100 * b * b;
}

}  // namespace

TEST(Lbfgs, SolvesRosenbrockWithMonotoneTrace) {
  LbfgsOptions opt;
  opt.max_iterations = 500;
  const auto r = lbfgs_minimize<2>(rosenbrock, Eigen::Vector2d(-1.2, 1.0), opt);
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.x - Eigen::Vector2d(1, 1)).norm(), 1e-6);
  for (std::size_t i = 1; i < r.cost_trace.size(); ++i) EXPECT_LE(r.cost_trace[i], r.cost_trace[i - 1]);
}

TEST(Lbfgs, QuadraticConvergesQuickly) {
  auto quad = [](const Eigen::Vector3d& x, Eigen::Vector3d& g) {
    const Eigen::Vector3d d(1, 10, 100);
    g = 2 * d.cwiseProduct(x - Eigen::Vector3d::Ones());
    return (d.cwiseProduct((x - Eigen::Vector3d::Ones()).cwiseAbs2())).sum();
  };
  const auto r = lbfgs_minimize<3>(quad, Eigen::Vector3d::Zero(), LbfgsOptions{});
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.x - Eigen::Vector3d::Ones()).norm(), 1e-9);
  EXPECT_LT(r.iterations, 30);
}

TEST(Lbfgs, NonFiniteStartIsNumericalFailure) {
  auto bad = [](const Eigen::Vector2d&, Eigen::Vector2d& g) {
    g.setZero();
    return std::numeric_limits<double>::quiet_NaN();
  };
  try {
    lbfgs_minimize<2>(bad, Eigen::Vector2d::Zero(), LbfgsOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
  }
}

TEST(Lbfgs, RejectsBadOptions) {
  LbfgsOptions o;
  o.c2 = o.c1 / 2;
  EXPECT_THROW(lbfgs_minimize<2>(rosenbrock, Eigen::Vector2d::Zero(), o), Error);
}

TEST(RigidFit, GradientMatchesCentralDifferences) {
  SeqRng rng(101);
  for (int s = 0; s < 50; ++s) {
    const Problem p = make_problem(1000 + s, 40, 1.0);
    Vec6 x;
    for (int i = 0; i < 3; ++i) x[i] = rng.uniform(-0.2, 0.2);
    for (int i = 3; i < 6; ++i) x[i] = rng.uniform(-0.3, 0.3);
    const CostGrad cg = reproj_cost_grad(p.points, p.observed, {}, kK, x);
    Vec6 fd;
    for (int i = 0; i < 6; ++i) {
      const double h = 1e-6;
      Vec6 a = x, b = x;
      a[i] += h;
      b[i] -= h;
      fd[i] = (reproj_cost_grad(p.points, p.observed, {}, kK, a).cost -
               reproj_cost_grad(p.points, p.observed, {}, kK, b).cost) /
              (2 * h);
    }
    EXPECT_LT((cg.grad - fd).norm() / std::max(fd.norm(), 1e-8), 1e-5) << "seed " << s;
  }
}

TEST(RigidFit, CostIsZeroAtTruth) {
  const Problem p = make_problem(4);
  const CostGrad cg = reproj_cost_grad(p.points, p.observed, {}, kK, params_from_motion(p.truth));
  EXPECT_LT(cg.cost, 1e-20);
  EXPECT_EQ(cg.used, p.points.size());
}

TEST(RigidFit, MaskSelectsPoints) {
  Problem p = make_problem(5, 30);
  std::vector<std::uint8_t> mask(p.points.size(), 1);
  for (std::size_t i = 0; i < 10; ++i) {
    p.observed[i] += Pixel2(50, -50);
    mask[i] = 0;
  }
  const CostGrad cg = reproj_cost_grad(p.points, p.observed, mask, kK, params_from_motion(p.truth));
  EXPECT_EQ(cg.used, 20u);
  EXPECT_LT(cg.cost, 1e-20);
}

TEST(RigidFit, UnderdeterminedThrows) {
  const Problem p = make_problem(6, 10);
  std::vector<std::uint8_t> mask(p.points.size(), 0);
  mask[0] = mask[1] = 1;
  EXPECT_THROW(reproj_cost_grad(p.points, p.observed, mask, kK, Vec6::Zero()), Error);
}

TEST(RigidFit, MismatchedInputsThrow) {
  const Problem p = make_problem(6, 10);
  std::vector<Pixel2> short_obs(p.observed.begin(), p.observed.begin() + 5);
  EXPECT_THROW(reproj_cost_grad(p.points, short_obs, {}, kK, Vec6::Zero()), Error);
}

TEST(RigidFit, RecoversMotionFromIdentityStart) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Problem p = make_problem(seed);
    const FitResult r = fit_rigid(p.points, p.observed, {}, kK, Vec6::Zero());
    EXPECT_LT(geodesic_angle(r.motion.rotation, p.truth.rotation), 1e-7) << seed;
    EXPECT_LT((r.motion.translation - p.truth.translation).norm(), 1e-6) << seed;
    for (std::size_t i = 1; i < r.cost_trace.size(); ++i) EXPECT_LE(r.cost_trace[i], r.cost_trace[i - 1]);
  }
}

TEST(RigidFit, WarmStartNeedsNoMoreIterations) {
  const Problem p = make_problem(42, 80, 0.3);
  const FitResult cold = fit_rigid(p.points, p.observed, {}, kK, Vec6::Zero());
  Vec6 near = params_from_motion(p.truth);
  near[0] += 1e-3;
  near[4] -= 1e-3;
  const FitResult warm = fit_rigid(p.points, p.observed, {}, kK, near);
  EXPECT_LE(warm.iterations, cold.iterations);
  EXPECT_NEAR(warm.final_cost, cold.final_cost, 1e-9);
}

TEST(RigidFit, ParamsRoundtrip) {
  SeqRng rng(8);
  for (int s = 0; s < 100; ++s) {
    const RigidMotion m{camtest::random_rotation(rng, 3.0), Vec3(rng.normal(), rng.normal(), rng.normal())};
    const RigidMotion back = motion_from_params(params_from_motion(m));
    EXPECT_LT((back.rotation - m.rotation).norm(), 1e-12);
    EXPECT_EQ(back.translation, m.translation);
  }
}
