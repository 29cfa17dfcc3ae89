#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (bracketing + cubic
// zoom). Fixed-size Eigen vectors; the objective returns its value and fills
// the gradient.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <vector>

#include "camctl/error.hpp"

namespace camctl {

struct LbfgsOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;  // on the infinity norm
  int history_size = 8;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search_evals = 40;
};

inline void validate(const LbfgsOptions& o) {
  if (o.max_iterations <= 0 || !(o.gradient_tolerance > 0.0) || o.history_size <= 0 ||
      !(o.c1 > 0.0) || !(o.c1 < o.c2) || !(o.c2 < 1.0) || o.max_line_search_evals <= 0)
    fail(ErrorKind::kInvalidArgument, "invalid L-BFGS options");
}

template <int N>
struct LbfgsResult {
  Eigen::Matrix<double, N, 1> x;
  double cost = 0.0;
  Eigen::Matrix<double, N, 1> gradient;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_trace;  // cost at the start point and after every accepted step
};

namespace detail {

// Minimizer of the cubic through (a, fa, da) and (b, fb, db); NaN if none.
inline double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  return b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
}

}  // namespace detail

/// Minimizes `objective(x, grad) -> cost` from `x0`. Every accepted step is
/// non-increasing in cost; steps inside the round-off band of the cost are
/// accepted only if they also satisfy the curvature condition.
template <int N, typename Objective>
LbfgsResult<N> lbfgs_minimize(Objective&& objective, const Eigen::Matrix<double, N, 1>& x0,
                              const LbfgsOptions& opt) {
  using Vec = Eigen::Matrix<double, N, 1>;
  validate(opt);

  LbfgsResult<N> res;
  Vec x = x0;
  Vec g;
  double f = objective(x, g);
  if (!std::isfinite(f) || !g.allFinite()) {
    std::ostringstream os;
    os << "numerical failure: non-finite cost " << f << " at the initial point";
    fail(ErrorKind::kNumerical, os.str());
  }
  res.cost_trace.push_back(f);

  std::deque<Vec> s_hist;
  std::deque<Vec> y_hist;
  std::deque<double> rho_hist;

  int iter = 0;
  bool converged = g.template lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance;
  while (!converged && iter < opt.max_iterations) {
    // Two-loop recursion.
    Vec d = -g;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m);
    for (std::size_t k = m; k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(d);
      d -= alpha[k] * y_hist[k];
    }
    if (m > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(d);
      d += (alpha[k] - beta) * s_hist[k];
    }
    double dphi0 = g.dot(d);
    if (!(dphi0 < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      dphi0 = g.dot(d);
    }

    const double step0 = m > 0 ? 1.0 : std::min(1.0, 1.0 / g.template lpNorm<Eigen::Infinity>());

    // Strong-Wolfe line search along d.
    const double f0 = f;
    const double noise_band = 1e-14 * std::max(1.0, std::abs(f0));
    Vec x_try;
    Vec g_try;
    int evals = 0;
    bool nonfinite_seen = false;
    auto phi = [&](double a, double& dphi) {
      x_try = x + a * d;
      double v = objective(x_try, g_try);
      ++evals;
      if (!std::isfinite(v) || !g_try.allFinite()) {
        nonfinite_seen = true;
        dphi = std::numeric_limits<double>::quiet_NaN();
        return std::numeric_limits<double>::infinity();
      }
      dphi = g_try.dot(d);
      return v;
    };
    auto armijo = [&](double a, double v) { return v <= f0 + opt.c1 * a * dphi0; };
    auto curvature = [&](double dv) { return std::abs(dv) <= -opt.c2 * dphi0; };
    auto acceptable = [&](double a, double v, double dv) {
      if (!std::isfinite(v)) return false;
      if (armijo(a, v) && curvature(dv)) return true;
      // Round-off regime: decrease too small to resolve in the cost.
      return v <= f0 && f0 - v <= noise_band && curvature(dv);
    };

    bool found = false;
    double a_acc = 0.0, f_acc = f0;
    Vec x_acc, g_acc;
    auto accept = [&](double a, double v) {
      found = true;
      a_acc = a;
      f_acc = v;
      x_acc = x_try;
      g_acc = g_try;
    };

    // Best point with sufficient decrease seen so far, used if zoom stalls.
    double best_a = 0.0, best_f = f0;
    Vec best_x = x, best_g = g;
    auto note = [&](double a, double v) {
      if (std::isfinite(v) && v < best_f && armijo(a, v)) {
        best_a = a;
        best_f = v;
        best_x = x_try;
        best_g = g_try;
      }
    };

    auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi, double d_hi) {
      while (evals < opt.max_line_search_evals) {
        const double width = hi - lo;
        if (std::abs(width) <= 1e-16 * std::max(1.0, std::abs(lo))) break;
        double a = std::numeric_limits<double>::quiet_NaN();
        if (std::isfinite(f_hi) && std::isfinite(d_hi))
          a = detail::cubic_minimizer(lo, f_lo, d_lo, hi, f_hi, d_hi);
        const double lo_b = std::min(lo, hi) + 0.1 * std::abs(width);
        const double hi_b = std::max(lo, hi) - 0.1 * std::abs(width);
        if (!std::isfinite(a) || a < lo_b || a > hi_b) a = 0.5 * (lo + hi);
        double da;
        const double fa = phi(a, da);
        note(a, fa);
        if (acceptable(a, fa, da)) {
          accept(a, fa);
          return;
        }
        if (!std::isfinite(fa) || !armijo(a, fa) || fa >= f_lo) {
          hi = a;
          f_hi = fa;
          d_hi = da;
        } else {
          if (da * (hi - lo) >= 0.0) {
            hi = lo;
            f_hi = f_lo;
            d_hi = d_lo;
          }
          lo = a;
          f_lo = fa;
          d_lo = da;
        }
      }
    };

    double a_prev = 0.0, f_prev = f0, d_prev = dphi0;
    double a = step0;
    for (int i = 0; i < opt.max_line_search_evals && !found; ++i) {
      double da;
      const double fa = phi(a, da);
      note(a, fa);
      if (acceptable(a, fa, da)) {
        accept(a, fa);
        break;
      }
      if (!std::isfinite(fa) || !armijo(a, fa) || (i > 0 && fa >= f_prev)) {
        zoom(a_prev, f_prev, d_prev, a, fa, da);
        break;
      }
      if (da >= 0.0) {
        zoom(a, fa, da, a_prev, f_prev, d_prev);
        break;
      }
      a_prev = a;
      f_prev = fa;
      d_prev = da;
      a *= 2.0;
    }
    if (!found && best_a > 0.0) {
      // Sufficient decrease without the curvature condition: still a valid
      // monotone step, but the pair may not be usable for the update.
      found = true;
      a_acc = best_a;
      f_acc = best_f;
      x_acc = best_x;
      g_acc = best_g;
    }
    if (!found) {
      if (nonfinite_seen && evals >= opt.max_line_search_evals) {
        std::ostringstream os;
        os << "numerical failure: line search produced only non-finite costs at iteration "
           << iter << " (cost " << f0 << ", |grad|_inf " << g.template lpNorm<Eigen::Infinity>()
           << ")";
        fail(ErrorKind::kNumerical, os.str());
      }
      break;  // no further progress is representable
    }

    const Vec s = x_acc - x;
    const Vec y = g_acc - g;
    const double sy = s.dot(y);
    x = x_acc;
    f = f_acc;
    g = g_acc;
    ++iter;
    res.cost_trace.push_back(f);
    if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.history_size) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    converged = g.template lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance;
    (void)a_acc;
  }

  res.x = x;
  res.cost = f;
  res.gradient = g;
  res.iterations = iter;
  res.converged = converged;
  return res;
}

}  // namespace camctl
