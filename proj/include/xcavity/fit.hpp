#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "xcavity/common.hpp"

namespace xcavity {

/// Residual callback: fills r with model(params) - data (size fixed).
using ResidualFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct LmOptions {
  int max_iterations = 200;
  double ftol = 1e-12;   ///< relative decrease of the cost
  double lambda0 = 1e-3;
  std::vector<double> lower, upper;  ///< optional box bounds
};

struct LmResult {
  std::vector<double> params;
  double cost = 0.0;  ///< 0.5 * sum r^2
  int iterations = 0;
  bool converged = false;
};

/// Dense Levenberg-Marquardt with forward-difference Jacobian. Small
/// problems only (a handful of parameters, -< few thousand residuals).
inline LmResult levenberg_marquardt(const ResidualFn& fn,
                                    std::vector<double> x, std::size_t n_res,
                                    const LmOptions& opt = {}) {
  const std::size_t np = x.size();
  auto clamp = [&](std::vector<double>& v) {
    if (!opt.lower.empty())
      for (std::size_t i = 0; i < np; ++i)
        if (v[i] < opt.lower[i]) v[i] = opt.lower[i];
    if (!opt.upper.empty())
      for (std::size_t i = 0; i < np; ++i)
        if (v[i] > opt.upper[i]) v[i] = opt.upper[i];
  };
  clamp(x);

  std::vector<double> r(n_res), r_try(n_res), dr(n_res);
  std::vector<std::vector<double>> jac(np, std::vector<double>(n_res));
  fn(x, r);
  auto cost_of = [](const std::vector<double>& v) {
    double c = 0.0;
    for (double e : v) c += e * e;
    return 0.5 * c;
  };
  double cost = cost_of(r);
  double lambda = opt.lambda0;
  LmResult res;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    // Jacobian by forward differences.
    for (std::size_t p = 0; p < np; ++p) {
      double h = 1e-7 * std::max(1.0, std::abs(x[p]));
      std::vector<double> xp = x;
      xp[p] += h;
      clamp(xp);
      double hh = xp[p] - x[p];
      if (hh == 0.0) {
        xp[p] = x[p] - h;
        clamp(xp);
        hh = xp[p] - x[p];
      }
      fn(xp, dr);
      for (std::size_t i = 0; i < n_res; ++i) jac[p][i] = (dr[i] - r[i]) / hh;
    }
    // Normal equations (np x np).
    std::vector<double> jtj(np * np), jtr(np);
    for (std::size_t a = 0; a < np; ++a) {
      for (std::size_t b = a; b < np; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n_res; ++i) s += jac[a][i] * jac[b][i];
        jtj[a * np + b] = jtj[b * np + a] = s;
      }
      double s = 0.0;
      for (std::size_t i = 0; i < n_res; ++i) s += jac[a][i] * r[i];
      jtr[a] = s;
    }
    bool improved = false;
    double diag_scale = 0.0;
    for (std::size_t a = 0; a < np; ++a)
      diag_scale = std::max(diag_scale, jtj[a * np + a]);
    for (int damp = 0; damp < 12; ++damp) {
      std::vector<double> A = jtj;
      // additive floor keeps directions with vanishing curvature regular
      for (std::size_t a = 0; a < np; ++a)
        A[a * np + a] = A[a * np + a] * (1.0 + lambda) +
                        lambda * (1e-8 * diag_scale + 1e-30);
      // Gaussian elimination with partial pivoting.
      std::vector<double> b(np);
      for (std::size_t a = 0; a < np; ++a) b[a] = -jtr[a];
      std::vector<std::size_t> piv(np);
      for (std::size_t a = 0; a < np; ++a) piv[a] = a;
      bool singular = false;
      for (std::size_t c = 0; c < np && !singular; ++c) {
        std::size_t best = c;
        for (std::size_t rr = c + 1; rr < np; ++rr)
          if (std::abs(A[rr * np + c]) > std::abs(A[best * np + c])) best = rr;
        if (std::abs(A[best * np + c]) < 1e-300) {
          singular = true;
          break;
        }
        if (best != c) {
          for (std::size_t k = 0; k < np; ++k) std::swap(A[c * np + k], A[best * np + k]);
          std::swap(b[c], b[best]);
        }
        for (std::size_t rr = c + 1; rr < np; ++rr) {
          double f = A[rr * np + c] / A[c * np + c];
          for (std::size_t k = c; k < np; ++k) A[rr * np + k] -= f * A[c * np + k];
          b[rr] -= f * b[c];
        }
      }
      if (singular) {
        lambda *= 10.0;
        continue;
      }
      std::vector<double> step(np);
      for (std::size_t c = np; c-- > 0;) {
        double s = b[c];
        for (std::size_t k = c + 1; k < np; ++k) s -= A[c * np + k] * step[k];
        step[c] = s / A[c * np + c];
      }
      std::vector<double> x_try = x;
      for (std::size_t p = 0; p < np; ++p) x_try[p] += step[p];
      clamp(x_try);
      fn(x_try, r_try);
      double c_try = cost_of(r_try);
      if (c_try < cost) {
        double rel = (cost - c_try) / std::max(cost, 1e-300);
        x = x_try;
        r = r_try;
        cost = c_try;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (rel < opt.ftol) {
          res.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (res.converged) break;
    if (!improved) {
      // No further descent possible; treat a tiny gradient as converged.
      double gmax = 0.0;
      for (std::size_t a = 0; a < np; ++a) gmax = std::max(gmax, std::abs(jtr[a]));
      res.converged = gmax < 1e-10 * (1.0 + cost);
      break;
    }
  }
  res.params = std::move(x);
  res.cost = cost;
  res.iterations = it + 1;
  return res;
}

/// Golden-section minimum of a unimodal scalar function on [a, b].
inline double golden_section(const std::function<double(double)>& f, double a,
                             double b, double x_tol, int max_iter = 200) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > x_tol; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace xcavity
