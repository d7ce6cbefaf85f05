#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "xcavity/dispersion.hpp"
#include "xcavity/fit.hpp"

namespace xcavity {

/// Decompose a near-edge absorption curve into Lorentzian line + arctangent
/// continuum step + flat background by least squares.
/// Parameters: (A_L, omega0, gamma, A_step, E_step, w_step, bg).
inline XasDecomposition fit_xas_lineshape(const std::vector<double>& energies_ev,
                                          const std::vector<double>& intensity) {
  const std::size_t n = energies_ev.size();
  if (n != intensity.size() || n < 12)
    throw InputError("fit_xas_lineshape: need >= 12 samples");
  const double e_lo = energies_ev.front(), e_hi = energies_ev.back();
  if (e_hi - e_lo < 25.0)
    throw InputError("fit_xas_lineshape: curve must span the line plus >= 20 eV of continuum");

  double y_min = intensity[0], y_max = intensity[0];
  std::size_t i_max = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y_min = std::min(y_min, intensity[i]);
    if (intensity[i] > y_max) {
      y_max = intensity[i];
      i_max = i;
    }
  }
  double y_absmax = 0.0;
  for (double v : intensity) y_absmax = std::max(y_absmax, std::abs(v));
  const double scale = std::max(y_max - y_min, 1e-12 * std::max(y_absmax, 1.0));

  // Initial guesses from the raw curve.
  double w0_guess = energies_ev[i_max];
  double half = y_min + 0.5 * scale;
  double gl = e_lo, gh = e_hi;
  for (std::size_t i = i_max; i-- > 0;)
    if (intensity[i] < half) {
      gl = energies_ev[i];
      break;
    }
  for (std::size_t i = i_max; i < n; ++i)
    if (intensity[i] < half) {
      gh = energies_ev[i];
      break;
    }
  double gamma_guess = std::clamp(gh - gl, 0.5, 0.25 * (e_hi - e_lo));
  double step_guess = std::max(intensity[n - 1] - intensity[0], 0.0);
  std::vector<double> x = {scale,  w0_guess, gamma_guess, step_guess,
                           w0_guess + 5.0, 2.0, y_min};

  auto residual = [&](const std::vector<double>& p, std::vector<double>& r) {
    for (std::size_t i = 0; i < n; ++i) {
      double e = energies_ev[i];
      double eps = 2.0 * (e - p[1]) / p[2];
      double m = p[0] / (eps * eps + 1.0) +
                 p[3] * (0.5 + std::atan((e - p[4]) / p[5]) / kPi) + p[6];
      r[i] = m - intensity[i];
    }
  };
  LmOptions opt;
  opt.max_iterations = 300;
  opt.lower = {0.0, e_lo, 0.2, 0.0, e_lo, 0.2, -1e30};
  opt.upper = {10.0 * scale + 1e-30, e_hi, e_hi - e_lo, 10.0 * scale + 1e-30,
               e_hi + 50.0, 0.5 * (e_hi - e_lo), 1e30};
  LmResult lm = levenberg_marquardt(residual, x, n, opt);

  XasDecomposition out;
  out.lorentzian.f0 = lm.params[0];
  out.lorentzian.omega0 = lm.params[1];
  out.lorentzian.gamma = lm.params[2];
  out.continuum.amplitude = lm.params[3];
  out.continuum.center = lm.params[4];
  out.continuum.width = lm.params[5];
  out.background = lm.params[6];
  out.residual_norm = std::sqrt(2.0 * lm.cost);
  out.iterations = lm.iterations;
  out.converged = lm.converged;
  out.degenerate = lm.params[0] < 1e-4 * std::max(y_absmax, 1e-300);

  if (!lm.converged && !out.degenerate)
    throw FitFailureError("XAS lineshape fit did not converge", out);
  // Reconstructed model must stay non-negative over the fit range.
  if (!out.degenerate) {
    for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 64))
      if (out.model_at(energies_ev[i]) < -1e-9 * scale)
        throw FitFailureError("fitted model negative inside range", out);
  }
  return out;
}

}  // namespace xcavity
