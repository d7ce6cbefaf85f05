#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "xcavity/core_stack.hpp"

namespace xcavity {

namespace detail {

/// Downward-recursion state of the stack field. All stored quantities are
/// numerically bounded: V holds the unphased reflected/incident ratios at
/// the layer bottoms, a_dn the downward amplitudes at the layer tops, and
/// interior fields are assembled from decaying exponentials only, so the
/// evaluation stays stable deep inside evanescent regions.
struct DownwardField {
  std::vector<Complex> kz;
  std::vector<Complex> a_dn;  ///< downward amplitude at the top of each layer
  std::vector<Complex> v;     ///< ratio A-/A+ at the bottom of each layer
  Complex r;                  ///< surface reflection coefficient

  /// Field a(z); z may sit in the vacuum (z < 0) or the substrate.
  Complex at(const CavityStack& stack, double z) const {
    const Complex i_unit(0.0, 1.0);
    std::size_t li = stack.layer_at(z);
    const std::size_t n = stack.size();
    if (li == n - 1) {  // substrate: transmitted wave only
      double zeta = z - stack.top_of(li);
      return a_dn[li] * std::exp(i_unit * kz[li] * zeta);
    }
    double zeta = (li == 0) ? z : z - stack.top_of(li);
    double d = (li == 0) ? 0.0 : stack[li].thickness_nm;
    return a_dn[li] * (std::exp(i_unit * kz[li] * zeta) +
                       v[li] * std::exp(i_unit * kz[li] * (2.0 * d - zeta)));
  }
};

inline DownwardField downward_field(const CavityStack& stack,
                                    std::vector<Complex> kz) {
  const std::size_t n = stack.size();
  const Complex i_unit(0.0, 1.0);
  DownwardField f;
  f.kz = std::move(kz);
  f.v.assign(n, Complex(0.0, 0.0));

  // Bottom-up: T_i is the ratio at the top of layer i; V_i at its bottom.
  Complex t_below = 0.0;  // at the top of the substrate
  for (std::size_t i = n - 2; i >= 1; --i) {
    Complex r_if = fresnel(f.kz[i], f.kz[i + 1]).r;
    f.v[i] = (r_if + t_below) / (1.0 + r_if * t_below);
    t_below = f.v[i] * std::exp(2.0 * i_unit * f.kz[i] * stack[i].thickness_nm);
  }
  Complex r01 = fresnel(f.kz[0], f.kz[1]).r;
  f.r = (r01 + t_below) / (1.0 + r01 * t_below);
  f.v[0] = f.r;  // vacuum has zero propagation length

  // Top-down amplitudes: v at the bottom of layer i is u * V_i, so only
  // decaying exponentials enter.
  f.a_dn.assign(n, Complex(0.0, 0.0));
  f.a_dn[0] = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double d = stack[i].semi_infinite() ? 0.0 : stack[i].thickness_nm;
    Complex u = f.a_dn[i] * std::exp(i_unit * f.kz[i] * d);
    Complex w = u * f.v[i];
    f.a_dn[i + 1] = (u * (f.kz[i] + f.kz[i + 1]) + w * (f.kz[i + 1] - f.kz[i])) /
                    (2.0 * f.kz[i + 1]);
  }
  return f;
}

}  // namespace detail

/// Reflection coefficient r = A-(0)/A+(0) of the whole multilayer by the
/// Parratt recursion. The white line enters the resonant layer's index only
/// when a line is supplied; with line = nullptr this is the bare stack.
inline Complex parratt_reflectance(const CavityStack& stack,
                                   const ScanPoint& point,
                                   const ResonanceLine* line = nullptr) {
  return detail::downward_field(stack, stack_kz(stack, point, line)).r;
}

/// Normalized field a(z) = (A+ + A-)/A0 sampled at given depths.
struct FieldProfile {
  std::vector<double> depths;      ///< nm, from the vacuum interface
  std::vector<Complex> amplitude;  ///< a(z)
  std::vector<double> intensity;   ///< |a(z)|^2
};

inline FieldProfile field_profile(const CavityStack& stack,
                                  const ScanPoint& point,
                                  const std::vector<double>& depths,
                                  const ResonanceLine* line = nullptr) {
  auto field = detail::downward_field(stack, stack_kz(stack, point, line));
  FieldProfile out;
  out.depths = depths;
  out.amplitude.resize(depths.size());
  out.intensity.resize(depths.size());
  for (std::size_t j = 0; j < depths.size(); ++j) {
    out.amplitude[j] = field.at(stack, depths[j]);
    out.intensity[j] = std::norm(out.amplitude[j]);
  }
  return out;
}

/// Fluorescence yield by the reciprocity argument:
///   F(w, theta) = c * mu(w) * I(w, theta, z_a) * I_f,
/// where I is the normalized intensity at the emitter depth averaged over
/// the resonant layer, mu the absorption coefficient of the line and I_f
/// the (detector-side) field factor, unity for large exit angles.
inline double fluorescence(const CavityStack& stack, const ScanPoint& point,
                           const std::function<double(double)>& mu, double z_a,
                           const ResonanceLine& line, double c = 1.0,
                           double i_f = 1.0, int n_average = 16) {
  if (!stack.has_resonant_layer())
    throw GeometryError("fluorescence: stack has no resonant layer");
  std::size_t ri = stack.resonant_layer();
  double z_top = stack.top_of(ri);
  double d = stack[ri].thickness_nm;
  if (z_a < z_top || z_a > z_top + d)
    throw GeometryError("fluorescence: z_a outside the resonant layer");
  std::vector<double> zs(static_cast<std::size_t>(std::max(1, n_average)));
  for (std::size_t i = 0; i < zs.size(); ++i)
    zs[i] = z_top + d * (i + 0.5) / static_cast<double>(zs.size());
  auto profile = field_profile(stack, point, zs, &line);
  double mean_i = 0.0;
  for (double v : profile.intensity) mean_i += v;
  mean_i /= static_cast<double>(profile.intensity.size());
  return c * mu(point.energy_ev) * mean_i * i_f;
}

}  // namespace xcavity
