#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "xcavity/parratt.hpp"

namespace xcavity {

struct Transfer2x2 {
  Complex m11{1.0}, m12{0.0}, m21{0.0}, m22{1.0};

  static Transfer2x2 identity() { return {}; }

  Transfer2x2 operator*(const Transfer2x2& o) const {
    return {m11 * o.m11 + m12 * o.m21, m11 * o.m12 + m12 * o.m22,
            m21 * o.m11 + m22 * o.m21, m21 * o.m12 + m22 * o.m22};
  }

  Complex det() const { return m11 * m22 - m12 * m21; }

  double max_abs() const {
    return std::max(std::max(std::abs(m11), std::abs(m12)),
                    std::max(std::abs(m21), std::abs(m22)));
  }
};

namespace detail {

/// Slab propagator in the vacuum-referenced basis, exp(i F d) with
///   F = [[kv + w, w], [-w, -(kv + w)]],  w = (kz^2 - kv^2) / (2 kv).
/// F^2 = kz^2 I gives the closed form cos(kz d) I + i sin(kz d)/kz F.
inline Transfer2x2 slab_matrix(Complex kz, double kv, double d) {
  Complex w = (kz * kz - kv * kv) / (2.0 * kv);
  Complex arg = kz * d;
  Complex c = std::cos(arg);
  Complex sinc;  // sin(kz d)/kz
  if (std::abs(arg) < 1e-6) {
    Complex a2 = arg * arg;
    sinc = d * (1.0 - a2 / 6.0 + a2 * a2 / 120.0);
  } else {
    sinc = std::sin(arg) / kz;
  }
  Complex i_s(0.0, 1.0);
  Complex diag = i_s * sinc * (kv + w);
  Complex off = i_s * sinc * w;
  return {c + diag, off, -off, c - diag};
}

/// Interface transfer from medium a into medium b (fields continuous):
/// (1/t_ba) [[1, r_ba], [r_ba, 1]].
inline Transfer2x2 interface_matrix(Complex k_a, Complex k_b) {
  auto f = fresnel(k_b, k_a);
  return {1.0 / f.t, f.r / f.t, f.r / f.t, 1.0 / f.t};
}

}  // namespace detail

/// Propagation matrix of one finite layer (background index) in the
/// vacuum-referenced basis, evaluated as the exponential closed form.
inline Transfer2x2 layer_matrix(const Layer& layer, const ScanPoint& point) {
  if (layer.semi_infinite())
    throw GeometryError("layer_matrix: layer must have finite thickness");
  return detail::slab_matrix(layer_kz(layer, point), point.kz_vacuum(),
                             layer.thickness_nm);
}

/// Same matrix built from Fresnel interface factors and the interior
/// propagation phase (vacuum | layer | vacuum sandwich). Agrees with
/// layer_matrix to rounding; both are kept as a cross-check of the
/// exponential construction.
inline Transfer2x2 layer_matrix_product_form(const Layer& layer,
                                             const ScanPoint& point) {
  if (layer.semi_infinite())
    throw GeometryError("layer_matrix: layer must have finite thickness");
  Complex kz = layer_kz(layer, point);
  Complex kv(point.kz_vacuum(), 0.0);
  Complex e = std::exp(Complex(0.0, 1.0) * kz * layer.thickness_nm);
  Transfer2x2 prop{e, 0.0, 0.0, 1.0 / e};
  return detail::interface_matrix(kz, kv) * prop *
         detail::interface_matrix(kv, kz);
}

/// Bare-cavity response at one depth: reflection r0 plus the two
/// matrix-element sums p, q of the partial (surface to z) matrix and the
/// physical field a = p + q r0. eta is the product q * a; its real and
/// imaginary parts drive the cavity-enhanced decay rate and induced shift
/// (q * a equals p * q when q r0 is negligible and is the combination the
/// Parratt benchmark validates; see docs/greens notes).
struct CavityResponse {
  Complex r0;
  Complex p;
  Complex q;
  Complex a;
  Complex eta;
  double kz_vacuum = 0.0;
  /// kappa * 2 pi rho_a r_e / k_z,vac of the layer containing z_a, in 1/nm
  /// per unit quoted amplitude; zero when that layer has no tabulated
  /// density.
  double strength_per_f = 0.0;
};

namespace detail {

struct DepthEntry {
  double z;
  Complex p, q;
  Complex a;  ///< physical field, evaluated along the stable downward route
};

struct BareTraversal {
  Complex r0;
  std::vector<DepthEntry> at;  ///< same order as the sorted unique depths
  double kz_vacuum;
};

/// One pass over the stack (background indices): partial matrices at the
/// requested depths plus the full-stack reflection. Substrate interface is
/// appended for r0 only; p, q stay in the vacuum basis (their column sums
/// are basis-invariant). The field a(z) is not taken from p + q r0, which
/// cancels catastrophically deep inside evanescent regions, but from the
/// recursion's downward-propagated amplitudes.
inline BareTraversal traverse_bare(const CavityStack& stack,
                                   const ScanPoint& point,
                                   std::vector<double> depths) {
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
  auto kz = stack_kz(stack, point);
  const double kv = point.kz_vacuum();
  const std::size_t n = stack.size();

  for (double z : depths)
    if (z < 0.0 || z > stack.total_finite_thickness())
      throw GeometryError("depth outside the finite stack");

  auto field = detail::downward_field(stack, kz);

  BareTraversal out;
  out.kz_vacuum = kv;
  Transfer2x2 m = Transfer2x2::identity();
  std::size_t next = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double top = stack.top_of(i);
    double bottom = top + stack[i].thickness_nm;
    double prev = top;
    while (next < depths.size() && depths[next] <= bottom) {
      double z = depths[next];
      if (z > prev) m = detail::slab_matrix(kz[i], kv, z - prev) * m;
      out.at.push_back({z, m.m11 + m.m21, m.m12 + m.m22, field.at(stack, z)});
      prev = z;
      ++next;
    }
    if (bottom > prev) m = detail::slab_matrix(kz[i], kv, bottom - prev) * m;
  }
  while (next < depths.size()) {  // depths exactly at the substrate top
    out.at.push_back({depths[next], m.m11 + m.m21, m.m12 + m.m22,
                      field.at(stack, depths[next])});
    ++next;
  }
  Transfer2x2 full = detail::interface_matrix(kz[0], kz.back()) * m;
  if (std::abs(full.m22) <= 1e-12 * full.max_abs())
    throw SingularCavityError("cavity matrix M22 ~ 0 at E = " +
                              std::to_string(point.energy_ev) + " eV, theta = " +
                              std::to_string(point.theta_deg) + " deg");
  out.r0 = -full.m21 / full.m22;
  return out;
}

}  // namespace detail

/// Bare-cavity quantities at depth z_a (white line excluded everywhere).
inline CavityResponse bare_cavity(const CavityStack& stack,
                                  const ScanPoint& point, double z_a) {
  auto tv = detail::traverse_bare(stack, point, {z_a});
  CavityResponse resp;
  resp.r0 = tv.r0;
  resp.p = tv.at[0].p;
  resp.q = tv.at[0].q;
  resp.a = tv.at[0].a;
  resp.eta = resp.q * resp.a;
  resp.kz_vacuum = tv.kz_vacuum;
  const Layer& host = stack[stack.layer_at(z_a)];
  if (host.tables)
    resp.strength_per_f = kResonantStrengthScale * 2.0 * kPi *
                          host.tables->atom_density_nm3 * kElectronRadius /
                          tv.kz_vacuum;
  return resp;
}

/// Resonant-pathway reflection amplitude from the thin-layer insertion:
///   r_a = i d xi a^2 / (1 - i d xi eta),  xi = -strength * delta_f(w).
struct ResonantReflection {
  Complex r_a;
  bool expansion_valid = true;  ///< d |df| max(|eta|, |a|^2) < 0.1
  double expansion_metric = 0.0;
};

inline ResonantReflection resonant_reflection(const CavityResponse& resp,
                                              const ResonanceLine& line,
                                              double d_nm, double energy_ev) {
  if (resp.strength_per_f <= 0.0 && line.f0 != 0.0)
    throw GeometryError(
        "resonant_reflection: response was computed outside a tabulated layer");
  Complex df = lorentzian_delta_f(line, energy_ev);
  Complex xi = -resp.strength_per_f * df;
  Complex x = Complex(0.0, 1.0) * d_nm * xi;
  ResonantReflection out;
  out.expansion_metric = d_nm * std::abs(xi) *
                         std::max(std::abs(resp.eta), std::norm(resp.a));
  out.expansion_valid = out.expansion_metric < 0.1;
  out.r_a = x * resp.a * resp.a / (1.0 - x * resp.eta);
  return out;
}

/// Cavity-induced shift and cavity-enhanced width in eV:
///   K = (Gamma/2) d strength f0,  Delta_c = -K Im(eta),  Gamma_c = 2K Re(eta).
/// The resonant pathway is then the Lorentzian
///   r_a = -i K a^2 / (Delta + Delta_c + i (Gamma + Gamma_c)/2),
/// algebraically identical to the rational form above. The observed line
/// shift is -Delta_c.
struct CavityShifts {
  double delta_c = 0.0;
  double gamma_c = 0.0;
};

inline CavityShifts cavity_shifts(const CavityResponse& resp,
                                  const ResonanceLine& line, double d_nm) {
  double k_cpl = 0.5 * line.gamma * d_nm * resp.strength_per_f * line.f0;
  return {-k_cpl * resp.eta.imag(), 2.0 * k_cpl * resp.eta.real()};
}

/// Lorentzian form of the resonant pathway; equals resonant_reflection to
/// rounding.
inline Complex resonant_reflection_lorentzian(const CavityResponse& resp,
                                              const ResonanceLine& line,
                                              double d_nm, double energy_ev) {
  auto shifts = cavity_shifts(resp, line, d_nm);
  double k_cpl = 0.5 * line.gamma * d_nm * resp.strength_per_f * line.f0;
  double detuning = energy_ev - line.omega0;
  Complex den(detuning + shifts.delta_c, 0.5 * (line.gamma + shifts.gamma_c));
  return Complex(0.0, -k_cpl) * resp.a * resp.a / den;
}

/// Total reflection of the cavity with the resonant layer collapsed to its
/// center plane.
inline Complex matrix_reflectance(const CavityStack& stack,
                                  const ScanPoint& point,
                                  const ResonanceLine& line) {
  double z_a = stack.resonant_center();
  CavityResponse resp = bare_cavity(stack, point, z_a);
  return resp.r0 +
         resonant_reflection(resp, line, stack.resonant_thickness(),
                             point.energy_ev)
             .r_a;
}

/// Magnitude of the terms dropped by the first-order thin-layer expansion:
/// |r_resummed - (r0 + i d xi a^2)|. Scales as d^2 for small d.
inline double expansion_error(const CavityStack& stack, const ScanPoint& point,
                              const ResonanceLine& line, double d_nm) {
  CavityResponse resp = bare_cavity(stack, point, stack.resonant_center());
  Complex df = lorentzian_delta_f(line, point.energy_ev);
  Complex x = Complex(0.0, 1.0) * d_nm * (-resp.strength_per_f * df);
  Complex r_resummed = resp.r0 + x * resp.a * resp.a / (1.0 - x * resp.eta);
  Complex r_first = resp.r0 + x * resp.a * resp.a;
  return std::abs(r_resummed - r_first);
}

}  // namespace xcavity
