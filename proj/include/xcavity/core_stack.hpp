#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xcavity/dispersion.hpp"

namespace xcavity {

/// One photon energy / grazing angle pair of a scan.
struct ScanPoint {
  double energy_ev = 0.0;
  double theta_deg = 0.0;

  ScanPoint() = default;
  ScanPoint(double energy, double theta_degrees)
      : energy_ev(energy), theta_deg(theta_degrees) {
    if (!(energy_ev > 0.0)) throw InputError("scan point: energy must be > 0");
    if (!(theta_deg > 0.0 && theta_deg < 90.0))
      throw InputError("scan point: grazing angle must be in (0, 90) deg");
  }

  double theta_rad() const { return deg_to_rad(theta_deg); }
  /// Vacuum wave number in 1/nm.
  double k() const { return energy_ev / kHBarC; }
  /// Vacuum k_z = k sin(theta) in 1/nm.
  double kz_vacuum() const { return k() * std::sin(theta_rad()); }
};

/// Constant complex index 1 - delta + i beta.
struct ConstantIndex {
  double delta = 0.0;
  double beta = 0.0;
};

/// Scattering-factor tables with stoichiometric weights; f of the compound
/// is the weighted sum of the element tables, the formula-unit density is
/// carried here.
struct TabulatedIndex {
  std::vector<std::pair<std::shared_ptr<const ScatteringFactorTable>, double>>
      components;
  double atom_density_nm3 = 0.0;

  Complex f_at(double energy_ev) const {
    Complex f = 0.0;
    for (const auto& [table, weight] : components)
      f += weight * table->value_at(energy_ev);
    return f;
  }
};

struct Layer {
  static constexpr double kSemiInfinite =
      std::numeric_limits<double>::infinity();

  std::string label;
  double thickness_nm = 0.0;  ///< kSemiInfinite for vacuum top / substrate
  std::optional<ConstantIndex> constant;
  std::optional<TabulatedIndex> tables;
  bool is_resonant = false;

  bool semi_infinite() const { return std::isinf(thickness_nm); }

  /// Formula-unit number density; only meaningful for tabulated layers.
  double atom_density() const {
    if (tables) return tables->atom_density_nm3;
    throw InputError("layer '" + label + "' has no tabulated density");
  }

  /// Background refractive index (no white line).
  Complex refractive_index(double energy_ev) const {
    if (constant) return Complex(1.0 - constant->delta, constant->beta);
    if (tables)
      return index_from_f(tables->f_at(energy_ev), tables->atom_density_nm3,
                          energy_ev);
    throw StackValidationError(label, "no index source");
  }

  /// Full index: background plus the white-line correction through the
  /// scattering-length assembly (applies the amplitude unit bridge).
  Complex refractive_index(double energy_ev, const ResonanceLine& line) const {
    Complex n = refractive_index(energy_ev);
    if (!is_resonant) return n;
    double rho = tables ? tables->atom_density_nm3 : 0.0;
    if (rho <= 0.0)
      throw StackValidationError(label,
                                 "resonant layer needs a tabulated density");
    Complex df = kResonantStrengthScale * lorentzian_delta_f(line, energy_ev);
    double k = energy_ev / kHBarC;
    return n - (2.0 * kPi * rho * kElectronRadius / (k * k)) * df;
  }

  void validate() const {
    if (label.empty()) throw StackValidationError("?", "layer without label");
    if (!semi_infinite() && !(thickness_nm > 0.0))
      throw StackValidationError(label, "finite thickness must be > 0");
    if (!constant && !tables)
      throw StackValidationError(label, "no index source");
    if (constant && (constant->delta < 0.0 || constant->beta < 0.0))
      throw StackValidationError(label, "delta and beta must be >= 0");
  }
};

/// Ordered multilayer, topmost vacuum first, semi-infinite substrate last.
/// Depth origin sits at the vacuum / first-layer interface, z grows downward.
class CavityStack {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit CavityStack(std::vector<Layer> layers) : layers_(std::move(layers)) {
    validate();
    tops_.assign(layers_.size(), 0.0);
    double z = 0.0;
    for (std::size_t i = 1; i + 1 < layers_.size(); ++i) {
      tops_[i] = z;
      z += layers_[i].thickness_nm;
    }
    tops_.back() = z;
    total_ = z;
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }
  const Layer& operator[](std::size_t i) const { return layers_[i]; }

  /// Depth of the top interface of layer i (finite layers and substrate).
  double top_of(std::size_t i) const { return tops_[i]; }
  double total_finite_thickness() const { return total_; }

  std::size_t resonant_layer() const { return resonant_; }
  bool has_resonant_layer() const { return resonant_ != npos; }

  /// Geometric center depth of the resonant layer.
  double resonant_center() const {
    if (!has_resonant_layer())
      throw GeometryError("stack has no resonant layer");
    return tops_[resonant_] + 0.5 * layers_[resonant_].thickness_nm;
  }
  double resonant_thickness() const {
    if (!has_resonant_layer())
      throw GeometryError("stack has no resonant layer");
    return layers_[resonant_].thickness_nm;
  }

  /// Index of the finite layer containing depth z (interfaces belong to the
  /// deeper layer); substrate index for z past the last interface.
  std::size_t layer_at(double z) const {
    if (z < 0.0) return 0;
    for (std::size_t i = 1; i + 1 < layers_.size(); ++i)
      if (z < tops_[i] + layers_[i].thickness_nm) return i;
    return layers_.size() - 1;
  }

 private:
  void validate() {
    if (layers_.size() < 2)
      throw StackValidationError("?", "stack needs vacuum and substrate");
    for (const Layer& l : layers_) l.validate();
    const Layer& top = layers_.front();
    if (!top.semi_infinite())
      throw StackValidationError(top.label, "top layer must be semi-infinite");
    if (!top.constant || top.constant->delta != 0.0 || top.constant->beta != 0.0)
      throw StackValidationError(top.label, "top layer must be vacuum (n = 1)");
    if (!layers_.back().semi_infinite())
      throw StackValidationError(layers_.back().label,
                                 "substrate must be semi-infinite");
    for (std::size_t i = 1; i + 1 < layers_.size(); ++i)
      if (layers_[i].semi_infinite())
        throw StackValidationError(layers_[i].label,
                                   "interior layer must have finite thickness");
    resonant_ = npos;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!layers_[i].is_resonant) continue;
      if (resonant_ != npos)
        throw StackValidationError(layers_[i].label,
                                   "more than one resonant layer");
      if (i == 0 || i + 1 == layers_.size())
        throw StackValidationError(layers_[i].label,
                                   "resonant layer must be a finite layer");
      resonant_ = i;
    }
  }

  std::vector<Layer> layers_;
  std::vector<double> tops_;
  double total_ = 0.0;
  std::size_t resonant_ = npos;
};

/// z-component of the wave vector inside a medium of index n:
/// k sqrt(n^2 - cos^2 theta), branch with Im >= 0 so fields decay along +z.
/// The difference n^2 - cos^2 theta is formed as (n - cos)(n + cos) with
/// 1 - cos(theta) = 2 sin^2(theta/2) to keep grazing-incidence precision.
inline Complex kz_in_medium(Complex n, const ScanPoint& point) {
  double th = point.theta_rad();
  double one_minus_cos = 2.0 * std::pow(std::sin(0.5 * th), 2);
  double cos_th = 1.0 - one_minus_cos;
  if (n == Complex(1.0, 0.0)) return point.k() * std::sin(th);
  Complex diff = (n - cos_th) * (n + cos_th);
  Complex kz = point.k() * std::sqrt(diff);
  if (kz.imag() < 0.0) kz = -kz;
  return kz;
}

inline Complex layer_kz(const Layer& layer, const ScanPoint& point) {
  return kz_in_medium(layer.refractive_index(point.energy_ev), point);
}

inline Complex layer_kz(const Layer& layer, const ScanPoint& point,
                        const ResonanceLine& line) {
  return kz_in_medium(layer.refractive_index(point.energy_ev, line), point);
}

struct FresnelCoefficients {
  Complex r;
  Complex t;
};

/// r_ij = (k_i - k_j)/(k_i + k_j), t_ij = 2 k_i/(k_i + k_j).
inline FresnelCoefficients fresnel(Complex k_i, Complex k_j) {
  Complex s = k_i + k_j;
  if (s == Complex(0.0, 0.0))
    throw DegenerateInterfaceError("k_i + k_j = 0 at an interface");
  return {(k_i - k_j) / s, 2.0 * k_i / s};
}

/// All layer k_z values at a scan point. The white line contributes to the
/// resonant layer only when a line is given.
inline std::vector<Complex> stack_kz(const CavityStack& stack,
                                     const ScanPoint& point,
                                     const ResonanceLine* line = nullptr) {
  std::vector<Complex> kz(stack.size());
  for (std::size_t i = 0; i < stack.size(); ++i) {
    Complex n = (line && stack[i].is_resonant)
                    ? stack[i].refractive_index(point.energy_ev, *line)
                    : stack[i].refractive_index(point.energy_ev);
    kz[i] = kz_in_medium(n, point);
  }
  return kz;
}

}  // namespace xcavity
