#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace xcavity {

using Complex = std::complex<double>;

/// hbar*c in eV*nm.
inline constexpr double kHBarC = 197.3269804;

/// Classical electron radius in nm.
inline constexpr double kElectronRadius = 2.8179403262e-6;

inline constexpr double kPi = 3.14159265358979323846;

/// Conversion between the reporting unit of resonance amplitudes (f0,
/// |d|^2) and the dimensionless scattering length in electron-radius
/// units. Published white-line amplitudes for this system are quoted in
/// a normalization where the on-mode reflectance peak of the reference
/// cavity reaches ~0.25 at f0 = 0.36; one fixed constant converts that
/// unit to the scattering amplitude entering the refractive index:
/// delta_f_re = kResonantStrengthScale * delta_f_quoted.
inline constexpr double kResonantStrengthScale = 16.0;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Requested energy outside a tabulated dispersion range.
class DispersionRangeError : public Error {
 public:
  using Error::Error;
};

/// k_i + k_j = 0 at an interface.
class DegenerateInterfaceError : public Error {
 public:
  using Error::Error;
};

/// A layer or stack violates a structural invariant; carries the label
/// of the offending layer.
class StackValidationError : public Error {
 public:
  StackValidationError(const std::string& layer, const std::string& what)
      : Error("layer '" + layer + "': " + what), layer_(layer) {}
  const std::string& layer() const { return layer_; }

 private:
  std::string layer_;
};

/// M22 of the full cavity matrix vanished (pathological pole).
class SingularCavityError : public Error {
 public:
  using Error::Error;
};

/// Steady-state system too ill-conditioned to solve.
class ResonancePoleError : public Error {
 public:
  using Error::Error;
};

/// Mode search found no dip in the requested range.
class SearchError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace xcavity
