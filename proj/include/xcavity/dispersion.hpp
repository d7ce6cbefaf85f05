#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "xcavity/common.hpp"

namespace xcavity {

// Conventions used throughout:
//   n = 1 - (2 pi rho_a r_e / k^2) * f,  f = f1 - i*f2  (f2 >= 0),
// with time dependence exp(-i w t) and downward propagation exp(+i k_z z).
// Under these signs an absorber has beta = Im(n) > 0 and the causal
// single-line correction is  delta_f = f0 / (eps + i),  eps = 2(w-w0)/Gamma,
// whose imaginary part is negative on resonance. Tabulated (f1, f2) columns
// follow the absorption-positive convention; the sign bridge f = f1 - i*f2
// is applied in exactly one place, ScatteringFactorTable::value_at.

/// Energy-tabulated complex atomic scattering length (per formula unit,
/// in classical-electron-radius units) plus the number density used to
/// turn it into a refractive index.
class ScatteringFactorTable {
 public:
  ScatteringFactorTable(std::vector<double> energies_ev,
                        std::vector<Complex> f_values, double atom_density_nm3)
      : energies_(std::move(energies_ev)),
        f_(std::move(f_values)),
        atom_density_(atom_density_nm3) {
    if (energies_.size() != f_.size() || energies_.size() < 3)
      throw InputError("scattering-factor table needs >= 3 (energy, f) rows");
    for (std::size_t i = 1; i < energies_.size(); ++i)
      if (!(energies_[i] > energies_[i - 1]))
        throw InputError("scattering-factor energies must strictly increase");
    if (!(atom_density_ > 0.0))
      throw InputError("atom density must be positive");
  }

  /// Build from absorption-positive (f1, f2) columns; applies the sign
  /// bridge f = f1 - i*f2 once, here.
  static ScatteringFactorTable from_f1_f2(std::vector<double> energies_ev,
                                          const std::vector<double>& f1,
                                          const std::vector<double>& f2,
                                          double atom_density_nm3) {
    if (f1.size() != energies_ev.size() || f2.size() != energies_ev.size())
      throw InputError("f1/f2 column length mismatch");
    std::vector<Complex> f(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) f[i] = Complex(f1[i], -f2[i]);
    return ScatteringFactorTable(std::move(energies_ev), std::move(f),
                                 atom_density_nm3);
  }

  /// Linear interpolation between tabulated energies.
  Complex value_at(double energy_ev) const {
    if (energy_ev < energies_.front() || energy_ev > energies_.back())
      throw DispersionRangeError("energy " + std::to_string(energy_ev) +
                                 " eV outside table range [" +
                                 std::to_string(energies_.front()) + ", " +
                                 std::to_string(energies_.back()) + "]");
    auto it = std::upper_bound(energies_.begin(), energies_.end(), energy_ev);
    if (it == energies_.begin()) return f_.front();
    if (it == energies_.end()) return f_.back();
    std::size_t j = static_cast<std::size_t>(it - energies_.begin());
    double t = (energy_ev - energies_[j - 1]) / (energies_[j] - energies_[j - 1]);
    return f_[j - 1] + t * (f_[j] - f_[j - 1]);
  }

  double atom_density() const { return atom_density_; }
  double energy_min() const { return energies_.front(); }
  double energy_max() const { return energies_.back(); }
  const std::vector<double>& energies() const { return energies_; }
  const std::vector<Complex>& f_values() const { return f_; }

 private:
  std::vector<double> energies_;
  std::vector<Complex> f_;
  double atom_density_;
};

/// Lorentzian white-line parameters. f0 and dipole_sq are quoted in the
/// reporting unit of the literature for this system (see
/// kResonantStrengthScale); gamma in eV, omega0 in eV, dipole_sq in units
/// of gamma.
struct ResonanceLine {
  double omega0 = 0.0;
  double gamma = 0.0;
  double f0 = 0.0;
  double dipole_sq = 0.0;

  void validate() const {
    if (!(gamma > 0.0)) throw InputError("resonance gamma must be > 0");
    if (f0 < 0.0) throw InputError("resonance f0 must be >= 0");
    if (dipole_sq < 0.0) throw InputError("resonance dipole_sq must be >= 0");
  }
};

/// delta_f(w) = f0 / (eps + i), eps = 2(w - w0)/Gamma. Im is negative on
/// resonance; the index assembly below turns that into beta > 0.
inline Complex lorentzian_delta_f(const ResonanceLine& line, double energy_ev) {
  line.validate();
  double eps = 2.0 * (energy_ev - line.omega0) / line.gamma;
  return line.f0 / Complex(eps, 1.0);
}

/// n = 1 - (2 pi rho_a r_e / k^2) f  with k the vacuum wave number.
inline Complex index_from_f(Complex f, double atom_density_nm3,
                            double energy_ev) {
  double k = energy_ev / kHBarC;
  return 1.0 - (2.0 * kPi * atom_density_nm3 * kElectronRadius / (k * k)) * f;
}

inline Complex index_from_f(const ScatteringFactorTable& table,
                            double energy_ev) {
  return index_from_f(table.value_at(energy_ev), table.atom_density(),
                      energy_ev);
}

/// Absorption-strength samples Im[delta_f] = (k / 4 pi) * sigma_abs with
/// sigma_abs = scale * xas. Positive (absorption convention); negate before
/// feeding kramers_kronig to obtain the index-convention delta_f.
inline std::vector<double> absorption_to_im_f(
    const std::vector<double>& energies_ev, const std::vector<double>& xas,
    double scale) {
  if (energies_ev.size() != xas.size())
    throw InputError("absorption curve column length mismatch");
  std::vector<double> out(xas.size());
  for (std::size_t i = 0; i < xas.size(); ++i) {
    double v = scale * xas[i];
    if (v < -1e-12 * std::abs(scale))
      throw InputError("negative absorption after background subtraction");
    out[i] = (energies_ev[i] / kHBarC) / (4.0 * kPi) * std::max(v, 0.0);
  }
  return out;
}

/// Least-squares scale such that (k/4pi)*scale*xas matches the table's f2
/// over [e_lo, e_hi] (a window away from the white line).
inline double calibrate_absorption_scale(const std::vector<double>& energies_ev,
                                         const std::vector<double>& xas,
                                         const ScatteringFactorTable& table,
                                         double e_lo, double e_hi) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < energies_ev.size(); ++i) {
    double e = energies_ev[i];
    if (e < e_lo || e > e_hi) continue;
    double basis = (e / kHBarC) / (4.0 * kPi) * xas[i];
    double target = -table.value_at(e).imag();  // f2
    num += basis * target;
    den += basis * basis;
  }
  if (den == 0.0) throw InputError("calibration window contains no samples");
  return num / den;
}

struct KramersKronigResult {
  std::vector<double> re;  ///< Re[delta_f] on the input grid
  bool wing_warning = false;  ///< grid span below the recommended wings
};

/// Dispersion relation Re[df](w) = (2/pi) PV int_0^inf w' Im[df](w') /
/// (w'^2 - w^2) dw' evaluated on the sample grid. The pole is removed by
/// subtracting Im[df](w) analytically; the residual is trapezoid-integrated;
/// beyond the grid the input is extrapolated as an inverse-square decay in
/// the detuning from the peak position.
inline KramersKronigResult kramers_kronig(const std::vector<double>& omega,
                                          const std::vector<double>& im) {
  const std::size_t n = omega.size();
  if (n != im.size() || n < 4) throw InputError("kramers_kronig: bad input size");
  for (std::size_t i = 1; i < n; ++i)
    if (!(omega[i] > omega[i - 1]))
      throw InputError("kramers_kronig: abscissae must strictly increase");

  // Wing anchor at the strongest sample.
  std::size_t ipk = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(im[i]) > std::abs(im[ipk])) ipk = i;
  const double wc = omega[ipk];
  const double span = omega.back() - omega.front();
  const double half_width_lo = wc - omega.front();
  const double half_width_hi = omega.back() - wc;

  KramersKronigResult result;
  // Recommended wings: span at least ~100 line widths. A crude feature
  // width estimate: distance at which |im| falls to 1/100 of its peak,
  // about five half widths for a single pole.
  double feat = 0.0;
  for (std::size_t i = ipk; i < n; ++i)
    if (std::abs(im[i]) < 0.01 * std::abs(im[ipk])) {
      feat = omega[i] - wc;
      break;
    }
  if (feat > 0.0 && (half_width_lo < 20.0 * feat || half_width_hi < 20.0 * feat))
    result.wing_warning = true;

  // Inverse-square wing tails matched at the grid ends.
  const double amp_lo = im.front() * (omega.front() - wc) * (omega.front() - wc);
  const double amp_hi = im.back() * (omega.back() - wc) * (omega.back() - wc);
  const int n_tail = 400;
  const double tail_span = 50.0 * span;
  std::vector<double> tl, tl_im, tr, tr_im;
  tl.reserve(n_tail);
  tr.reserve(n_tail);
  {
    // log-spaced offsets from the grid ends, nearest first
    double o_min = 1e-3 * span / n, o_max = tail_span;
    for (int i = 0; i < n_tail; ++i) {
      double t = static_cast<double>(i) / (n_tail - 1);
      double off = o_min * std::pow(o_max / o_min, t);
      double wl = omega.front() - off;
      if (wl > 1e-6) {
        tl.push_back(wl);
        tl_im.push_back(amp_lo / ((wl - wc) * (wl - wc)));
      }
      double wr = omega.back() + off;
      tr.push_back(wr);
      tr_im.push_back(amp_hi / ((wr - wc) * (wr - wc)));
    }
    std::reverse(tl.begin(), tl.end());
    std::reverse(tl_im.begin(), tl_im.end());
  }
  const double a_full = tl.empty() ? omega.front() : tl.front();
  const double b_full = tr.back();

  result.re.resize(n);
  std::vector<double> g(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double w = omega[j];
    const double w2 = w * w;
    // Subtracted integrand over the sample grid.
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      g[i] = omega[i] * (im[i] - im[j]) / (omega[i] * omega[i] - w2);
    }
    {
      double d;  // limit of the subtracted integrand at the pole: Im'(w)/2
      if (j == 0)
        d = (im[1] - im[0]) / (omega[1] - omega[0]);
      else if (j == n - 1)
        d = (im[n - 1] - im[n - 2]) / (omega[n - 1] - omega[n - 2]);
      else
        d = (im[j + 1] - im[j - 1]) / (omega[j + 1] - omega[j - 1]);
      g[j] = 0.5 * d;
    }
    double t1 = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
      t1 += 0.5 * (g[i] + g[i + 1]) * (omega[i + 1] - omega[i]);
    // Tails with the same subtraction.
    auto tail = [&](const std::vector<double>& tw, const std::vector<double>& tim) {
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < tw.size(); ++i) {
        double ga = tw[i] * (tim[i] - im[j]) / (tw[i] * tw[i] - w2);
        double gb = tw[i + 1] * (tim[i + 1] - im[j]) / (tw[i + 1] * tw[i + 1] - w2);
        s += 0.5 * (ga + gb) * (tw[i + 1] - tw[i]);
      }
      return s;
    };
    double t_tails = tail(tl, tl_im) + tail(tr, tr_im);
    // Analytic part of the subtraction over the full extended domain.
    double t2 = 0.0;
    if (im[j] != 0.0)
      t2 = im[j] * 0.5 *
           std::log(std::abs((b_full * b_full - w2) / (a_full * a_full - w2)));
    result.re[j] = (2.0 / kPi) * (t1 + t_tails + t2);
  }
  return result;
}

struct ArctanStep {
  double center = 0.0;  ///< eV
  double width = 1.0;   ///< eV
  double amplitude = 0.0;
};

/// Result of decomposing a near-edge absorption curve into a Lorentzian
/// line, an arctangent ionization step and a flat background.
struct XasDecomposition {
  ResonanceLine lorentzian;  ///< amplitude stored in f0 (curve units)
  ArctanStep continuum;
  double background = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  ///< no significant line found

  double model_at(double e) const {
    double eps = 2.0 * (e - lorentzian.omega0) / lorentzian.gamma;
    return lorentzian.f0 / (eps * eps + 1.0) +
           continuum.amplitude *
               (0.5 + std::atan((e - continuum.center) / continuum.width) / kPi) +
           background;
  }
};

class FitFailureError : public Error {
 public:
  FitFailureError(const std::string& what, XasDecomposition best)
      : Error(what), best_(std::move(best)) {}
  const XasDecomposition& best_so_far() const { return best_; }

 private:
  XasDecomposition best_;
};

}  // namespace xcavity
