#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "xcavity/matrix_model.hpp"

namespace xcavity {

/// Sublayer slicing of the resonant layer: N_l planes with thickness
/// weights d_l and areal densities rho_a d_l.
struct SublayerGrid {
  std::vector<double> z_positions;  ///< nm, strictly increasing
  std::vector<double> d_l;          ///< nm, sums to the layer thickness
  std::vector<double> area_density;  ///< 1/nm^2 = rho_a * d_l

  static constexpr int kMaxSublayers = 64;

  static SublayerGrid slice(const CavityStack& stack, int n) {
    if (n < 1 || n > kMaxSublayers)
      throw InputError("sublayer count must be in [1, 64]");
    std::size_t ri = stack.resonant_layer();
    if (ri == CavityStack::npos)
      throw GeometryError("slice: stack has no resonant layer");
    double top = stack.top_of(ri);
    double d = stack[ri].thickness_nm;
    double rho = stack[ri].atom_density();
    SublayerGrid g;
    for (int l = 0; l < n; ++l) {
      g.z_positions.push_back(top + d * (l + 0.5) / n);
      g.d_l.push_back(d / n);
      g.area_density.push_back(rho * d / n);
    }
    return g;
  }

  std::size_t size() const { return z_positions.size(); }
};

/// One-time calibration anchor: the vacuum k_z of the working cavity mode.
/// All quantization-area and field-normalization prefactors collapse into
/// the single constant 4 kappa / k_z1, fixed by requiring the single-sublayer
/// model to coincide with the analytic thin-layer reflection; with it the
/// dipole strength |d|^2 (units of Gamma) maps to the line amplitude as
///   |d|^2 = (pi/2) r_e k_z1 f0.
struct GreensCalibration {
  double kz1 = 0.0;  ///< 1/nm

  double dipole_sq_from_f0(double f0) const {
    return 0.5 * kPi * kElectronRadius * kz1 * f0;
  }
  double f0_from_dipole_sq(double dipole_sq) const {
    return dipole_sq / (0.5 * kPi * kElectronRadius * kz1);
  }
};

/// Quasi-1D field kernel between two depths of the bare cavity:
///   G(z_i, z_j) = (i / 2 k_z,vac) * q(z_<) * a(z_>),
/// with q the upward-radiating and a the downward-radiating homogeneous
/// solutions referenced at the surface. Symmetric by construction; its
/// diagonal has Im G >= 0 for passive stacks.
inline Complex greens_kernel(const CavityStack& stack, const ScanPoint& point,
                             double z_i, double z_j) {
  auto tv = detail::traverse_bare(stack, point, {z_i, z_j});
  double z_lo = std::min(z_i, z_j);
  Complex q_lo, a_hi;
  for (const auto& e : tv.at) {
    if (e.z == z_lo) q_lo = e.q;
    a_hi = e.a;  // last entry is the deeper depth
  }
  return Complex(0.0, 0.5) / tv.kz_vacuum * q_lo * a_hi;
}

/// N_l x N_l complex coupling matrix G = J + i Gamma / 2 in eV.
class CouplingMatrix {
 public:
  CouplingMatrix(std::size_t n) : n_(n), g_(n * n) {}

  Complex& at(std::size_t i, std::size_t j) { return g_[i * n_ + j]; }
  Complex at(std::size_t i, std::size_t j) const { return g_[i * n_ + j]; }
  double J(std::size_t i, std::size_t j) const { return at(i, j).real(); }
  double Gamma(std::size_t i, std::size_t j) const {
    return 2.0 * at(i, j).imag();
  }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<Complex> g_;
};

namespace detail {

/// Everything the steady-state solve and the input-output sum need at one
/// scan point.
struct GreensAssembly {
  Complex r0;
  std::vector<Complex> coupling_amp;  ///< c_l, sqrt(eV)
  std::vector<Complex> field;         ///< a(z_l)
  CouplingMatrix coupling{0};
};

inline GreensAssembly assemble(const CavityStack& stack, const ScanPoint& point,
                               const SublayerGrid& grid,
                               const ResonanceLine& line,
                               const GreensCalibration& calib) {
  if (grid.size() == 0) throw InputError("empty sublayer grid");
  if (!(calib.kz1 > 0.0)) throw InputError("calibration k_z1 must be > 0");
  std::size_t ri = stack.resonant_layer();
  if (ri == CavityStack::npos)
    throw GeometryError("greens model: stack has no resonant layer");
  double rho = stack[ri].atom_density();

  auto tv = detail::traverse_bare(stack, point, grid.z_positions);
  const double kv = tv.kz_vacuum;
  const std::size_t n = grid.size();

  GreensAssembly as;
  as.r0 = tv.r0;
  as.coupling_amp.resize(n);
  as.field.resize(n);
  std::vector<Complex> q(n);
  for (std::size_t l = 0; l < n; ++l) {
    q[l] = tv.at[l].q;
    as.field[l] = tv.at[l].a;
    as.coupling_amp[l] =
        std::sqrt(2.0 * rho * line.gamma * kResonantStrengthScale *
                  line.dipole_sq * grid.d_l[l] / (kv * calib.kz1));
  }
  as.coupling = CouplingMatrix(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t lo = std::min(i, j), hi = std::max(i, j);
      as.coupling.at(i, j) = as.coupling_amp[i] * as.coupling_amp[j] *
                             Complex(0.0, 1.0) * q[lo] * as.field[hi];
    }
  return as;
}

}  // namespace detail

/// Inter-sublayer couplings G_ll' = sqrt(rho d_l rho d_l') C |d|^2 G(z_l,
/// z_l') with the calibration constant C = 4 kappa / k_z1 (times Gamma for
/// the |d|^2-in-Gamma-units convention).
inline CouplingMatrix coupling_matrix(const CavityStack& stack,
                                      const ScanPoint& point,
                                      const SublayerGrid& grid,
                                      const ResonanceLine& line,
                                      const GreensCalibration& calib) {
  return detail::assemble(stack, point, grid, line, calib).coupling;
}

struct SteadyState {
  std::vector<Complex> sigma;  ///< lowering-operator amplitudes
  double condition = 0.0;      ///< estimated condition number of M
};

/// Steady-state linear response: sigma = -M^{-1} Omega with
/// M = (Delta + i gamma0 / 2) I + G.
inline SteadyState steady_state(const CouplingMatrix& coupling,
                                const std::vector<Complex>& drive,
                                double detuning_ev, double gamma0_ev) {
  const std::size_t n = coupling.size();
  if (drive.size() != n) throw InputError("steady_state: drive size mismatch");
  Eigen::MatrixXcd m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = coupling.at(i, j);
  m.diagonal().array() += Complex(detuning_ev, 0.5 * gamma0_ev);
  Eigen::VectorXcd om(n);
  for (std::size_t i = 0; i < n; ++i) om(i) = drive[i];
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
  double rcond = lu.rcond();
  SteadyState out;
  out.condition = (rcond > 0.0) ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (out.condition > 1e12)
    throw ResonancePoleError("steady-state system condition " +
                             std::to_string(out.condition) + " at detuning " +
                             std::to_string(detuning_ev) + " eV");
  Eigen::VectorXcd s = lu.solve(-om);
  out.sigma.assign(s.data(), s.data() + n);
  return out;
}

/// Rabi drive per sublayer, Omega_l = sqrt(Gamma) c_l a(z_l).
inline std::vector<Complex> drive_vector(const CavityStack& stack,
                                         const ScanPoint& point,
                                         const SublayerGrid& grid,
                                         const ResonanceLine& line,
                                         const GreensCalibration& calib) {
  auto as = detail::assemble(stack, point, grid, line, calib);
  std::vector<Complex> om(grid.size());
  for (std::size_t l = 0; l < grid.size(); ++l)
    om[l] = std::sqrt(line.gamma) * as.coupling_amp[l] * as.field[l];
  return om;
}

/// Input-output reflectance: the bare pathway plus the resonant emission
/// radiated back to the surface channel,
///   R = r0 + (i / sqrt(Gamma)) sum_l c_l a(z_l) sigma_l.
inline Complex reflectance(const CavityStack& stack, const ScanPoint& point,
                           const SublayerGrid& grid, const ResonanceLine& line,
                           const GreensCalibration& calib,
                           const std::vector<Complex>& sigma) {
  auto as = detail::assemble(stack, point, grid, line, calib);
  if (sigma.size() != grid.size())
    throw InputError("reflectance: sigma size mismatch");
  Complex sum = 0.0;
  for (std::size_t l = 0; l < grid.size(); ++l)
    sum += as.coupling_amp[l] * as.field[l] * sigma[l];
  return as.r0 + Complex(0.0, 1.0) * sum / std::sqrt(line.gamma);
}

/// Whole chain at one scan point.
inline Complex greens_reflectance(const CavityStack& stack,
                                  const ScanPoint& point,
                                  const SublayerGrid& grid,
                                  const ResonanceLine& line,
                                  const GreensCalibration& calib) {
  auto as = detail::assemble(stack, point, grid, line, calib);
  std::vector<Complex> om(grid.size());
  for (std::size_t l = 0; l < grid.size(); ++l)
    om[l] = std::sqrt(line.gamma) * as.coupling_amp[l] * as.field[l];
  auto ss = steady_state(as.coupling, om, point.energy_ev - line.omega0,
                         line.gamma);
  Complex sum = 0.0;
  for (std::size_t l = 0; l < grid.size(); ++l)
    sum += as.coupling_amp[l] * as.field[l] * ss.sigma[l];
  return as.r0 + Complex(0.0, 1.0) * sum / std::sqrt(line.gamma);
}

}  // namespace xcavity
