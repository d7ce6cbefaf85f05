#pragma once

// Shared stack builders for the test suites. Paths are relative to the
// repository root (ctest runs there).

#include <random>

#include "xcavity/io.hpp"

namespace xcavity::testing {

inline Layer const_layer(const std::string& label, double thickness,
                         double delta, double beta, bool resonant = false) {
  Layer l;
  l.label = label;
  l.thickness_nm = thickness;
  l.constant = ConstantIndex{delta, beta};
  l.is_resonant = resonant;
  return l;
}

inline Layer vacuum_layer() {
  return const_layer("vacuum", Layer::kSemiInfinite, 0.0, 0.0);
}

/// The reference Pt/C/WSi2/C/Pt cavity from the shipped tables.
inline CavityStack reference_stack() {
  return load_stack("demo/cavity_fig1.stack");
}

inline ResonanceLine reference_line(double f0 = 0.36) {
  ResonanceLine line;
  line.omega0 = 10208.0;
  line.gamma = 5.0;
  line.f0 = f0;
  return line;
}

/// Random passive stack: up to max_interior finite layers with small
/// delta/beta, vacuum on top, absorbing-ish substrate.
inline CavityStack random_stack(std::mt19937_64& rng, int max_interior = 6) {
  std::uniform_int_distribution<int> n_layers(1, max_interior);
  std::uniform_real_distribution<double> delta(0.0, 1e-4);
  std::uniform_real_distribution<double> beta(0.0, 1e-5);
  std::uniform_real_distribution<double> thick(1.0, 50.0);
  std::vector<Layer> layers;
  layers.push_back(vacuum_layer());
  int n = n_layers(rng);
  for (int i = 0; i < n; ++i)
    layers.push_back(const_layer("L" + std::to_string(i), thick(rng),
                                 delta(rng), beta(rng)));
  layers.push_back(const_layer("substrate", Layer::kSemiInfinite, delta(rng),
                               beta(rng)));
  return CavityStack(std::move(layers));
}

inline ScanPoint random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> th(0.03, 2.0);
  return ScanPoint(10208.0, th(rng));
}

/// A table whose f vanishes identically (index exactly 1).
inline std::shared_ptr<ScatteringFactorTable> null_table() {
  std::vector<double> e = {1000.0, 10000.0, 20000.0};
  std::vector<Complex> f = {0.0, 0.0, 0.0};
  return std::make_shared<ScatteringFactorTable>(std::move(e), std::move(f), 1.0);
}

/// Tabulated layer helper.
inline Layer table_layer(const std::string& label, double thickness,
                         std::shared_ptr<const ScatteringFactorTable> t,
                         double density, bool resonant = false) {
  Layer l;
  l.label = label;
  l.thickness_nm = thickness;
  TabulatedIndex ti;
  ti.components.emplace_back(std::move(t), 1.0);
  ti.atom_density_nm3 = density;
  l.tables = std::move(ti);
  l.is_resonant = resonant;
  return l;
}

/// Constant-f table (f = f1 - i f2 over a wide range).
inline std::shared_ptr<ScatteringFactorTable> const_table(double f1, double f2) {
  std::vector<double> e = {1000.0, 10000.0, 20000.0};
  std::vector<Complex> f(3, Complex(f1, -f2));
  return std::make_shared<ScatteringFactorTable>(std::move(e), std::move(f), 1.0);
}

}  // namespace xcavity::testing
