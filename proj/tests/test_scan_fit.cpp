#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "test_stacks.hpp"
#include "xcavity/scan_fit.hpp"

using namespace xcavity;
using namespace xcavity::testing;

TEST_CASE("mode search fails cleanly without a cavity") {
  CavityStack stack({vacuum_layer(),
                     const_layer("sub", Layer::kSemiInfinite, 0.0, 0.0)});
  CHECK_THROWS_AS(locate_first_mode(stack, 10208.0, 0.05, 0.5), SearchError);
}

TEST_CASE("mode position is stable under grid refinement") {
  CavityStack stack = reference_stack();
  double a = locate_first_mode(stack, 10208.0, 0.05, 0.5);
  double b = locate_first_mode(stack, 10208.0, 0.10, 0.45);
  double c = locate_first_mode(stack, 10208.0, 0.14, 0.21);
  CHECK(std::abs(a - b) < 1e-6);
  CHECK(std::abs(a - c) < 1e-6);
}

TEST_CASE("first dip matches the bound-mode condition of a symmetric guide") {
  // clad / guide / clad with a thick-ish top clad; the dip approximates the
  // even TE fundamental of the infinite-clad slab, solved independently
  // from its transcendental condition tan(h D / 2) = kappa / h.
  const double delta_g = 1e-6, delta_c = 3e-5, d_guide = 40.0;
  CavityStack stack({vacuum_layer(),
                     const_layer("clad", 8.0, delta_c, 2e-7),
                     const_layer("guide", d_guide, delta_g, 2e-9),
                     const_layer("clad_sub", Layer::kSemiInfinite, delta_c, 2e-7)});
  const double k = 10208.0 / kHBarC;
  auto mode_eq = [&](double s2) {
    double h = k * std::sqrt(s2 - 2.0 * delta_g);
    double kap = k * std::sqrt(2.0 * delta_c - s2);
    return std::tan(0.5 * h * d_guide) - kap / h;
  };
  // bisection for the fundamental (h D < pi)
  double lo = 2.0 * delta_g * 1.0001;
  double hi = std::min(2.0 * delta_c * 0.9999,
                       std::pow(kPi / d_guide / k, 2) + 2.0 * delta_g);
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mode_eq(lo) * mode_eq(mid) <= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  double theta_mode = rad_to_deg(std::asin(std::sqrt(0.5 * (lo + hi))));
  double theta_dip = locate_first_mode(stack, 10208.0, 0.06, 0.45);
  CHECK(std::abs(theta_dip - theta_mode) < 0.005 * theta_mode);
}

TEST_CASE("maps are deterministic and reproducible") {
  CavityStack stack = reference_stack();
  ResonanceLine line = reference_line();
  ScanOptions opt;
  opt.theta1_deg = locate_first_mode(stack, line.omega0, 0.05, 0.5);
  opt.calib = GreensCalibration{(line.omega0 / kHBarC) *
                                std::sin(deg_to_rad(opt.theta1_deg))};
  line.dipole_sq = opt.calib.dipole_sq_from_f0(line.f0);

  std::vector<double> energies, offs;
  for (int i = 0; i < 41; ++i) energies.push_back(10193.0 + 30.0 * i / 40.0);
  for (int i = 0; i < 11; ++i) offs.push_back(-0.01 + 0.02 * i / 10.0);

  for (SolverKind s :
       {SolverKind::kParratt, SolverKind::kMatrix, SolverKind::kGreens}) {
    SpectralMap m1 = scan_map(stack, s, energies, offs, line, opt);
    SpectralMap m2 = scan_map(stack, s, energies, offs, line, opt);
    REQUIRE(m1.values.size() == m2.values.size());
    for (std::size_t i = 0; i < m1.values.size(); ++i)
      CHECK(m1.values[i] == m2.values[i]);
  }
}

TEST_CASE("resonance off leaves energy-flat columns on a narrow window") {
  CavityStack stack = reference_stack();
  ResonanceLine off = reference_line(0.0);
  ScanOptions opt;
  opt.theta1_deg = locate_first_mode(stack, 10208.0, 0.05, 0.5);
  // A narrow energy window cannot move the broad cavity mode, so each
  // column collapses to its rocking-curve value.
  std::vector<double> energies = {10206.0, 10207.0, 10208.0, 10209.0, 10210.0};
  std::vector<double> offs = {-0.004, 0.0, 0.004};
  SpectralMap m = scan_map(stack, SolverKind::kParratt, energies, offs, off, opt);
  for (std::size_t ia = 0; ia < offs.size(); ++ia) {
    double ref = std::norm(parratt_reflectance(
        stack, ScanPoint(10208.0, opt.theta1_deg + offs[ia])));
    for (std::size_t ie = 0; ie < energies.size(); ++ie)
      CHECK(std::abs(m.at(ie, ia) - ref) < 0.025);
  }
}

TEST_CASE("per-point failures are masked, not fatal") {
  CavityStack stack = reference_stack();
  ResonanceLine line = reference_line();
  ScanOptions opt;
  opt.theta1_deg = 0.18;
  // 8000 eV is outside the shipped tables: those points must be masked.
  std::vector<double> energies = {8000.0, 10208.0};
  std::vector<double> offs = {0.0};
  SpectralMap m = scan_map(stack, SolverKind::kParratt, energies, offs, line, opt);
  CHECK(m.masked(0, 0));
  CHECK_FALSE(m.masked(1, 0));
  CHECK(std::isfinite(m.at(1, 0)));
}

TEST_CASE("self-generated benchmarks return the planted parameter") {
  CavityStack stack = reference_stack();
  ScanOptions opt;
  opt.theta1_deg = locate_first_mode(stack, 10208.0, 0.05, 0.5);
  opt.calib = GreensCalibration{(10208.0 / kHBarC) *
                                std::sin(deg_to_rad(opt.theta1_deg))};
  std::vector<double> energies;
  for (int i = 0; i < 61; ++i) energies.push_back(10193.0 + 30.0 * i / 60.0);
  std::vector<double> offs = {-5e-3, 0.0, 5e-3};
  FitWindow window{10193.0, 10223.0, -0.01, 0.01};

  for (double planted : {0.1, 0.36, 1.0}) {
    ResonanceLine line = reference_line(planted);
    line.dipole_sq = opt.calib.dipole_sq_from_f0(planted);
    SpectralMap bench =
        scan_map(stack, SolverKind::kMatrix, energies, offs, line, opt);
    ResonanceLine seed = reference_line(0.2);  // wrong start on purpose
    seed.dipole_sq = opt.calib.dipole_sq_from_f0(seed.f0);
    FitResult fr = fit_parameter(bench, stack, SolverKind::kMatrix, seed,
                                 FitParameter::kF0, opt, window, 1e-3, 2.0);
    CHECK(std::abs(fr.value - planted) < 1e-6 * planted);
    CHECK(fr.converged);
  }
}

TEST_CASE("worker count does not change the numbers") {
  CavityStack stack = reference_stack();
  ResonanceLine line = reference_line();
  ScanOptions opt;
  opt.theta1_deg = locate_first_mode(stack, line.omega0, 0.05, 0.5);
  std::vector<double> energies = {10200.0, 10208.0, 10216.0};
  std::vector<double> offs = {-0.002, 0.0, 0.002};
  setenv("XCAVITY_THREADS", "1", 1);
  SpectralMap serial = scan_map(stack, SolverKind::kParratt, energies, offs, line, opt);
  setenv("XCAVITY_THREADS", "4", 1);
  SpectralMap parallel = scan_map(stack, SolverKind::kParratt, energies, offs, line, opt);
  unsetenv("XCAVITY_THREADS");
  for (std::size_t i = 0; i < serial.values.size(); ++i)
    CHECK(serial.values[i] == parallel.values[i]);
}

TEST_CASE("rocking curves agree between solvers for a lossless symmetric cavity") {
  CavityStack stack({vacuum_layer(), const_layer("m1", 4.0, 3e-5, 0.0),
                     const_layer("g", 30.0, 1e-6, 0.0),
                     const_layer("m2", 4.0, 3e-5, 0.0),
                     const_layer("sub", Layer::kSemiInfinite, 1e-6, 0.0)});
  for (double th = 0.05; th <= 0.6; th += 0.01) {
    ScanPoint pt(10208.0, th);
    Complex rp = parratt_reflectance(stack, pt);
    Complex rm = bare_cavity(stack, pt, 19.0).r0;
    CHECK(std::abs(rp - rm) < 1e-10 * std::max(1.0, std::abs(rp)));
  }
}

TEST_CASE("map constraints are enforced") {
  SpectralMap m;
  m.energy_axis = {1.0, 2.0};
  m.angle_axis = {0.0};
  m.values = {0.5, 1.5};  // out of range for reflectance
  CHECK_THROWS_AS(m.validate(), InputError);
  m.values = {0.5};
  CHECK_THROWS_AS(m.validate(), InputError);  // shape mismatch
  m.energy_axis = {2.0, 1.0};
  m.values = {0.5, 0.4};
  CHECK_THROWS_AS(m.validate(), InputError);  // non-increasing axis
}
