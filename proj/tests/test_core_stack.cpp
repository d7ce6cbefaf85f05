#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "test_stacks.hpp"
#include "xcavity/core_stack.hpp"

using namespace xcavity;
using xcavity::testing::const_layer;
using xcavity::testing::vacuum_layer;

TEST_CASE("fresnel limiting cases") {
  auto same = fresnel(Complex(0.3, 0.01), Complex(0.3, 0.01));
  CHECK(std::abs(same.r) == 0.0);
  CHECK(same.t == Complex(1.0, 0.0));

  auto total = fresnel(Complex(0.2, 0.0), Complex(0.0, 0.0));
  CHECK(total.r == Complex(1.0, 0.0));
  CHECK(total.t == Complex(2.0, 0.0));

  CHECK_THROWS_AS(fresnel(Complex(0.1, 0.2), Complex(-0.1, -0.2)),
                  DegenerateInterfaceError);
}

TEST_CASE("fresnel identities on random wave vectors") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> re(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    Complex ki(re(rng), std::abs(re(rng)));
    Complex kj(re(rng), std::abs(re(rng)));
    if (std::abs(ki + kj) < 1e-6) continue;
    auto f_ij = fresnel(ki, kj);
    auto f_ji = fresnel(kj, ki);
    CHECK(std::abs(1.0 + f_ij.r - f_ij.t) < 1e-12 * (1.0 + std::abs(f_ij.t)));
    CHECK(std::abs(f_ij.r + f_ji.r) < 1e-12);
    // composition rule
    CHECK(std::abs(f_ij.t * f_ji.t + f_ij.r * f_ij.r - 1.0) < 1e-12);
  }
}

TEST_CASE("layer_kz vacuum identity and decay branch") {
  ScanPoint pt(10208.0, 0.37);
  Layer vac = vacuum_layer();
  CHECK(layer_kz(vac, pt) == Complex(pt.k() * std::sin(pt.theta_rad()), 0.0));

  Layer absorbing = const_layer("abs", 10.0, 3e-5, 2e-6);
  CHECK(layer_kz(absorbing, pt).imag() > 0.0);
}

TEST_CASE("Pt is evanescent below its critical angle") {
  // delta_Pt ~ 3.2e-5 gives theta_c ~ 0.46 deg; at 0.1 deg the wave decays.
  auto pt_table = load_scattering_table("data/Pt.ff", 59.6);
  Layer pt = xcavity::testing::table_layer("Pt", 2.1, pt_table, 59.6);
  ScanPoint point(10208.0, 0.1);
  Complex n = pt.refractive_index(10208.0);
  double theta_c = rad_to_deg(std::sqrt(2.0 * (1.0 - n.real())));
  REQUIRE(point.theta_deg < theta_c);
  Complex kz = layer_kz(pt, point);
  // oracle: direct formula evaluation
  Complex expect = point.k() * std::sqrt(n * n - std::pow(std::cos(point.theta_rad()), 2));
  if (expect.imag() < 0.0) expect = -expect;
  CHECK(std::abs(kz - expect) < 1e-12 * std::abs(expect));
  CHECK(std::abs(kz.imag()) > std::abs(kz.real()));
}

TEST_CASE("kz continuous across the critical angle for beta > 0") {
  Layer l = const_layer("m", 10.0, 3e-5, 2e-6);
  double theta_c = rad_to_deg(std::sqrt(2.0 * 3e-5));
  Complex prev = layer_kz(l, ScanPoint(10208.0, theta_c * 0.97));
  for (int i = 1; i <= 200; ++i) {
    double th = theta_c * (0.97 + 0.06 * i / 200.0);
    Complex cur = layer_kz(l, ScanPoint(10208.0, th));
    CHECK(std::abs(cur - prev) < 0.05 * std::abs(prev));
    prev = cur;
  }
}

TEST_CASE("stack validation names the offending layer") {
  // top layer not vacuum
  std::vector<Layer> bad1 = {const_layer("metal", Layer::kSemiInfinite, 1e-5, 0.0),
                             const_layer("sub", Layer::kSemiInfinite, 1e-5, 0.0)};
  try {
    CavityStack s(bad1);
    FAIL("expected validation error");
  } catch (const StackValidationError& e) {
    CHECK(e.layer() == "metal");
  }

  // non-positive finite thickness
  std::vector<Layer> bad2 = {vacuum_layer(),
                             const_layer("thin", 0.0, 1e-5, 0.0),
                             const_layer("sub", Layer::kSemiInfinite, 1e-5, 0.0)};
  CHECK_THROWS_AS(CavityStack(bad2), StackValidationError);

  // two resonant layers
  auto t = xcavity::testing::const_table(10.0, 1.0);
  std::vector<Layer> bad3 = {
      vacuum_layer(), xcavity::testing::table_layer("r1", 2.0, t, 12.0, true),
      xcavity::testing::table_layer("r2", 2.0, t, 12.0, true),
      const_layer("sub", Layer::kSemiInfinite, 1e-5, 0.0)};
  CHECK_THROWS_AS(CavityStack(bad3), StackValidationError);

  // interior semi-infinite layer
  std::vector<Layer> bad4 = {vacuum_layer(),
                             const_layer("mid", Layer::kSemiInfinite, 1e-5, 0.0),
                             const_layer("sub", Layer::kSemiInfinite, 1e-5, 0.0)};
  CHECK_THROWS_AS(CavityStack(bad4), StackValidationError);
}

TEST_CASE("scan point validation") {
  CHECK_THROWS_AS(ScanPoint(-1.0, 0.2), InputError);
  CHECK_THROWS_AS(ScanPoint(10208.0, 0.0), InputError);
  CHECK_THROWS_AS(ScanPoint(10208.0, 95.0), InputError);
}

TEST_CASE("dispersion-range error surfaces through the stack") {
  auto table = load_scattering_table("data/Pt.ff", 59.6);
  Layer pt = xcavity::testing::table_layer("Pt", 2.1, table, 59.6);
  CHECK_THROWS_AS(pt.refractive_index(500.0), DispersionRangeError);
}
