#include <doctest.h>

#include <cmath>

#include "spdc/optics.hpp"
#include "spdc/rng.hpp"

using namespace spdc;

TEST_CASE("momentum_to_camera maps via q = f*lambda*p / (2*pi*hbar)") {
  CHECK(momentum_to_camera(0.0, from_nm(910), from_mm(100)) == 0.0);
  // p = 2*pi*hbar per mm, lambda = 910 nm, f = 100 mm -> q = 91 um
  const double k = kTwoPi * 1000.0;  // p/hbar [1/m]
  CHECK(momentum_to_camera(k, from_nm(910), from_mm(100)) == doctest::Approx(91e-6).epsilon(1e-12));
  CHECK(momentum_to_camera(k, from_nm(730), from_mm(100)) == doctest::Approx(73e-6).epsilon(1e-12));
}

TEST_CASE("equal momenta land at wavelength-proportional positions") {
  const double k = kTwoPi * 437.0;
  const double qs = momentum_to_camera(k, from_nm(910), from_mm(100));
  const double qi = momentum_to_camera(k, from_nm(730), from_mm(100));
  CHECK(std::abs(qs / qi / (910.0 / 730.0) - 1.0) < 1e-14);
  // linear in lambda: scaling lambda scales q
  for (double scale : {0.5, 2.0, 3.7}) {
    CHECK(momentum_to_camera(k, scale * from_nm(910), from_mm(100)) ==
          doctest::Approx(scale * qs).epsilon(1e-12));
  }
}

TEST_CASE("camera_to_momentum inverts momentum_to_camera") {
  CHECK(camera_to_momentum(0.0, from_nm(730), from_mm(50)) == 0.0);
  CHECK(camera_to_momentum(91e-6, from_nm(910), from_mm(100)) ==
        doctest::Approx(kTwoPi * 1000.0).epsilon(1e-12));
  Rng rng(20240601);
  for (int i = 0; i < 1000; ++i) {
    const double k = rng.next_normal(1e5);
    const double lambda = from_nm(400 + 600 * rng.next_double());
    const double f = from_mm(10 + 300 * rng.next_double());
    const double back = camera_to_momentum(momentum_to_camera(k, lambda, f), lambda, f);
    CHECK(back == doctest::Approx(k).epsilon(1e-12));
  }
}

TEST_CASE("tilt angle") {
  CHECK(tilt_angle(from_nm(810), from_nm(810)) == doctest::Approx(kPi / 4).epsilon(1e-15));
  CHECK(tilt_angle(from_nm(910), from_nm(730)) == doctest::Approx(0.8947166972853484).epsilon(1e-12));
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double a = from_nm(300 + 1000 * rng.next_double());
    const double b = from_nm(300 + 1000 * rng.next_double());
    CHECK(tilt_angle(a, b) + tilt_angle(b, a) == doctest::Approx(kPi / 2).epsilon(1e-12));
  }
  CHECK_THROWS(tilt_angle(-1.0, 730e-9));
}

TEST_CASE("derive_state widths") {
  OpticalConfig config;  // 405/910/730 nm, 60 um waist, 5 mm crystal
  const GaussianPairState state = derive_state(config);
  CHECK(state.sigma_plus_mom == doctest::Approx(23570.226039551584).epsilon(1e-12));
  CHECK(to_hbar_per_mm(state.sigma_plus_mom) == doctest::Approx(23.6).epsilon(0.01));
  CHECK(state.sigma_minus_pos == doctest::Approx(7.515e-6).epsilon(1e-9));
  CHECK(state.sigma_plus_pos == doctest::Approx(10.0 * state.sigma_minus_pos).epsilon(1e-12));
  CHECK(state.sigma_minus_mom == doctest::Approx(10.0 * state.sigma_plus_mom).epsilon(1e-12));

  SUBCASE("doubling the crystal length scales sigma_minus_pos by sqrt(2)") {
    OpticalConfig doubled = config;
    doubled.crystal_length *= 2.0;
    const GaussianPairState s2 = derive_state(doubled);
    CHECK(s2.sigma_minus_pos ==
          doctest::Approx(std::sqrt(2.0) * state.sigma_minus_pos).epsilon(1e-12));
  }
  SUBCASE("sigma_plus_mom * waist is constant; sigma_minus_pos / sqrt(L) is constant") {
    for (double w_um : {40.0, 80.0, 160.0}) {
      OpticalConfig c = config;
      c.pump_waist = from_um(w_um);
      CHECK(derive_state(c).sigma_plus_mom * c.pump_waist ==
            doctest::Approx(state.sigma_plus_mom * config.pump_waist).epsilon(1e-12));
    }
    for (double l_mm : {2.0, 8.0, 30.0}) {
      OpticalConfig c = config;
      c.crystal_length = from_mm(l_mm);
      CHECK(derive_state(c).sigma_minus_pos / std::sqrt(c.crystal_length) ==
            doctest::Approx(state.sigma_minus_pos / std::sqrt(config.crystal_length)).epsilon(1e-12));
    }
  }
  SUBCASE("non-positive constants are rejected") {
    CHECK_THROWS(derive_state(config, {.c_p = 0.0}));
    CHECK_THROWS(derive_state(config, {.c_r = -1.0}));
    CHECK_THROWS(derive_state(config, {.c_p = 1.0, .c_r = 1.0, .marginal_scale = 0.0}));
  }
}

TEST_CASE("optical config validation") {
  OpticalConfig config;
  CHECK(config.validate().empty());  // paper wavelengths conserve energy to ~1e-4

  OpticalConfig bad = config;
  bad.pump_waist = 0;
  CHECK_THROWS(bad.validate());

  OpticalConfig off = config;
  off.lambda_pump = from_nm(415);  // ~2.5% energy mismatch: warn, do not reject
  const auto warnings = off.validate();
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("lambda") != std::string::npos);
}

TEST_CASE("pair state validation and EPR product") {
  GaussianPairState state;
  state.sigma_minus_pos = from_um(7.5);
  state.sigma_plus_mom = from_hbar_per_mm(24.6);
  state.sigma_plus_pos = from_um(75);
  state.sigma_minus_mom = from_hbar_per_mm(246);
  state.validate();
  // entangled regime (product below 1/2) is valid input, not an error
  CHECK(state.epr_product() == doctest::Approx(0.1845).epsilon(1e-12));
  state.sigma_plus_pos = 0;
  CHECK_THROWS(state.validate());
}
