#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spdc/common.hpp"

namespace spdc {

// Physical configuration of the source and of the two lens arrangements.
// All lengths in meters. `magnification` is the crystal-to-camera imaging
// magnification; `fourier_focal` is the single effective focal length of
// the Fourier-imaging lens train (only the product f*lambda enters the
// momentum-to-position mapping).
struct OpticalConfig {
  double lambda_pump = from_nm(405);
  double lambda_signal = from_nm(910);
  double lambda_idler = from_nm(730);
  double pump_waist = from_um(60);
  double crystal_length = from_mm(5);
  double magnification = 3.0;
  double fourier_focal = from_mm(100.0 / 3.0);

  // fixed action constant [J s], exposed for unit conversions of reported
  // momenta (which the library carries as p/hbar)
  static constexpr double hbar = kHbar;

  // relative energy-conservation mismatch of 1/lp vs 1/ls + 1/li
  double energy_mismatch() const {
    const double lhs = 1.0 / lambda_pump;
    const double rhs = 1.0 / lambda_signal + 1.0 / lambda_idler;
    return std::abs(lhs - rhs) / rhs;
  }

  // Throws on hard violations; returns human-readable warnings for soft ones.
  std::vector<std::string> validate() const {
    require(lambda_pump > 0 && lambda_signal > 0 && lambda_idler > 0,
            "optics: wavelengths must be positive");
    require(pump_waist > 0, "optics: pump waist must be positive");
    require(crystal_length > 0, "optics: crystal length must be positive");
    require(magnification > 0, "optics: magnification must be positive");
    require(fourier_focal > 0, "optics: fourier focal length must be positive");
    std::vector<std::string> warnings;
    if (energy_mismatch() > 1e-3) {
      warnings.push_back("optics: 1/lambda_pump deviates from 1/lambda_signal + 1/lambda_idler by " +
                         std::to_string(energy_mismatch()) + " (relative), check wavelengths");
    }
    return warnings;
  }
};

// The four Gaussian widths defining the biphoton correlations, one
// transverse axis (x and y are i.i.d.). Momenta are p/hbar [1/m].
//   sigma_minus_pos: std of r_s - r_i            (position correlation, Delta_r)
//   sigma_plus_mom:  std of p_s + p_i            (momentum anti-correlation, Delta_p)
//   sigma_plus_pos:  std of the pair centroid (r_s + r_i)/2 (sets the beam size)
//   sigma_minus_mom: std of p_s - p_i            (sets the single-photon momentum spread)
// sigma_minus_pos * sigma_plus_mom below 1/2 is the entangled regime, not an error.
struct GaussianPairState {
  double sigma_minus_pos = 0;
  double sigma_plus_mom = 0;
  double sigma_plus_pos = 0;
  double sigma_minus_mom = 0;

  void validate() const {
    require(sigma_minus_pos > 0 && sigma_plus_mom > 0 && sigma_plus_pos > 0 && sigma_minus_mom > 0,
            "pair state: all four widths must be positive");
  }

  // EPR product in units of hbar
  double epr_product() const { return sigma_minus_pos * sigma_plus_mom; }

  // products below 1/2 are the object of study, not an invariant violation
  bool entangled_regime() const { return epr_product() < 0.5; }
};

// Parameterization used by derive_state. The correlation widths follow
//   sigma_plus_mom  = c_p / pump_waist           (c_p defaults to sqrt(2))
//   sigma_minus_pos = c_r * sqrt(crystal_length * lambda_pump)
// and the marginal widths are marginal_scale multiples of them. Widths can
// always be injected directly instead.
struct StateModelConstants {
  double c_p = 1.4142135623730951;
  double c_r = 0.167;
  double marginal_scale = 10.0;
};

inline GaussianPairState derive_state(const OpticalConfig& config,
                                      const StateModelConstants& constants = {}) {
  config.validate();
  require(constants.c_p > 0, "derive_state: c_p must be positive");
  require(constants.c_r > 0, "derive_state: c_r must be positive");
  require(constants.marginal_scale > 0, "derive_state: marginal_scale must be positive");
  GaussianPairState state;
  state.sigma_plus_mom = constants.c_p / config.pump_waist;
  state.sigma_minus_pos = constants.c_r * std::sqrt(config.crystal_length * config.lambda_pump);
  state.sigma_plus_pos = constants.marginal_scale * state.sigma_minus_pos;
  state.sigma_minus_mom = constants.marginal_scale * state.sigma_plus_mom;
  state.validate();
  return state;
}

// Fourier-plane mapping: an incoming photon of transverse momentum p and
// wavelength lambda lands at q = f * lambda * p / (2*pi*hbar). With p
// carried as k = p/hbar [1/m] this is q = f * lambda * k / (2*pi).
inline double momentum_to_camera(double k, double lambda, double f) {
  require(lambda > 0 && f > 0, "momentum_to_camera: lambda and f must be positive");
  return f * lambda * k / kTwoPi;
}

inline double camera_to_momentum(double q, double lambda, double f) {
  require(lambda > 0 && f > 0, "camera_to_momentum: lambda and f must be positive");
  return kTwoPi * q / (f * lambda);
}

// Orientation of the momentum-correlation line in the joint camera
// coordinates; pi/4 (anti-diagonal) for degenerate pairs.
inline double tilt_angle(double lambda_signal, double lambda_idler) {
  require(lambda_signal > 0 && lambda_idler > 0, "tilt_angle: wavelengths must be positive");
  return std::atan(lambda_signal / lambda_idler);
}

}  // namespace spdc
