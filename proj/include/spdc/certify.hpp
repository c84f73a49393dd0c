#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "spdc/common.hpp"
#include "spdc/fit.hpp"

namespace spdc {

// EPR product verdict. product = delta_r * delta_p in units of hbar
// (meters times hbar/m); entanglement is certified when the product falls
// below hbar/2 by at least `threshold_sigma` standard deviations.
struct EprReport {
  double delta_r = 0;        // [m]
  double delta_r_sigma = 0;
  double delta_p = 0;        // [1/m], i.e. p/hbar
  double delta_p_sigma = 0;
  double product = 0;        // [hbar]
  double product_sigma = 0;
  double significance = 0;   // (0.5 - product) / product_sigma
  double threshold_sigma = 3.0;
  bool violated = false;

  // provenance
  std::string config_hash_hex;
  uint64_t seed = 0;
  uint32_t n_frames = 0;
};

// First-order uncertainty propagation of the product; the verdict requires
// product < hbar/2 with at least threshold_sigma significance.
inline EprReport epr_certify(const PhysicalWidth& delta_r, const PhysicalWidth& delta_p,
                             double threshold_sigma = 3.0) {
  require(delta_r.value > 0 && delta_p.value > 0, "epr_certify: widths must be positive");
  require(delta_r.sigma >= 0 && delta_p.sigma >= 0, "epr_certify: uncertainties must be >= 0");
  EprReport report;
  report.delta_r = delta_r.value;
  report.delta_r_sigma = delta_r.sigma;
  report.delta_p = delta_p.value;
  report.delta_p_sigma = delta_p.sigma;
  report.product = delta_r.value * delta_p.value;
  report.product_sigma = std::sqrt(delta_p.value * delta_p.value * delta_r.sigma * delta_r.sigma +
                                   delta_r.value * delta_r.value * delta_p.sigma * delta_p.sigma);
  report.threshold_sigma = threshold_sigma;
  report.significance = report.product_sigma > 0
                            ? (0.5 - report.product) / report.product_sigma
                            : (report.product < 0.5 ? INFINITY : -INFINITY);
  report.violated = report.product < 0.5 && report.significance > threshold_sigma;
  return report;
}

// Monte-Carlo check of the first-order propagation: std of products of
// Gaussian-perturbed inputs. Used by tests; exposed because reports quote it.
inline double epr_product_sigma_monte_carlo(const PhysicalWidth& delta_r,
                                            const PhysicalWidth& delta_p,
                                            int n_samples = 100000, uint64_t seed = 9001) {
  Rng rng(seed);
  double sum = 0, sq = 0;
  for (int i = 0; i < n_samples; ++i) {
    const double r = delta_r.value + rng.next_normal(delta_r.sigma);
    const double p = delta_p.value + rng.next_normal(delta_p.sigma);
    const double prod = r * p;
    sum += prod;
    sq += prod * prod;
  }
  const double mean = sum / n_samples;
  return std::sqrt(std::max(0.0, sq / n_samples - mean * mean));
}

// One sweep point for the scaling-law fit: pump waist, EPR product, and the
// product's one-sigma uncertainty (all in consistent units; a comes out in
// the waist's length unit when the product is in hbar).
struct ScalingPoint {
  double waist = 0;
  double product = 0;
  double sigma = 0;
};

struct ScalingFit {
  double a = 0;
  double a_sigma = 0;
};

// Weighted least squares of product = a / waist. Points with sigma == 0 get
// unit weight (exact-point use); mixing zero and nonzero sigmas is rejected.
inline ScalingFit fit_scaling_law(std::span<const ScalingPoint> points) {
  require(points.size() >= 2, "fit_scaling_law: need at least 2 points");
  bool any_zero = false, any_nonzero = false;
  for (const auto& pt : points) {
    require(pt.waist > 0, "fit_scaling_law: waists must be positive");
    require(pt.sigma >= 0, "fit_scaling_law: sigmas must be >= 0");
    (pt.sigma == 0 ? any_zero : any_nonzero) = true;
  }
  require(!(any_zero && any_nonzero),
          "fit_scaling_law: cannot mix exact and uncertain points");
  bool distinct = false;
  for (size_t i = 1; i < points.size(); ++i)
    if (points[i].waist != points[0].waist) distinct = true;
  require(distinct, "fit_scaling_law: need at least 2 distinct waists");

  double num = 0, den = 0;
  for (const auto& pt : points) {
    const double w = any_zero ? 1.0 : 1.0 / (pt.sigma * pt.sigma);
    num += w * pt.product / pt.waist;
    den += w / (pt.waist * pt.waist);
  }
  ScalingFit fit;
  fit.a = num / den;
  fit.a_sigma = any_zero ? 0.0 : std::sqrt(1.0 / den);
  return fit;
}

}  // namespace spdc
