#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spdc/common.hpp"
#include "spdc/estimator.hpp"
#include "spdc/optics.hpp"
#include "spdc/rng.hpp"

namespace spdc {

enum class FitShape : uint8_t { Isotropic2D = 0, Radial1D = 1 };

// Gaussian peak fit of a projection. Width is the Gaussian sigma (not FWHM,
// not 1/e^2), expressed in the projection's axis units (bins * bin_size);
// center likewise, relative to the zero of the projection variable.
// goodness = residual RMS / fitted amplitude, always reported.
struct FitResult {
  double width = 0;
  double width_uncertainty = 0;            // covariance and bootstrap, in quadrature
  double width_uncertainty_cov = 0;
  double width_uncertainty_bootstrap = 0;  // 0 when no chunk projections were available
  double amplitude = 0;
  double center_x = 0;
  double center_y = 0;
  double offset = 0;
  double goodness = 0;
  int iterations = 0;
  bool converged = false;
};

namespace fitdetail {

// solve M x = b for small symmetric positive-definite M (in-place Cholesky)
inline bool solve_spd(std::vector<double>& m, std::vector<double>& b, int n) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = m[i * n + j];
      for (int k = 0; k < j; ++k) sum -= m[i * n + k] * m[j * n + k];
      if (i == j) {
        if (sum <= 0.0) return false;
        m[i * n + i] = std::sqrt(sum);
      } else {
        m[i * n + j] = sum / m[j * n + j];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    double sum = b[i];
    for (int k = 0; k < i; ++k) sum -= m[i * n + k] * b[k];
    b[i] = sum / m[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double sum = b[i];
    for (int k = i + 1; k < n; ++k) sum -= m[k * n + i] * b[k];
    b[i] = sum / m[i * n + i];
  }
  return true;
}

inline bool invert_spd(const std::vector<double>& m, std::vector<double>& inv, int n) {
  inv.assign(n * n, 0.0);
  for (int col = 0; col < n; ++col) {
    std::vector<double> chol = m;
    std::vector<double> e(n, 0.0);
    e[col] = 1.0;
    if (!solve_spd(chol, e, n)) return false;
    for (int row = 0; row < n; ++row) inv[row * n + col] = e[row];
  }
  return true;
}

struct DataPoint {
  double x, y, value, weight;
};

// Levenberg-Marquardt for A*exp(-rho^2/(2 s^2)) + B; 5 parameters for the
// 2D fit, 3 (A, s, B at fixed center) for the radial profile fit.
struct LmProblem {
  std::vector<DataPoint> pts;
  bool fit_center = true;

  int n_params() const { return fit_center ? 5 : 3; }

  double model(const std::vector<double>& p, const DataPoint& d, std::vector<double>* grad) const {
    const double a = p[0];
    const double s = p[fit_center ? 3 : 1];
    const double b = p[fit_center ? 4 : 2];
    const double dx = fit_center ? d.x - p[1] : d.x;
    const double dy = fit_center ? d.y - p[2] : d.y;
    const double rho2 = dx * dx + dy * dy;
    const double e = std::exp(-rho2 / (2.0 * s * s));
    if (grad) {
      (*grad)[0] = e;
      if (fit_center) {
        (*grad)[1] = a * e * dx / (s * s);
        (*grad)[2] = a * e * dy / (s * s);
        (*grad)[3] = a * e * rho2 / (s * s * s);
        (*grad)[4] = 1.0;
      } else {
        (*grad)[1] = a * e * rho2 / (s * s * s);
        (*grad)[2] = 1.0;
      }
    }
    return a * e + b;
  }

  double chi2(const std::vector<double>& p) const {
    double sum = 0;
    for (const auto& d : pts) {
      const double r = d.value - model(p, d, nullptr);
      sum += d.weight * r * r;
    }
    return sum;
  }

  struct Outcome {
    std::vector<double> params;
    double chi2 = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> covariance;  // n x n, scaled by chi2/(n_pts - n_params)
  };

  std::optional<Outcome> run(std::vector<double> p, int max_iter = 200,
                             double rel_tol = 1e-10) const {
    const int np = n_params();
    const int sigma_idx = fit_center ? 3 : 1;
    double lambda = 1e-3;
    double chi = chi2(p);
    std::vector<double> grad(np), jtj(np * np), jtr(np), trial_p(np);
    bool converged = false;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
      std::fill(jtj.begin(), jtj.end(), 0.0);
      std::fill(jtr.begin(), jtr.end(), 0.0);
      for (const auto& d : pts) {
        const double m = model(p, d, &grad);
        const double r = d.value - m;
        for (int i = 0; i < np; ++i) {
          jtr[i] += d.weight * grad[i] * r;
          for (int j = 0; j <= i; ++j) jtj[i * np + j] += d.weight * grad[i] * grad[j];
        }
      }
      for (int i = 0; i < np; ++i)
        for (int j = i + 1; j < np; ++j) jtj[i * np + j] = jtj[j * np + i];

      bool stepped = false;
      for (int attempt = 0; attempt < 12 && !stepped; ++attempt) {
        std::vector<double> damped = jtj;
        for (int i = 0; i < np; ++i) damped[i * np + i] *= 1.0 + lambda;
        std::vector<double> delta = jtr;
        if (!solve_spd(damped, delta, np)) {
          lambda *= 10.0;
          continue;
        }
        for (int i = 0; i < np; ++i) trial_p[i] = p[i] + delta[i];
        trial_p[sigma_idx] = std::abs(trial_p[sigma_idx]);
        if (trial_p[sigma_idx] == 0.0 || !std::isfinite(trial_p[sigma_idx])) {
          lambda *= 10.0;
          continue;
        }
        const double trial_chi = chi2(trial_p);
        if (std::isfinite(trial_chi) && trial_chi <= chi) {
          double rel = 0;
          for (int i = 0; i < np; ++i)
            rel = std::max(rel, std::abs(delta[i]) / (std::abs(p[i]) + 1e-30));
          p = trial_p;
          chi = trial_chi;
          lambda = std::max(lambda / 3.0, 1e-12);
          stepped = true;
          if (rel < rel_tol) converged = true;
        } else {
          lambda *= 10.0;
        }
      }
      if (!stepped) {
        // no further improvement possible at any damping: stationary point
        converged = true;
      }
      if (converged) break;
    }
    if (!std::isfinite(chi)) return std::nullopt;

    Outcome out;
    out.params = p;
    out.chi2 = chi;
    out.iterations = iter + 1;
    out.converged = converged;
    // covariance from the undamped normal matrix at the optimum
    std::fill(jtj.begin(), jtj.end(), 0.0);
    for (const auto& d : pts) {
      model(p, d, &grad);
      for (int i = 0; i < np; ++i)
        for (int j = 0; j <= i; ++j) jtj[i * np + j] += d.weight * grad[i] * grad[j];
    }
    for (int i = 0; i < np; ++i)
      for (int j = i + 1; j < np; ++j) jtj[i * np + j] = jtj[j * np + i];
    std::vector<double> inv;
    if (invert_spd(jtj, inv, np) && pts.size() > static_cast<size_t>(np)) {
      const double scale = chi / (static_cast<double>(pts.size()) - np);
      out.covariance.assign(np * np, 0.0);
      for (int i = 0; i < np * np; ++i) out.covariance[i] = inv[i] * scale;
    }
    return out;
  }
};

struct Moments {
  double bg_mean = 0, bg_rms = 0, peak = 0, amplitude = 0;
  double cx = 0, cy = 0, sigma = 1.0;
};

inline Moments peak_moments(const Projection& proj) {
  Moments m;
  const int border = std::max(1, std::min(proj.rows, proj.cols) / 8);
  double bg_sum = 0, bg_sq = 0;
  size_t bg_n = 0;
  for (int r = 0; r < proj.rows; ++r) {
    for (int c = 0; c < proj.cols; ++c) {
      if (r >= border && r < proj.rows - border && c >= border && c < proj.cols - border) continue;
      const double v = proj.at(r, c);
      bg_sum += v;
      bg_sq += v * v;
      ++bg_n;
    }
  }
  m.bg_mean = bg_n ? bg_sum / bg_n : 0.0;
  const double var = bg_n ? std::max(0.0, bg_sq / bg_n - m.bg_mean * m.bg_mean) : 0.0;
  m.bg_rms = std::sqrt(var);
  m.peak = *std::max_element(proj.values.begin(), proj.values.end());
  m.amplitude = m.peak - m.bg_mean;

  const double threshold = m.bg_mean + 0.25 * m.amplitude;
  double w_sum = 0, x_sum = 0, y_sum = 0;
  for (int r = 0; r < proj.rows; ++r)
    for (int c = 0; c < proj.cols; ++c) {
      const double w = proj.at(r, c) - threshold;
      if (w <= 0) continue;
      w_sum += w;
      x_sum += w * c;
      y_sum += w * r;
    }
  if (w_sum > 0) {
    m.cx = x_sum / w_sum;
    m.cy = y_sum / w_sum;
    double m2 = 0;
    for (int r = 0; r < proj.rows; ++r)
      for (int c = 0; c < proj.cols; ++c) {
        const double w = proj.at(r, c) - threshold;
        if (w <= 0) continue;
        m2 += w * ((c - m.cx) * (c - m.cx) + (r - m.cy) * (r - m.cy));
      }
    m.sigma = std::sqrt(std::max(m2 / (2.0 * w_sum), 0.25));
  } else {
    m.cx = 0.5 * (proj.cols - 1);
    m.cy = 0.5 * (proj.rows - 1);
  }
  return m;
}

// Points are restricted to a window of +/- 10 sigma around the moments
// centroid; the window tracks the peak, so fits stay translation-equivariant
// and large grids stay cheap.
inline LmProblem make_problem(const Projection& proj, FitShape shape, const Moments& m) {
  const double reach = std::max(12.0, 10.0 * m.sigma);
  const int c0 = std::max(0, static_cast<int>(std::floor(m.cx - reach)));
  const int c1 = std::min(proj.cols - 1, static_cast<int>(std::ceil(m.cx + reach)));
  const int r0 = std::max(0, static_cast<int>(std::floor(m.cy - reach)));
  const int r1 = std::min(proj.rows - 1, static_cast<int>(std::ceil(m.cy + reach)));
  LmProblem prob;
  if (shape == FitShape::Isotropic2D) {
    prob.fit_center = true;
    prob.pts.reserve(static_cast<size_t>(r1 - r0 + 1) * (c1 - c0 + 1));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c)
        prob.pts.push_back({static_cast<double>(c), static_cast<double>(r), proj.at(r, c), 1.0});
  } else {
    // azimuthal average about the moments centroid
    prob.fit_center = false;
    const int max_r = static_cast<int>(std::floor(reach));
    std::vector<double> sum(max_r + 1, 0.0);
    std::vector<double> count(max_r + 1, 0.0);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        const int k = static_cast<int>(std::lround(std::hypot(c - m.cx, r - m.cy)));
        if (k > max_r) continue;
        sum[k] += proj.at(r, c);
        count[k] += 1.0;
      }
    for (int k = 0; k <= max_r; ++k)
      if (count[k] > 0) prob.pts.push_back({static_cast<double>(k), 0.0, sum[k] / count[k], count[k]});
  }
  return prob;
}

}  // namespace fitdetail

namespace fitdetail {

struct CoreFit {
  Moments moments;
  LmProblem::Outcome outcome;
  double weight_sum = 0;
  int n_params = 0;
};

// Shared fit routine. With `warm_init` the moments-based initialization
// ladder is skipped (bootstrap resamples start from the main fit).
inline std::optional<CoreFit> fit_core(const Projection& proj, FitShape shape,
                                       const std::vector<double>* warm_init = nullptr,
                                       double rel_tol = 1e-10) {
  require(proj.rows >= 5 && proj.cols >= 5, "fit: projection grid too small");
  CoreFit core;
  core.moments = peak_moments(proj);
  const Moments& m = core.moments;
  if (!(m.amplitude > 5.0 * m.bg_rms) || m.amplitude <= 0.0)
    throw std::runtime_error("fit: no significant peak (amplitude " + std::to_string(m.amplitude) +
                             " vs background RMS " + std::to_string(m.bg_rms) + ")");

  LmProblem prob = make_problem(proj, shape, m);
  core.n_params = prob.n_params();
  for (const auto& d : prob.pts) core.weight_sum += d.weight;

  std::optional<LmProblem::Outcome> best;
  if (warm_init) {
    best = prob.run(*warm_init, 200, rel_tol);
  } else {
    for (double scale : {1.0, 2.0, 0.5}) {
      std::vector<double> init;
      if (shape == FitShape::Isotropic2D)
        init = {m.amplitude, m.cx, m.cy, m.sigma * scale, m.bg_mean};
      else
        init = {m.amplitude, m.sigma * scale, m.bg_mean};
      auto outcome = prob.run(init, 200, rel_tol);
      if (outcome && outcome->converged) {
        best = std::move(outcome);
        break;
      }
      if (outcome && (!best || outcome->chi2 < best->chi2)) best = std::move(outcome);
    }
  }
  if (!best || !best->converged) return std::nullopt;
  core.outcome = std::move(*best);
  return core;
}

inline FitResult to_fit_result(const CoreFit& core, const Projection& proj, FitShape shape) {
  const int sigma_idx = shape == FitShape::Isotropic2D ? 3 : 1;
  const int offset_idx = shape == FitShape::Isotropic2D ? 4 : 2;
  FitResult fit;
  fit.amplitude = core.outcome.params[0];
  fit.offset = core.outcome.params[offset_idx];
  fit.width = core.outcome.params[sigma_idx] * proj.bin_size;
  if (shape == FitShape::Isotropic2D) {
    fit.center_x = (core.outcome.params[1] - proj.center_col) * proj.bin_size;
    fit.center_y = (core.outcome.params[2] - proj.center_row) * proj.bin_size;
  } else {
    fit.center_x = (core.moments.cx - proj.center_col) * proj.bin_size;
    fit.center_y = (core.moments.cy - proj.center_row) * proj.bin_size;
  }
  if (!core.outcome.covariance.empty()) {
    fit.width_uncertainty_cov =
        std::sqrt(std::max(0.0, core.outcome.covariance[sigma_idx * core.n_params + sigma_idx])) *
        proj.bin_size;
  }
  fit.width_uncertainty = fit.width_uncertainty_cov;
  fit.goodness = fit.amplitude != 0.0
                     ? std::sqrt(core.outcome.chi2 / core.weight_sum) / std::abs(fit.amplitude)
                     : 0.0;
  fit.iterations = core.outcome.iterations;
  fit.converged = true;
  return fit;
}

}  // namespace fitdetail

// Least-squares Gaussian fit with moments initialization and
// Levenberg-Marquardt refinement (relative parameter change < 1e-8, at most
// 200 iterations; in practice converged much tighter). Throws when the
// projection has no significant peak (amplitude <= 5x background RMS) or
// when the fit does not converge.
inline FitResult fit_gaussian_peak(const Projection& proj, FitShape shape = FitShape::Isotropic2D) {
  const auto core = fitdetail::fit_core(proj, shape);
  if (!core) throw std::runtime_error("fit: did not converge within 200 iterations");
  return fitdetail::to_fit_result(*core, proj, shape);
}

struct BootstrapOptions {
  int resamples = 20;
  uint64_t seed = 0xB0075EEDull;
};

// Fit with a bootstrap width uncertainty over the estimator's frame-chunk
// projections, combined in quadrature with the fit covariance. Resample
// fits warm-start from the main fit.
inline FitResult fit_gaussian_peak(const ProjectionResult& result,
                                   FitShape shape = FitShape::Isotropic2D,
                                   const BootstrapOptions& bopts = {}) {
  const auto core = fitdetail::fit_core(result.projection, shape);
  if (!core) throw std::runtime_error("fit: did not converge within 200 iterations");
  FitResult fit = fitdetail::to_fit_result(*core, result.projection, shape);

  const size_t n_chunks = result.chunk_projections.size();
  if (n_chunks >= 4 && bopts.resamples > 1) {
    Rng rng(bopts.seed);
    Projection resampled = result.projection;
    std::vector<double> widths;
    widths.reserve(bopts.resamples);
    for (int rep = 0; rep < bopts.resamples; ++rep) {
      std::fill(resampled.values.begin(), resampled.values.end(), 0.0);
      double total_weight = 0;
      for (size_t draw = 0; draw < n_chunks; ++draw) {
        const size_t pick = static_cast<size_t>(rng.next_double() * n_chunks);
        const auto& chunk = result.chunk_projections[pick];
        const double w = result.chunk_weights[pick];
        for (size_t j = 0; j < resampled.values.size(); ++j)
          resampled.values[j] += w * chunk.values[j];
        total_weight += w;
      }
      for (auto& v : resampled.values) v /= total_weight;
      try {
        const auto re = fitdetail::fit_core(resampled, shape, &core->outcome.params, 1e-7);
        if (re) widths.push_back(fitdetail::to_fit_result(*re, resampled, shape).width);
      } catch (const std::exception&) {
        // resample without a significant peak contributes nothing
      }
    }
    if (widths.size() >= 4) {
      double mean = 0;
      for (double w : widths) mean += w;
      mean /= static_cast<double>(widths.size());
      double var = 0;
      for (double w : widths) var += (w - mean) * (w - mean);
      var /= static_cast<double>(widths.size() - 1);
      fit.width_uncertainty_bootstrap = std::sqrt(var);
      fit.width_uncertainty = std::hypot(fit.width_uncertainty_cov, fit.width_uncertainty_bootstrap);
    }
  }
  return fit;
}

// One crystal-plane width with its one-sigma uncertainty; meters for
// positions, 1/m (p/hbar) for momenta.
struct PhysicalWidth {
  double value = 0;
  double sigma = 0;
};

// Convert a fitted camera-plane width to the crystal plane:
//   minus axis:          Delta_r = sigma_fit / magnification
//   corrected sum axis:  Delta_p = 2*pi * sigma_fit(q_alpha) / f_eff
//   plain sum axis:      Delta_p = 2*pi * sigma_fit / (mean_lambda * f_eff)
// The plain sum axis has no single correct wavelength for non-degenerate
// pairs (that ambiguity is the systematic error this library demonstrates);
// the mean wavelength is used, which is exact in the degenerate case.
inline PhysicalWidth to_crystal_plane(const FitResult& fit, AxisKind kind,
                                      const OpticalConfig& optics) {
  double scale = 0;
  switch (kind) {
    case AxisKind::MinusPosition:
      scale = 1.0 / optics.magnification;
      break;
    case AxisKind::CorrectedSumMomentum:
      scale = kTwoPi / optics.fourier_focal;
      break;
    case AxisKind::SumMomentum: {
      const double mean_lambda = 0.5 * (optics.lambda_signal + optics.lambda_idler);
      scale = kTwoPi / (mean_lambda * optics.fourier_focal);
      break;
    }
    default:
      throw std::invalid_argument("to_crystal_plane: unknown projection kind");
  }
  return {fit.width * scale, fit.width_uncertainty * scale};
}

}  // namespace spdc
