#pragma once

#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spdc/certify.hpp"
#include "spdc/config.hpp"
#include "spdc/estimator.hpp"
#include "spdc/fit.hpp"
#include "spdc/io.hpp"
#include "spdc/manifest.hpp"
#include "spdc/optics.hpp"
#include "spdc/oracle.hpp"
#include "spdc/synth.hpp"

namespace spdc {

inline std::string format1(const char* fmt, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), fmt, a);
  return buf;
}

// "value +/- sigma" with sensible shared precision; widths and products are
// never reported bare.
inline std::string with_uncertainty(double value, double sigma) {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%.4g +/- %.3g", value, sigma);
  return buf;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateSummary {
  uint32_t n_frames = 0;
  double mean_lit_per_frame = 0;
  double dropped_fraction = 0;
};

inline FrameStack simulate_from_config(const RunConfig& config, int threads = 0) {
  return synthesize_stack(config.optics, config.state, config.sensor, config.basis, config.frames,
                          config.seed, threads, config.hash());
}

inline SimulateSummary summarize_stack(const FrameStack& stack) {
  SimulateSummary s;
  s.n_frames = stack.n_frames();
  uint64_t lit = 0;
  for (uint32_t l = 0; l < stack.n_frames(); ++l) lit += stack.lit_count(l);
  s.mean_lit_per_frame = static_cast<double>(lit) / stack.n_frames();
  s.dropped_fraction = stack.dropped_fraction();
  return s;
}

inline RunManifest make_stack_manifest(const RunConfig& config, const std::string& stack_path,
                                       const SimulateSummary& summary) {
  RunManifest m;
  m.command = "simulate";
  m.args["out"] = stack_path;
  m.config = config.resolved;
  m.config_sha256 = Sha256::hex(config.hash());
  m.master_seed = config.seed;
  m.outputs.emplace_back(stack_path, Sha256::hex(file_sha256(stack_path)));
  m.notes["frames"] = std::to_string(summary.n_frames);
  m.notes["mean_lit_pixels_per_frame"] = format1("%.6g", summary.mean_lit_per_frame);
  m.notes["dropped_photon_fraction"] = format1("%.6g", summary.dropped_fraction);
  for (size_t i = 0; i < config.warnings.size(); ++i)
    m.notes["warning_" + std::to_string(i)] = config.warnings[i];
  return m;
}

// Load a stack file together with its sidecar manifest; the manifest
// supplies the sensor model and optics, and its config hash must match the
// hash stored in the stack header.
struct LoadedStack {
  FrameStack stack;
  RunConfig config;
};

inline LoadedStack load_stack(const std::string& stack_path,
                              const std::optional<std::string>& config_path = std::nullopt) {
  RunConfig config;
  if (config_path) {
    config = load_run_config(*config_path);
  } else {
    const std::string mpath = manifest_path_for(stack_path);
    RunManifest manifest;
    try {
      manifest = read_manifest(mpath);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("cannot load the stack's sidecar manifest (") + e.what() +
                               "); pass the config file explicitly");
    }
    config = resolve_run_config(manifest.config);
  }
  const BpfsInfo info = read_bpfs_info(stack_path);
  if (info.config_hash != config.hash())
    throw std::runtime_error(stack_path + ": config hash in header does not match the supplied config");
  LoadedStack loaded{read_bpfs(stack_path, config.sensor), config};
  return loaded;
}

// ---------------------------------------------------------------------------
// project

inline AxisKind parse_kind(const std::string& kind) {
  if (kind == "minus") return AxisKind::MinusPosition;
  if (kind == "sum") return AxisKind::SumMomentum;
  if (kind == "corrected-sum") return AxisKind::CorrectedSumMomentum;
  throw std::invalid_argument("unknown projection kind '" + kind +
                              "' (expected minus, sum or corrected-sum)");
}

inline const char* kind_flag_name(AxisKind kind) {
  switch (kind) {
    case AxisKind::MinusPosition: return "minus";
    case AxisKind::SumMomentum: return "sum";
    case AxisKind::CorrectedSumMomentum: return "corrected-sum";
  }
  return "unknown";
}

inline ProjectionResult project_stack(const FrameStack& stack, AxisKind kind,
                                      const OpticalConfig& optics, const ProjectionOptions& opts) {
  switch (kind) {
    case AxisKind::MinusPosition:
      return minus_projection(stack, opts);
    case AxisKind::SumMomentum:
      return sum_projection(stack, opts);
    case AxisKind::CorrectedSumMomentum:
      return corrected_sum_projection(stack, optics.lambda_signal, optics.lambda_idler, opts);
  }
  throw std::invalid_argument("project_stack: unknown kind");
}

// ---------------------------------------------------------------------------
// certify

struct CertifySummary {
  FitResult fit_minus;
  FitResult fit_momentum;
  AxisKind momentum_kind = AxisKind::CorrectedSumMomentum;
  EprReport report;
};

inline CertifySummary certify_projections(const ProjectionResult& minus,
                                          const ProjectionResult& momentum,
                                          const RunConfig& config, double threshold_sigma = 3.0,
                                          FitShape shape = FitShape::Isotropic2D,
                                          const BootstrapOptions& bopts = {}) {
  require(minus.projection.axis_kind == AxisKind::MinusPosition,
          "certify: first projection must be a minus-coordinate projection");
  require(momentum.projection.axis_kind != AxisKind::MinusPosition,
          "certify: second projection must be a sum or corrected-sum projection");
  CertifySummary out;
  out.fit_minus = fit_gaussian_peak(minus, shape, bopts);
  out.fit_momentum = fit_gaussian_peak(momentum, shape, bopts);
  out.momentum_kind = momentum.projection.axis_kind;
  const PhysicalWidth delta_r = to_crystal_plane(out.fit_minus, AxisKind::MinusPosition, config.optics);
  const PhysicalWidth delta_p = to_crystal_plane(out.fit_momentum, out.momentum_kind, config.optics);
  out.report = epr_certify(delta_r, delta_p, threshold_sigma);
  out.report.config_hash_hex = Sha256::hex(config.hash());
  out.report.seed = config.seed;
  out.report.n_frames = config.frames;
  return out;
}

inline std::string epr_report_text(const CertifySummary& s, const RunConfig& config) {
  const EprReport& r = s.report;
  std::string out;
  out += "EPR certification report\n";
  out += "------------------------\n";
  out += "pump waist [um]:        " + format1("%.4g", to_um(config.optics.pump_waist)) + "\n";
  out += "crystal length [mm]:    " + format1("%.4g", to_mm(config.optics.crystal_length)) + "\n";
  out += "momentum projection:    " + std::string(axis_kind_name(s.momentum_kind)) + "\n";
  out += "delta_r [um]:           " + with_uncertainty(to_um(r.delta_r), to_um(r.delta_r_sigma)) + "\n";
  out += "delta_p [hbar/mm]:      " +
         with_uncertainty(to_hbar_per_mm(r.delta_p), to_hbar_per_mm(r.delta_p_sigma)) + "\n";
  out += "product [hbar]:         " + with_uncertainty(r.product, r.product_sigma) + "\n";
  out += "bound [hbar]:           0.5\n";
  out += "significance [sigma]:   " + format1("%.3g", r.significance) + "\n";
  out += "violated:               " + std::string(r.violated ? "yes" : "no") + " (threshold " +
         format1("%.3g", r.threshold_sigma) + " sigma)\n";
  out += "fit goodness (minus):   " + format1("%.3g", s.fit_minus.goodness) + "\n";
  out += "fit goodness (momentum):" + format1("%.3g", s.fit_momentum.goodness) + "\n";
  out += "frames:                 " + std::to_string(r.n_frames) + "\n";
  out += "seed:                   " + std::to_string(r.seed) + "\n";
  out += "config sha256:          " + r.config_hash_hex + "\n";
  return out;
}

inline std::string epr_csv_header() {
  return "waist_um,crystal_mm,variant,delta_r_um,delta_r_err_um,delta_p_hbar_mm,delta_p_err_hbar_mm,"
         "product_hbar,product_err_hbar,violated,significance\n";
}

inline std::string epr_csv_row(const EprReport& r, const RunConfig& config, const char* variant) {
  char buf[320];
  std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%s,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%d,%.6g\n",
                to_um(config.optics.pump_waist), to_mm(config.optics.crystal_length), variant,
                to_um(r.delta_r), to_um(r.delta_r_sigma), to_hbar_per_mm(r.delta_p),
                to_hbar_per_mm(r.delta_p_sigma), r.product, r.product_sigma, r.violated ? 1 : 0,
                r.significance);
  return buf;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRequest {
  std::vector<double> waists_um = {60, 80, 140, 160};
  std::vector<double> crystals_mm = {5, 10};
  uint32_t frames = 10000;
  uint64_t seed = 1;
  int threads = 0;
  double threshold_sigma = 3.0;
};

struct SweepPoint {
  double waist_um = 0;
  double crystal_mm = 0;
  bool failed = false;
  std::string error;
  EprReport corrected;
  EprReport uncorrected;
  RunConfig momentum_config;  // per-point resolved configs (for manifests)
  RunConfig position_config;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  struct CrystalFit {
    double crystal_mm = 0;
    ScalingFit corrected;
    double injected_delta_r_um = 0;
  };
  std::vector<CrystalFit> fits;
  double crystal_ratio = 0;        // a(longer) / a(shorter), 0 when unavailable
  double crystal_ratio_sigma = 0;
};

// Build the per-point config: waist and crystal length substituted, state
// re-derived, with the momentum marginal held fixed at the value derived
// from the reference waist so the uncorrected broadening stays comparable
// across the sweep.
inline RunConfig sweep_point_config(const RunConfig& base, double waist_um, double crystal_mm,
                                    double reference_waist_um, Basis basis, uint32_t frames,
                                    uint64_t seed) {
  require(base.resolved.at("state.mode") == "derived",
          "sweep: requires state.mode = derived (waist scaling needs the parametric state)");
  require(base.position_sensor.has_value(),
          "sweep: config must provide the position_sensor.* block");
  KeyValues raw = base.resolved;
  raw["optics.pump_waist_um"] = format1("%.17g", waist_um);
  raw["optics.crystal_length_mm"] = format1("%.17g", crystal_mm);
  raw["run.basis"] = basis_name(basis);
  raw["run.frames"] = std::to_string(frames);
  raw["run.seed"] = std::to_string(seed);

  const double c_p = configdetail::parse_double("state.c_p", raw.at("state.c_p"));
  const double c_r = configdetail::parse_double("state.c_r", raw.at("state.c_r"));
  const double ms = configdetail::parse_double("state.marginal_scale", raw.at("state.marginal_scale"));
  const double lambda_pump_m =
      from_nm(configdetail::parse_double("optics.lambda_pump_nm", raw.at("optics.lambda_pump_nm")));
  const double sigma_plus_mom = c_p / from_um(waist_um);                          // [1/m]
  const double sigma_minus_pos = c_r * std::sqrt(from_mm(crystal_mm) * lambda_pump_m);
  const double sigma_minus_mom = ms * c_p / from_um(reference_waist_um);          // held fixed
  const double sigma_plus_pos = ms * sigma_minus_pos;
  raw["state.mode"] = "explicit";
  raw.erase("state.c_p");
  raw.erase("state.c_r");
  raw.erase("state.marginal_scale");
  raw["state.sigma_minus_pos_um"] = format1("%.17g", to_um(sigma_minus_pos));
  raw["state.sigma_plus_mom_hbar_mm"] = format1("%.17g", to_hbar_per_mm(sigma_plus_mom));
  raw["state.sigma_plus_pos_um"] = format1("%.17g", to_um(sigma_plus_pos));
  raw["state.sigma_minus_mom_hbar_mm"] = format1("%.17g", to_hbar_per_mm(sigma_minus_mom));

  if (basis == Basis::Position) {
    // the position block becomes this run's active sensor
    for (const char* suffix : {"pixel_pitch_um", "width_px", "height_px", "roi_signal", "roi_idler",
                               "quantum_efficiency", "dark_count_prob", "mean_pairs_per_frame"}) {
      const std::string src = std::string("position_sensor.") + suffix;
      if (raw.count(src)) raw[std::string("sensor.") + suffix] = raw.at(src);
    }
  }
  for (auto it = raw.begin(); it != raw.end();)
    it = it->first.rfind("position_sensor.", 0) == 0 ? raw.erase(it) : std::next(it);
  return resolve_run_config(raw);
}

inline SweepResult run_sweep(const RunConfig& base, const SweepRequest& request,
                             const std::function<void(const std::string&)>& log = nullptr,
                             const BootstrapOptions& bopts = {}) {
  require(!request.waists_um.empty(), "sweep: need at least one waist");
  require(!request.crystals_mm.empty(), "sweep: need at least one crystal length");
  const double reference_waist = request.waists_um.front();
  SweepResult result;
  uint64_t point_index = 0;
  for (double crystal : request.crystals_mm) {
    for (double waist : request.waists_um) {
      SweepPoint point;
      point.waist_um = waist;
      point.crystal_mm = crystal;
      try {
        point.momentum_config =
            sweep_point_config(base, waist, crystal, reference_waist, Basis::Momentum,
                               request.frames, stream_seed(request.seed, 2 * point_index));
        point.position_config =
            sweep_point_config(base, waist, crystal, reference_waist, Basis::Position,
                               request.frames, stream_seed(request.seed, 2 * point_index + 1));
        if (log)
          log("sweep point: waist " + format1("%.4g", waist) + " um, crystal " +
              format1("%.4g", crystal) + " mm");
        ProjectionOptions opts = point.momentum_config.estimator;
        opts.threads = request.threads;

        FrameStack momentum_stack = simulate_from_config(point.momentum_config, request.threads);
        ProjectionResult corrected = project_stack(momentum_stack, AxisKind::CorrectedSumMomentum,
                                                   point.momentum_config.optics, opts);
        ProjectionResult uncorrected =
            project_stack(momentum_stack, AxisKind::SumMomentum, point.momentum_config.optics, opts);

        FrameStack position_stack = simulate_from_config(point.position_config, request.threads);
        ProjectionResult minus =
            project_stack(position_stack, AxisKind::MinusPosition, point.position_config.optics, opts);

        point.corrected = certify_projections(minus, corrected, point.momentum_config,
                                              request.threshold_sigma, FitShape::Isotropic2D, bopts)
                              .report;
        point.uncorrected = certify_projections(minus, uncorrected, point.momentum_config,
                                                request.threshold_sigma, FitShape::Isotropic2D, bopts)
                                .report;
      } catch (const std::exception& e) {
        point.failed = true;
        point.error = e.what();
        if (log) log(std::string("sweep point failed: ") + e.what());
      }
      result.points.push_back(std::move(point));
      ++point_index;
    }
  }

  for (double crystal : request.crystals_mm) {
    std::vector<ScalingPoint> pts;
    double injected_delta_r = 0;
    for (const auto& point : result.points) {
      if (point.crystal_mm != crystal || point.failed) continue;
      pts.push_back({point.waist_um, point.corrected.product, point.corrected.product_sigma});
      injected_delta_r = to_um(point.momentum_config.state.sigma_minus_pos);
    }
    if (pts.size() >= 2) {
      SweepResult::CrystalFit fit;
      fit.crystal_mm = crystal;
      fit.corrected = fit_scaling_law(pts);
      fit.injected_delta_r_um = injected_delta_r;
      result.fits.push_back(fit);
    }
  }
  if (result.fits.size() >= 2) {
    // ratio of the longer crystal's coefficient to the shorter's
    const auto* lo = &result.fits[0];
    const auto* hi = &result.fits[0];
    for (const auto& f : result.fits) {
      if (f.crystal_mm < lo->crystal_mm) lo = &f;
      if (f.crystal_mm > hi->crystal_mm) hi = &f;
    }
    if (lo != hi && lo->corrected.a > 0) {
      result.crystal_ratio = hi->corrected.a / lo->corrected.a;
      const double rel = std::sqrt(std::pow(hi->corrected.a_sigma / hi->corrected.a, 2) +
                                   std::pow(lo->corrected.a_sigma / lo->corrected.a, 2));
      result.crystal_ratio_sigma = result.crystal_ratio * rel;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// oracle comparison

struct OracleComparison {
  AxisKind kind = AxisKind::MinusPosition;
  double max_abs = 0;
  double max_rel = 0;        // vs max |oracle|
  double rms_over_peak = 0;  // vs oracle peak height
  double tolerance = 0;
  bool pass = false;
};

// Compare the FFT path against the brute-force/event-exact oracle. The
// integer-shift kinds must agree to float accumulation error; the corrected
// kind carries the bilinear-resampling tolerance.
inline OracleComparison compare_with_oracle(const FrameStack& stack, AxisKind kind,
                                            const OpticalConfig& optics,
                                            const ProjectionOptions& opts = {}) {
  OracleComparison cmp;
  cmp.kind = kind;
  const ProjectionResult fast = project_stack(stack, kind, optics, opts);
  const Projection oracle =
      brute_force_projection(stack, kind, optics.lambda_signal, optics.lambda_idler,
                             opts.accidentals, opts.max_resampled_px);
  require(fast.projection.values.size() == oracle.values.size(),
          "oracle comparison: dimension mismatch");
  double max_brute = 0, peak = 0, sq = 0;
  for (size_t i = 0; i < oracle.values.size(); ++i) {
    const double d = std::abs(fast.projection.values[i] - oracle.values[i]);
    cmp.max_abs = std::max(cmp.max_abs, d);
    max_brute = std::max(max_brute, std::abs(oracle.values[i]));
    peak = std::max(peak, oracle.values[i]);
    sq += d * d;
  }
  cmp.max_rel = max_brute > 0 ? cmp.max_abs / max_brute : cmp.max_abs;
  cmp.rms_over_peak = peak > 0 ? std::sqrt(sq / oracle.values.size()) / peak : 0.0;
  if (kind == AxisKind::CorrectedSumMomentum) {
    cmp.tolerance = 0.02;
    cmp.pass = cmp.rms_over_peak <= cmp.tolerance;
  } else {
    cmp.tolerance = 1e-9;
    cmp.pass = cmp.max_rel <= cmp.tolerance;
  }
  return cmp;
}

}  // namespace spdc
